//! Shared fixtures for the criterion benchmarks.

use nalgebra::DVector;
use rollman_core::{ControlSignal, ManifoldSpec, RollingPair, RollingState};

/// A rolling problem: pair, initial state and a control.
pub struct Fixture {
    pub name: &'static str,
    pub pair: RollingPair,
    pub q0: RollingState,
    pub control: ControlSignal,
}

fn fixture(name: &'static str, m: ManifoldSpec, m_hat: ManifoldSpec, u: &[f64]) -> Fixture {
    let pair = RollingPair::new(m, m_hat);
    let q0 = pair.standard_state();
    Fixture { name, pair, q0, control: ControlSignal::constant(u, 1.0) }
}

/// Sphere on plane, unequal spheres in 3D and a sphere inside hyperbolic space.
pub fn fixtures() -> Vec<Fixture> {
    vec![
        fixture("S2/R2", ManifoldSpec::sphere(2, 1.0), ManifoldSpec::euclidean(2), &[0.6, 0.8]),
        fixture("S3/S3(2)", ManifoldSpec::sphere(3, 1.0), ManifoldSpec::sphere(3, 2.0), &[0.6, 0.0, 0.8]),
        fixture("S2/H3", ManifoldSpec::sphere(2, 1.0), ManifoldSpec::hyperbolic(3, 1.0), &[0.8, -0.6]),
    ]
}

/// Two fixed, non-parallel tangent vectors in `R^n`.
pub fn probe_pair(n: usize) -> (DVector<f64>, DVector<f64>) {
    let x = DVector::from_fn(n, |i, _| 1.0 / (i + 1) as f64);
    let y = DVector::from_fn(n, |i, _| if i % 2 == 0 { 0.5 } else { -1.0 });
    (x, y)
}
