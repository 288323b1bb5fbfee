//! Dimension-gap constructions: adding a Euclidean line to one side turns a
//! rolling problem with `|n − n̂| = 1` into one of equal dimensions.
//!
//! The line is always the first factor, so `∂_r` is the first coordinate
//! and the first frame vector of `R × M` (the product frame is block
//! diagonal). On the target side the lift sends `ker A` to `∂_r`; on the
//! source side it sends `∂_r` to the unit normal of `im A`. Signs are fixed
//! by requiring `det A¹ > 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::linalg::null_space;
use crate::manifold::ManifoldSpec;
use crate::rolling::roll;
use crate::state::{oriented_completion, partial_isometry_residual, RollingPair, RollingState};

/// Which manifold receives the extra line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapSide {
    /// Roll `M` on `R × M̂` (`n̂ = n − 1`, or `n̂ = n` for the plain embedding).
    TargetAugmented,
    /// Roll `R × M` on `M̂` (`n = n̂ − 1`).
    SourceAugmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapConfig {
    pub side: GapSide,
    /// Line coordinate of the lifted state.
    #[serde(default)]
    pub offset: f64,
}

/// `R × M` with the line first.
pub fn line_product(spec: &ManifoldSpec) -> Result<ManifoldSpec> {
    ManifoldSpec::product(vec![ManifoldSpec::euclidean(1), spec.clone()])
}

fn prepend(a: f64, x: &DVector<f64>) -> DVector<f64> {
    let mut v = DVector::zeros(x.len() + 1);
    v[0] = a;
    v.rows_mut(1, x.len()).copy_from(x);
    v
}

/// The augmented pair for `side`, after checking the dimension gap.
pub fn lifted_pair(pair: &RollingPair, side: GapSide) -> Result<RollingPair> {
    let (n, n_hat) = (pair.n(), pair.n_hat());
    match side {
        GapSide::TargetAugmented if n == n_hat + 1 || n == n_hat => Ok(RollingPair::new(pair.m.clone(), line_product(&pair.m_hat)?)),
        GapSide::SourceAugmented if n + 1 == n_hat => Ok(RollingPair::new(line_product(&pair.m)?, pair.m_hat.clone())),
        _ => Err(Error::Dimension(format!("no {side:?} construction for dimensions ({n}, {n_hat})"))),
    }
}

/// `ι_a(q) = (x, (a, x̂); A¹)` with `A¹ = [s kᵀ; A]`, `k` spanning `ker A`.
/// For `n = n̂` the kernel is trivial and `A¹ = [0; A]`.
pub fn lift_target(pair: &RollingPair, q: &RollingState, offset: f64) -> Result<RollingState> {
    let lifted = lifted_pair(pair, GapSide::TargetAugmented)?;
    pair.check(q)?;
    let a = q.a();
    let (n_hat, n) = a.shape();
    let mut a1 = DMatrix::zeros(n_hat + 1, n);
    a1.view_mut((1, 0), (n_hat, n)).copy_from(a);
    if n == n_hat + 1 {
        let k = null_space(a, 1e-9);
        if k.ncols() != 1 {
            return Err(Error::RankDeficient { ratio: 0.0 });
        }
        a1.row_mut(0).copy_from(&k.column(0).transpose());
        if a1.determinant() < 0.0 {
            let flipped = -a1.row(0);
            a1.row_mut(0).copy_from(&flipped);
        }
    }
    let q1 = RollingState::trusted(q.x().clone(), prepend(offset, q.x_hat()), a1);
    lifted.check(&q1)?;
    Ok(q1)
}

/// `Π(x, (r, x̂); A¹) = (x, x̂; A¹ without its first row)`.
pub fn project_target(q1: &RollingState) -> Result<RollingState> {
    let a1 = q1.a();
    let a = a1.rows(1, a1.nrows() - 1).into_owned();
    if partial_isometry_residual(&a) > 1e-6 {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    let xh = q1.x_hat().rows(1, q1.x_hat().len() - 1).into_owned();
    Ok(RollingState::trusted(q1.x().clone(), xh, a))
}

/// `ι_a(q) = ((a, x), x̂; A¹)` with `A¹ = [ν | A]`, `ν` the oriented unit
/// normal of `im A`.
pub fn lift_source(pair: &RollingPair, q: &RollingState, offset: f64) -> Result<RollingState> {
    let lifted = lifted_pair(pair, GapSide::SourceAugmented)?;
    pair.check(q)?;
    let a = q.a();
    let (n_hat, n) = a.shape();
    let full = oriented_completion(a);
    let mut a1 = DMatrix::zeros(n_hat, n + 1);
    a1.view_mut((0, 1), (n_hat, n)).copy_from(a);
    a1.set_column(0, &full.column(n));
    if a1.determinant() < 0.0 {
        let flipped = -a1.column(0);
        a1.set_column(0, &flipped);
    }
    let q1 = RollingState::trusted(prepend(offset, q.x()), q.x_hat().clone(), a1);
    lifted.check(&q1)?;
    Ok(q1)
}

/// `Π((r, x), x̂; A¹) = (x, x̂; A¹ without its first column)`.
pub fn project_source(q1: &RollingState) -> Result<RollingState> {
    let a1 = q1.a();
    let a = a1.columns(1, a1.ncols() - 1).into_owned();
    if partial_isometry_residual(&a) > 1e-6 {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    let x = q1.x().rows(1, q1.x().len() - 1).into_owned();
    Ok(RollingState::trusted(x, q1.x_hat().clone(), a))
}

pub fn lift(pair: &RollingPair, q: &RollingState, cfg: &GapConfig) -> Result<RollingState> {
    match cfg.side {
        GapSide::TargetAugmented => lift_target(pair, q, cfg.offset),
        GapSide::SourceAugmented => lift_source(pair, q, cfg.offset),
    }
}

pub fn project(q1: &RollingState, side: GapSide) -> Result<RollingState> {
    match side {
        GapSide::TargetAugmented => project_target(q1),
        GapSide::SourceAugmented => project_source(q1),
    }
}

/// Residuals comparing lifted and base rolling under the same control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommutationReport {
    pub side: GapSide,
    /// `sup_t d(Π(q¹(t)), q(t))`.
    pub projection_error: f64,
    /// `‖Π ∘ ι − id‖` at the initial state (exactly zero by construction).
    pub identity_error: f64,
    /// Target side: line coordinate vs. quadrature of `(first row of A¹) · u`.
    pub line_quadrature_error: Option<f64>,
    /// Source side: largest distance of `q¹(t)` from `ι(Q)` (line coordinate
    /// drift and normal-column mismatch).
    pub leaves_lift: Option<f64>,
    pub samples: usize,
}

/// Rolls `q` and `ι(q)` with the same control and compares samplewise. On
/// the source side the lifted control has zero `∂_r` component.
pub fn commutation_check(pair: &RollingPair, q: &RollingState, control: &ControlSignal, cfg: &GapConfig, step: f64) -> Result<CommutationReport> {
    let lifted = lifted_pair(pair, cfg.side)?;
    let q1 = lift(pair, q, cfg)?;
    let identity_error = project(&q1, cfg.side)?.distance(q);
    let base = roll(pair, q, control, step)?.into_result()?;
    let control1 = match cfg.side {
        GapSide::TargetAugmented => control.clone(),
        GapSide::SourceAugmented => {
            let n = pair.n();
            control.mapped(&DMatrix::from_fn(n + 1, n, |i, j| if i == j + 1 { 1.0 } else { 0.0 }))
        }
    };
    let up = roll(&lifted, &q1, &control1, step)?.into_result()?;
    let mut projection_error: f64 = 0.0;
    for (qb, ql) in base.states.iter().zip(&up.states) {
        projection_error = projection_error.max(project(ql, cfg.side)?.distance(qb));
    }
    let (line_quadrature_error, leaves_lift) = match cfg.side {
        GapSide::TargetAugmented => {
            // r(t) = a + ∫ A¹[0, :] u dt, trapezoid on the stored samples
            let mut r = cfg.offset;
            let mut worst: f64 = 0.0;
            for k in 1..up.len() {
                let dt = up.times[k] - up.times[k - 1];
                let left = (up.states[k - 1].a().row(0) * control1.value_near(up.times[k - 1] + 0.5 * dt, up.times[k - 1]))[0];
                let right = (up.states[k].a().row(0) * control1.value_near(up.times[k - 1] + 0.5 * dt, up.times[k]))[0];
                r += 0.5 * dt * (left + right);
                worst = worst.max((up.states[k].x_hat()[0] - r).abs());
            }
            (Some(worst), None)
        }
        GapSide::SourceAugmented => {
            let mut worst: f64 = 0.0;
            for ql in &up.states {
                let back = lift_source(pair, &project_source(ql)?, cfg.offset)?;
                worst = worst.max(back.distance(ql));
            }
            (None, Some(worst))
        }
    };
    Ok(CommutationReport { side: cfg.side, projection_error, identity_error, line_quadrature_error, leaves_lift, samples: up.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::transport::ControlPiece;
    use crate::state::i_nnhat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn target_lift_sends_kernel_to_the_line() {
        let pair = RollingPair::new(ManifoldSpec::sphere(3, 1.0), ManifoldSpec::euclidean(2));
        let q = pair.standard_state();
        assert_eq!(q.a(), &i_nnhat(3, 2));
        let q1 = lift_target(&pair, &q, 0.5).unwrap();
        let e3 = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let image = q1.a() * e3;
        assert!((image.abs() - DVector::from_vec(vec![1.0, 0.0, 0.0])).norm() < 1e-15);
        assert!((q1.a().transpose() * q1.a() - DMatrix::<f64>::identity(3, 3)).norm() < 1e-12);
        assert_eq!(project_target(&q1).unwrap(), q);
    }

    #[test]
    fn projections_invert_lifts_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let target = RollingPair::new(ManifoldSpec::sphere(3, 1.0), ManifoldSpec::sphere(2, 1.0));
        let source = RollingPair::new(ManifoldSpec::sphere(2, 1.0), ManifoldSpec::hyperbolic(3, 1.0));
        for _ in 0..10 {
            let q = target.random_state(&mut rng);
            assert_eq!(project_target(&lift_target(&target, &q, 0.3).unwrap()).unwrap(), q);
            let q = source.random_state(&mut rng);
            let q1 = lift_source(&source, &q, -0.2).unwrap();
            assert!(q1.a().determinant() > 0.0);
            assert_eq!(project_source(&q1).unwrap(), q);
        }
    }

    #[test]
    fn wrong_gap_is_rejected() {
        let pair = RollingPair::new(ManifoldSpec::sphere(2, 1.0), ManifoldSpec::euclidean(2));
        let q = pair.standard_state();
        assert!(matches!(lift_source(&pair, &q, 0.0), Err(Error::Dimension(_))));
        let wide = RollingPair::new(ManifoldSpec::sphere(3, 1.0), ManifoldSpec::euclidean(1));
        assert!(matches!(lift_target(&wide, &wide.standard_state(), 0.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn rolling_commutes_with_projection() {
        let control = ControlSignal::piecewise(vec![
            ControlPiece { duration: 0.4, u: vec![0.8, -0.3, 0.5] },
            ControlPiece { duration: 0.4, u: vec![-0.2, 0.6, 0.4] },
        ]);
        let pair = RollingPair::new(ManifoldSpec::sphere(3, 1.0), ManifoldSpec::sphere(2, 2.0));
        let q = pair.random_state(&mut ChaCha8Rng::seed_from_u64(5));
        let r = commutation_check(&pair, &q, &control, &GapConfig { side: GapSide::TargetAugmented, offset: 0.1 }, 1e-3).unwrap();
        assert_eq!(r.identity_error, 0.0);
        assert!(r.projection_error < 1e-6, "{r:?}");
        assert!(r.line_quadrature_error.unwrap() < 1e-6, "{r:?}");

        let pair = RollingPair::new(ManifoldSpec::sphere(2, 1.0), ManifoldSpec::hyperbolic(3, 1.0));
        let control = ControlSignal::piecewise(vec![ControlPiece { duration: 0.6, u: vec![0.5, 0.4] }, ControlPiece { duration: 0.3, u: vec![-0.7, 0.2] }]);
        let q = pair.random_state(&mut ChaCha8Rng::seed_from_u64(6));
        let r = commutation_check(&pair, &q, &control, &GapConfig { side: GapSide::SourceAugmented, offset: 0.0 }, 1e-3).unwrap();
        assert!(r.projection_error < 1e-6, "{r:?}");
        assert!(r.leaves_lift.unwrap() < 1e-6, "{r:?}");
    }
}
