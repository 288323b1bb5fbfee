//! Independent cross-checks of integrated rolling motions.
//!
//! Each check recomputes a trajectory by a second route (frame transport
//! along the recorded curves, closed-form geodesics, the isometry action)
//! and reports the sup-norm disagreement.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::control::{ControlFrame, ControlSignal};
use crate::error::{Error, Result};
use crate::flow::{flow_bracket_oracle, QField};
use crate::linalg::rotation_angle_2d;
use crate::manifold::isometry::Isometry;
use crate::manifold::transport::develop;
use crate::rol::{MField, RolContext};
use crate::rolling::{roll, roll_geodesic, roll_ns, RollingTrajectory};
use crate::state::{RollingPair, RollingState};

/// Sup Frobenius distance between the integrated `A(t)` and the transport
/// composition `T̂(t) A_0 T(t)ᵀ` along the recorded base curves.
pub fn transport_equivalence(pair: &RollingPair, traj: &RollingTrajectory, step: f64) -> Result<f64> {
    let rebuilt = roll_ns(pair, &traj.states[0], &traj.x_path()?, &traj.x_hat_path()?, step)?;
    Ok(traj
        .states
        .iter()
        .zip(&rebuilt.states)
        .map(|(a, b)| (a.a() - b.a()).norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeodesicAgreement {
    /// Sup distance between closed-form and integrated states.
    pub state_error: f64,
    /// Sup distance of the development of `x(t)` from the ray `t·u`.
    pub ray_error: f64,
    /// Same for `x̂(t)` against `t·A_0u`.
    pub ray_error_hat: f64,
}

/// Rolls along the geodesic with initial frame velocity `u` both ways.
pub fn geodesic_agreement(pair: &RollingPair, q0: &RollingState, u: &DVector<f64>, horizon: f64, step: f64) -> Result<GeodesicAgreement> {
    let closed = roll_geodesic(pair, q0, u, horizon, step)?;
    let control = ControlSignal::constant(u.as_slice(), horizon).in_frame(ControlFrame::Parallel);
    let integrated = roll(pair, q0, &control, step)?.into_result()?;
    let end = integrated.final_state().distance(closed.final_state());
    let grid = closed.sup_distance(&integrated).max(end);
    let ray = |dev: crate::manifold::transport::SampledPath, v: &DVector<f64>| {
        dev.times().iter().zip(dev.points()).map(|(t, p)| (p - v * *t).amax()).fold(0.0, f64::max)
    };
    let ray_error = ray(develop(&pair.m, &closed.x_path()?, step)?, u);
    let ray_error_hat = ray(develop(&pair.m_hat, &closed.x_hat_path()?, step)?, &(q0.a() * u));
    Ok(GeodesicAgreement { state_error: grid, ray_error, ray_error_hat })
}

/// Largest distance between `(f, f̂)·q(t)` and the motion started from
/// `(f, f̂)·q_0`. The control refers to the parallel frame, which the
/// action carries along by its differential at the initial point.
pub fn equivariance_error(
    pair: &RollingPair,
    q0: &RollingState,
    control: &ControlSignal,
    f: &Isometry,
    f_hat: &Isometry,
    step: f64,
) -> Result<f64> {
    if control.frame != ControlFrame::Parallel {
        return Err(Error::InvalidArgument("equivariance is checked with parallel-frame controls".into()));
    }
    f.validate(&pair.m)?;
    f_hat.validate(&pair.m_hat)?;
    let base = roll(pair, q0, control, step)?.into_result()?;
    let p0 = pair.act_isometry(q0, f, f_hat)?;
    let d0 = f.frame_differential(&pair.m, p0.x())?;
    let moved_control = map_control(control, &d0.transpose());
    let moved = roll(pair, &p0, &moved_control, step)?.into_result()?;
    if moved.len() != base.len() {
        return Err(Error::InvalidArgument("trajectories are sampled differently".into()));
    }
    let mut worst: f64 = 0.0;
    for (q, p) in base.states.iter().zip(&moved.states) {
        worst = worst.max(pair.act_isometry(q, f, f_hat)?.distance(p));
    }
    Ok(worst)
}

fn map_control(control: &ControlSignal, m: &DMatrix<f64>) -> ControlSignal {
    use crate::control::ControlData;
    let apply = |u: &[f64]| (m * DVector::from_column_slice(u)).iter().copied().collect::<Vec<_>>();
    let mut out = control.clone();
    match &mut out.data {
        ControlData::Piecewise(pieces) => pieces.iter_mut().for_each(|p| p.u = apply(&p.u)),
        ControlData::Samples(samples) => samples.iter_mut().for_each(|s| s.u = apply(&s.u)),
    }
    out
}

/// Loop summary of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopSummary {
    /// Distance of `x(T)` from `x(0)` in chart coordinates.
    pub closure: f64,
    /// Rotation angle of `A_0ᵀ A_T` for square 2x2 states.
    pub holonomy_angle: Option<f64>,
}

pub fn loop_summary(traj: &RollingTrajectory) -> LoopSummary {
    let (q0, q1) = (&traj.states[0], traj.final_state());
    let closure = (q1.x() - q0.x()).norm();
    let holonomy_angle = (q0.n() == 2 && q0.n_hat() == 2).then(|| rotation_angle_2d(&(q0.a().transpose() * q1.a())));
    LoopSummary { closure, holonomy_angle }
}

/// The parallel-frame loop `e_1, e_2, −e_1`, each leg of length `π r / 2`.
/// On a sphere of radius `r` it traces the boundary of an octant.
pub fn octant_loop(radius: f64) -> ControlSignal {
    use crate::manifold::transport::ControlPiece;
    let d = std::f64::consts::FRAC_PI_2 * radius;
    ControlSignal::piecewise(vec![
        ControlPiece { duration: d, u: vec![1.0, 0.0] },
        ControlPiece { duration: d, u: vec![0.0, 1.0] },
        ControlPiece { duration: d, u: vec![-1.0, 0.0] },
    ])
    .in_frame(ControlFrame::Parallel)
}

/// Largest disagreement of each closed-form bracket with the flow oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketGate {
    pub states: usize,
    pub seed: u64,
    pub oracle_step: f64,
    pub lr: f64,
    pub lr_nu: f64,
    pub nu_nu: f64,
    /// Largest self-estimated oracle error.
    pub oracle_error: f64,
    /// Largest norm of the nu-nu bracket seen; zero means the check was vacuous.
    pub nu_nu_scale: f64,
}

impl BracketGate {
    pub fn worst(&self) -> f64 {
        self.lr.max(self.lr_nu).max(self.nu_nu)
    }
}

/// Compares the closed-form brackets of random fields with the flow oracle
/// at `states` seeded random states.
pub fn bracket_gate(pair: &RollingPair, states: usize, seed: u64, h: f64) -> Result<BracketGate> {
    let n = pair.n();
    let rows: Vec<[f64; 5]> = (0..states)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64 + 1);
            let q = pair.random_state(&mut rng);
            let ctx = RolContext::new(pair, &q)?;
            let mut rv = || DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let (x, y, z) = (MField::FrameConstant(rv()), MField::ParallelAt { base: q.x().clone(), value: rv() }, MField::FrameConstant(rv()));
            let w = [rv(), rv(), rv(), rv()];
            let at = |f: &MField| f.at(&pair.m, q.x());

            let lr = flow_bracket_oracle(pair, &q, &QField::RollingLift(x.clone()), &QField::RollingLift(y.clone()), h)?;
            let lr_err = ctx.lr_bracket(&at(&x)?, &at(&y)?).sub(&lr.triple).norm();

            let lv = QField::RolVertical(x.clone(), y.clone());
            let lrn = flow_bracket_oracle(pair, &q, &QField::RollingLift(z.clone()), &lv, h)?;
            let lrn_err = ctx.lr_nu_bracket(&at(&z)?, &at(&x)?, &at(&y)?)?.sub(&lrn.triple).norm();

            let f = |i: usize| MField::FrameConstant(w[i].clone());
            let nn = flow_bracket_oracle(pair, &q, &QField::RolVertical(f(0), f(1)), &QField::RolVertical(f(2), f(3)), h)?;
            let exact = ctx.nu_nu_bracket(&w[0], &w[1], &w[2], &w[3]);
            let nn_err = exact.sub(&nn.triple).norm();
            Ok([lr_err, lrn_err, nn_err, lr.error.max(lrn.error).max(nn.error), exact.norm()])
        })
        .collect::<Result<_>>()?;
    let max = |k: usize| rows.iter().map(|r| r[k]).fold(0.0, f64::max);
    Ok(BracketGate { states, seed, oracle_step: h, lr: max(0), lr_nu: max(1), nu_nu: max(2), oracle_error: max(3), nu_nu_scale: max(4) })
}
