//! Integration of the rolling system and the no-spin system in frames.
//!
//! In orthonormal frames the rolling equations read
//! `x' = F u`, `x̂' = F̂ A u`, `A' = A Γ(u) − Γ̂(A u) A`,
//! where `Γ`, `Γ̂` are the frame connection forms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::{ControlFrame, ControlSignal};
use crate::error::{Error, Result, Side};
use crate::linalg::{flatten_row_major, polar_factor};
use crate::manifold::geodesic::geodesic_path_frame;
use crate::manifold::isometry::Isometry;
use crate::manifold::transport::{frame_transport, SampledPath};
use crate::ode::{rk4_step, substeps, Packer};
use crate::state::{partial_isometry_residual, RollingPair, RollingState, TangentTriple};

/// Default integration step.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Aggregate residuals of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Diagnostics {
    /// `max ‖x̂' − A x'‖` over stored samples (finite differences in time).
    pub max_no_slip: f64,
    /// `max ‖A_{k+1} − T̂_k A_k T_kᵀ‖ / Δt` with independent one-step transports.
    pub max_no_spin: f64,
    /// Largest pre-projection partial-isometry residual of one step.
    pub max_drift: f64,
    /// Sum of pre-projection residuals over all steps.
    pub total_drift: f64,
}

/// Where and when a trajectory left a chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartExit {
    pub side: Side,
    pub time: f64,
}

/// Time-sampled solution with residual diagnostics.
#[derive(Debug, Clone)]
pub struct RollingTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<RollingState>,
    /// Frame components of `x'` at each sample (right-sided).
    pub controls: Vec<DVector<f64>>,
    /// Frame components of `x̂'` at each sample (right-sided).
    pub controls_hat: Vec<DVector<f64>>,
    /// Per-sample residuals; `None` where not measurable.
    pub no_slip: Vec<Option<f64>>,
    pub no_spin: Vec<Option<f64>>,
    pub drift: Vec<f64>,
    pub diagnostics: Diagnostics,
    /// Set when integration stopped at a chart boundary.
    pub exit: Option<ChartExit>,
    vx: OneSided,
    vxh: OneSided,
    kinks: Vec<bool>,
}

#[derive(Debug, Clone, Default)]
struct OneSided {
    minus: Vec<DVector<f64>>,
    plus: Vec<DVector<f64>>,
}

impl RollingTrajectory {
    pub fn final_state(&self) -> &RollingState {
        &self.states[self.states.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Fails with `DomainExit` if the integration was clipped.
    pub fn into_result(self) -> Result<Self> {
        match self.exit {
            Some(e) => Err(Error::DomainExit { side: e.side, time: e.time }),
            None => Ok(self),
        }
    }

    /// The base curve on `M` as a path with exact node velocities.
    pub fn x_path(&self) -> Result<SampledPath> {
        SampledPath::with_one_sided(
            self.times.clone(),
            self.states.iter().map(|q| q.x().clone()).collect(),
            self.vx.minus.clone(),
            self.vx.plus.clone(),
        )
    }

    /// The base curve on `M̂`.
    pub fn x_hat_path(&self) -> Result<SampledPath> {
        SampledPath::with_one_sided(
            self.times.clone(),
            self.states.iter().map(|q| q.x_hat().clone()).collect(),
            self.vxh.minus.clone(),
            self.vxh.plus.clone(),
        )
    }

    /// Largest max-norm distance between corresponding samples.
    pub fn sup_distance(&self, other: &RollingTrajectory) -> f64 {
        self.states.iter().zip(&other.states).map(|(a, b)| a.distance(b)).fold(0.0, f64::max)
    }

    /// CSV with columns `t, x.., x_hat.., A (row-major).., no_slip, no_spin, drift`.
    pub fn to_csv(&self) -> String {
        let q0 = &self.states[0];
        let (n, nh) = (q0.n(), q0.n_hat());
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..nh).map(|i| format!("x_hat{i}")));
        for i in 0..nh {
            for j in 0..n {
                header.push(format!("a{i}{j}"));
            }
        }
        header.extend(["no_slip", "no_spin", "drift"].map(String::from));
        let mut out = header.join(",");
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
        for (k, q) in self.states.iter().enumerate() {
            let mut row = vec![format!("{}", self.times[k])];
            row.extend(q.x().iter().map(|v| format!("{v}")));
            row.extend(q.x_hat().iter().map(|v| format!("{v}")));
            row.extend(flatten_row_major(q.a()).iter().map(|v| format!("{v}")));
            row.push(opt(self.no_slip[k]));
            row.push(opt(self.no_spin[k]));
            row.push(format!("{:e}", self.drift[k]));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn on_side(side: Side, time: f64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::OutOfDomain { .. } | Error::ChartExit { .. } => Error::DomainExit { side, time },
        other => other,
    }
}

/// Velocity of `Q` along the triple `(u, û, B)` at `(x, x̂, A)`:
/// `(F u, F̂ û, A Γ(u) − Γ̂(û) A + B)`.
pub(crate) fn q_velocity(
    pair: &RollingPair,
    x: &DVector<f64>,
    x_hat: &DVector<f64>,
    a: &DMatrix<f64>,
    v: &TangentTriple,
    time: f64,
) -> Result<(DVector<f64>, DVector<f64>, DMatrix<f64>)> {
    let pg = pair.m.geometry().at(x, 1).map_err(on_side(Side::Source, time))?;
    let pgh = pair.m_hat.geometry().at(x_hat, 1).map_err(on_side(Side::Target, time))?;
    let da = a * pg.connection.apply(&v.u) - pgh.connection.apply(&v.u_hat) * a + &v.b;
    Ok((&pg.frame * &v.u, &pgh.frame * &v.u_hat, da))
}

/// Integrates rolling along `control` from `q0` with fixed-step RK4. Chart
/// exits clip the trajectory and set `exit`.
pub fn roll(pair: &RollingPair, q0: &RollingState, control: &ControlSignal, step: f64) -> Result<RollingTrajectory> {
    pair.check(q0)?;
    let (n, nh) = (pair.n(), pair.n_hat());
    control.validate(n)?;
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let parallel = control.frame == ControlFrame::Parallel;
    let packer = Packer::new().block(n, 1).block(nh, 1).block(nh, n).block(n, n);
    let local_u = |y: &DVector<f64>, raw: &DVector<f64>| if parallel { packer.get(y, 3) * raw } else { raw.clone() };
    let rhs_for = |anchor: f64| {
        let packer = &packer;
        let local_u = &local_u;
        move |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
            let x = packer.vector(y, 0);
            let xh = packer.vector(y, 1);
            let a = packer.get(y, 2);
            let u = local_u(y, &control.value_near(anchor, t));
            let pg = pair.m.geometry().at(&x, 1).map_err(on_side(Side::Source, t))?;
            let pgh = pair.m_hat.geometry().at(&xh, 1).map_err(on_side(Side::Target, t))?;
            let uh = &a * &u;
            let om = pg.connection.apply(&u);
            let da = &a * &om - pgh.connection.apply(&uh) * &a;
            let dt = if parallel { -(&om * packer.get(y, 3)) } else { DMatrix::zeros(n, n) };
            Ok(packer.pack(&[
                &DMatrix::from_column_slice(n, 1, (&pg.frame * &u).as_slice()),
                &DMatrix::from_column_slice(nh, 1, (&pgh.frame * &uh).as_slice()),
                &da,
                &dt,
            ]))
        }
    };
    let coord_velocity = |y: &DVector<f64>, raw: &DVector<f64>, t: f64| -> Result<(DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>)> {
        let u = local_u(y, raw);
        let a = packer.get(y, 2);
        let uh = &a * &u;
        let f = pair.m.geometry().orthonormal_frame(&packer.vector(y, 0)).map_err(on_side(Side::Source, t))?;
        let fh = pair.m_hat.geometry().orthonormal_frame(&packer.vector(y, 1)).map_err(on_side(Side::Target, t))?;
        Ok((&f * &u, &fh * &uh, u, uh))
    };

    let mut y = packer.pack(&[
        &DMatrix::from_column_slice(n, 1, q0.x().as_slice()),
        &DMatrix::from_column_slice(nh, 1, q0.x_hat().as_slice()),
        q0.a(),
        &DMatrix::identity(n, n),
    ]);
    let mut times = vec![0.0];
    let mut states = vec![q0.clone()];
    let mut controls = Vec::new();
    let mut controls_hat = Vec::new();
    let mut drift = vec![0.0];
    let mut vx = OneSided::default();
    let mut vxh = OneSided::default();
    let mut kinks = vec![true];
    let mut exit = None;

    let bps = control.breakpoints();
    'segments: for w in bps.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let steps = substeps(tb - ta, step);
        let h = (tb - ta) / steps as f64;
        let anchor = 0.5 * (ta + tb);
        let rhs = rhs_for(anchor);
        for i in 0..steps {
            let t = ta + i as f64 * h;
            let node_vel = coord_velocity(&y, &control.value_near(anchor, t), t);
            let (vx_p, vxh_p, u_p, uh_p) = match node_vel {
                Ok(v) => v,
                Err(Error::DomainExit { side, time }) => {
                    exit = Some(ChartExit { side, time });
                    break 'segments;
                }
                Err(e) => return Err(e),
            };
            let next = match rk4_step(&rhs, t, &y, h) {
                Ok(v) => v,
                Err(Error::DomainExit { side, time }) => {
                    exit = Some(ChartExit { side, time });
                    break 'segments;
                }
                Err(e) => return Err(e),
            };
            let t_next = ta + (i + 1) as f64 * h;
            let x = packer.vector(&next, 0);
            let xh = packer.vector(&next, 1);
            if !pair.m.contains(&x) {
                exit = Some(ChartExit { side: Side::Source, time: t_next });
                break 'segments;
            }
            if !pair.m_hat.contains(&xh) {
                exit = Some(ChartExit { side: Side::Target, time: t_next });
                break 'segments;
            }
            let a_raw = packer.get(&next, 2);
            let a = polar_factor(&a_raw)?;
            let tm = if parallel { polar_factor(&packer.get(&next, 3))? } else { DMatrix::identity(n, n) };
            y = packer.pack(&[
                &DMatrix::from_column_slice(n, 1, x.as_slice()),
                &DMatrix::from_column_slice(nh, 1, xh.as_slice()),
                &a,
                &tm,
            ]);
            // right-sided velocity at the node we leave, left-sided at the node we reach
            let (vx_m, vxh_m, _, _) = coord_velocity(&y, &control.value_near(anchor, t_next), t_next)?;
            vx.plus.push(vx_p);
            vxh.plus.push(vxh_p);
            controls.push(u_p);
            controls_hat.push(uh_p);
            vx.minus.push(vx_m);
            vxh.minus.push(vxh_m);
            drift.push(partial_isometry_residual(&a_raw));
            times.push(t_next);
            states.push(RollingState::trusted(x, xh, a));
            kinks.push(i + 1 == steps);
        }
    }
    finish(pair, times, states, controls, controls_hat, vx, vxh, kinks, drift, exit)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    pair: &RollingPair,
    times: Vec<f64>,
    states: Vec<RollingState>,
    mut controls: Vec<DVector<f64>>,
    mut controls_hat: Vec<DVector<f64>>,
    mut vx: OneSided,
    mut vxh: OneSided,
    kinks: Vec<bool>,
    drift: Vec<f64>,
    exit: Option<ChartExit>,
) -> Result<RollingTrajectory> {
    let (n, nh) = (pair.n(), pair.n_hat());
    // close the one-sided lists: first node has no left side, last none on the right
    let first_minus = vx.plus.first().cloned().unwrap_or_else(|| DVector::zeros(n));
    let first_minus_h = vxh.plus.first().cloned().unwrap_or_else(|| DVector::zeros(nh));
    vx.minus.insert(0, first_minus);
    vxh.minus.insert(0, first_minus_h);
    vx.plus.push(vx.minus[vx.minus.len() - 1].clone());
    vxh.plus.push(vxh.minus[vxh.minus.len() - 1].clone());
    let last_u = controls.last().cloned().unwrap_or_else(|| DVector::zeros(n));
    let last_uh = controls_hat.last().cloned().unwrap_or_else(|| DVector::zeros(nh));
    controls.push(last_u);
    controls_hat.push(last_uh);
    let mut traj = RollingTrajectory {
        no_slip: vec![None; times.len()],
        no_spin: vec![None; times.len()],
        times,
        states,
        controls,
        controls_hat,
        drift,
        diagnostics: Diagnostics::default(),
        exit,
        vx,
        vxh,
        kinks,
    };
    diagnose(pair, &mut traj)?;
    Ok(traj)
}

/// Fills per-sample residuals and aggregates.
fn diagnose(pair: &RollingPair, traj: &mut RollingTrajectory) -> Result<()> {
    let len = traj.times.len();
    let geo = pair.m.geometry();
    let geo_h = pair.m_hat.geometry();
    // no-slip: five-point time derivatives inside smooth windows
    for k in 2..len.saturating_sub(2) {
        if (k - 1..=k + 1).any(|j| traj.kinks[j]) {
            continue;
        }
        let h = traj.times[k + 1] - traj.times[k];
        let d = |f: &dyn Fn(usize) -> DVector<f64>| (f(k - 2) - f(k - 1) * 8.0 + f(k + 1) * 8.0 - f(k + 2)) / (12.0 * h);
        let dx = d(&|j| traj.states[j].x().clone());
        let dxh = d(&|j| traj.states[j].x_hat().clone());
        let q = &traj.states[k];
        let u = geo.at(q.x(), 0)?.frame_inv * dx;
        let uh = geo_h.at(q.x_hat(), 0)?.frame_inv * dxh;
        traj.no_slip[k] = Some((uh - q.a() * u).norm());
    }
    // no-spin: compare each step with independent one-step transports
    for k in 0..len.saturating_sub(1) {
        let h = traj.times[k + 1] - traj.times[k];
        let seg = |pts: [&DVector<f64>; 2], v: &OneSided| {
            SampledPath::with_one_sided(
                vec![0.0, h],
                vec![pts[0].clone(), pts[1].clone()],
                vec![v.plus[k].clone(), v.minus[k + 1].clone()],
                vec![v.plus[k].clone(), v.minus[k + 1].clone()],
            )
        };
        let (qa, qb) = (&traj.states[k], &traj.states[k + 1]);
        let px = seg([qa.x(), qb.x()], &traj.vx)?;
        let pxh = seg([qa.x_hat(), qb.x_hat()], &traj.vxh)?;
        let t = frame_transport(&pair.m, &px, h)?;
        let th = frame_transport(&pair.m_hat, &pxh, h)?;
        let predicted = &th[1] * qa.a() * t[1].transpose();
        traj.no_spin[k + 1] = Some((qb.a() - predicted).norm() / h);
    }
    let max = |v: &[Option<f64>]| v.iter().flatten().copied().fold(0.0, f64::max);
    traj.diagnostics = Diagnostics {
        max_no_slip: max(&traj.no_slip),
        max_no_spin: max(&traj.no_spin),
        max_drift: traj.drift.iter().copied().fold(0.0, f64::max),
        total_drift: traj.drift.iter().sum(),
    };
    Ok(())
}

/// No-spin motion along prescribed curves: `A(t) = T̂(t) A_0 T(t)ᵀ` with
/// frame transports `T`, `T̂`. Both paths must share their sample times.
pub fn roll_ns(pair: &RollingPair, q0: &RollingState, gamma: &SampledPath, gamma_hat: &SampledPath, step: f64) -> Result<RollingTrajectory> {
    pair.check(q0)?;
    if gamma.len() != gamma_hat.len() || gamma.times().iter().zip(gamma_hat.times()).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::InvalidArgument("both paths must be sampled at the same times".into()));
    }
    if (gamma.start() - q0.x()).amax() > 1e-9 || (gamma_hat.start() - q0.x_hat()).amax() > 1e-9 {
        return Err(Error::InvalidArgument("paths must start at the base points of q0".into()));
    }
    for (t, (p, ph)) in gamma.times().iter().zip(gamma.points().iter().zip(gamma_hat.points())) {
        if !pair.m.contains(p) {
            return Err(Error::DomainExit { side: Side::Source, time: *t });
        }
        if !pair.m_hat.contains(ph) {
            return Err(Error::DomainExit { side: Side::Target, time: *t });
        }
    }
    let t = frame_transport(&pair.m, gamma, step).map_err(on_side(Side::Source, gamma.t_end()))?;
    let th = frame_transport(&pair.m_hat, gamma_hat, step).map_err(on_side(Side::Target, gamma.t_end()))?;
    let mut states = Vec::with_capacity(gamma.len());
    let mut drift = Vec::with_capacity(gamma.len());
    let mut controls = Vec::new();
    let mut controls_hat = Vec::new();
    for k in 0..gamma.len() {
        let raw = &th[k] * q0.a() * t[k].transpose();
        drift.push(partial_isometry_residual(&raw));
        let a = polar_factor(&raw)?;
        states.push(RollingState::trusted(gamma.points()[k].clone(), gamma_hat.points()[k].clone(), a));
        if k + 1 < gamma.len() {
            let f = pair.m.geometry().at(&gamma.points()[k], 0)?;
            let fh = pair.m_hat.geometry().at(&gamma_hat.points()[k], 0)?;
            controls.push(&f.frame_inv * &gamma.vel_plus()[k]);
            controls_hat.push(&fh.frame_inv * &gamma_hat.vel_plus()[k]);
        }
    }
    let strip = |p: &SampledPath| OneSided {
        minus: p.vel_minus()[1..].to_vec(),
        plus: p.vel_plus()[..p.len() - 1].to_vec(),
    };
    let kinks: Vec<bool> = (0..gamma.len())
        .map(|k| {
            k == 0
                || k + 1 == gamma.len()
                || (&gamma.vel_minus()[k] - &gamma.vel_plus()[k]).amax() > 0.0
                || (&gamma_hat.vel_minus()[k] - &gamma_hat.vel_plus()[k]).amax() > 0.0
        })
        .collect();
    finish(pair, gamma.times().to_vec(), states, controls, controls_hat, strip(gamma), strip(gamma_hat), kinks, drift, None)
}

/// Closed-form geodesic rolling: `x` follows the geodesic with initial
/// frame velocity `xv`, `x̂` the geodesic with velocity `A_0 xv`, and `A`
/// is obtained from the two frame transports.
pub fn roll_geodesic(pair: &RollingPair, q0: &RollingState, xv: &DVector<f64>, horizon: f64, step: f64) -> Result<RollingTrajectory> {
    pair.check(q0)?;
    if xv.len() != pair.n() {
        return Err(Error::Dimension("geodesic direction must have n components".into()));
    }
    let gamma = geodesic_path_frame(&pair.m, q0.x(), xv, horizon, step).map_err(on_side(Side::Source, horizon))?;
    let gamma_hat = geodesic_path_frame(&pair.m_hat, q0.x_hat(), &(q0.a() * xv), horizon, step).map_err(on_side(Side::Target, horizon))?;
    roll_ns(pair, q0, &gamma, &gamma_hat, step)
}

impl RollingPair {
    /// `F̂ · q · F = (F⁻¹(x), F̂(x̂); F̂_* ∘ A ∘ F_*)`.
    pub fn act_isometry(&self, q: &RollingState, f: &Isometry, f_hat: &Isometry) -> Result<RollingState> {
        self.check(q)?;
        let x_new = f.inverse().apply(&self.m, q.x())?;
        let d = f.frame_differential(&self.m, &x_new)?;
        let xh_new = f_hat.apply(&self.m_hat, q.x_hat())?;
        let dh = f_hat.frame_differential(&self.m_hat, q.x_hat())?;
        Ok(RollingState::trusted(x_new, xh_new, dh * q.a() * d))
    }
}
