//! One function per subcommand, each producing the `result` section of a report.

use nalgebra::DVector;
use rollman_core::control::{ControlData, ControlFrame};
use rollman_core::controllability::{codim_report, holonomy_algebra, totally_geodesic_obstruction, INVOLUTIVITY_TOL, MAX_DEPTH, ORACLE_AGREEMENT_TOL};
use rollman_core::dim_gap::{lift, lifted_pair};
use rollman_core::linalg::{RANK_ABS_FLOOR, RANK_REL_TOL};
use rollman_core::state::CONSTRUCTION_TOL;
use rollman_core::verify::{bracket_gate, equivariance_error, geodesic_agreement, loop_summary, transport_equivalence};
use rollman_core::{commutation_check, involutivity_check, larc, ns_controllable, roll, rol_scan, LarcOptions, LieSpanReport};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Roll,
    Larc,
    Holonomy,
    NsCheck,
    RolScan,
    Dimgap,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Roll => "roll",
            Command::Larc => "larc",
            Command::Holonomy => "holonomy",
            Command::NsCheck => "ns-check",
            Command::RolScan => "rol-scan",
            Command::Dimgap => "dimgap",
            Command::Report => "report",
        }
    }

    pub fn parse(name: &str) -> Result<Self, CliError> {
        [Command::Roll, Command::Larc, Command::Holonomy, Command::NsCheck, Command::RolScan, Command::Dimgap, Command::Report]
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| CliError::Config(format!("unknown command `{name}`")))
    }
}

/// What a command produced. `failure` marks a computational failure that
/// still left a usable result, such as a trajectory clipped at the chart edge.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub result: Value,
    pub tolerances: Value,
    pub seed: Option<u64>,
    pub csv: Option<String>,
    pub failure: Option<String>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match command {
        Command::Roll => cmd_roll(cfg),
        Command::Larc => cmd_larc(cfg),
        Command::Holonomy => cmd_holonomy(cfg),
        Command::NsCheck => cmd_ns_check(cfg),
        Command::RolScan => cmd_rol_scan(cfg),
        Command::Dimgap => cmd_dimgap(cfg),
        Command::Report => Err(CliError::Config("batches cannot be nested".into())),
    }
}

fn cmd_roll(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let pair = cfg.pair()?;
    let q0 = cfg.initial_state(&pair)?;
    let control = cfg.control(pair.n())?;
    let step = cfg.step()?;
    let traj = roll(&pair, &q0, &control, step)?;
    let failure = traj.exit.map(|e| format!("trajectory left the chart of {} at t = {}", e.side, e.time));
    let transport = if failure.is_none() { Some(transport_equivalence(&pair, &traj, step)?) } else { None };
    let summary = loop_summary(&traj);

    let geodesic = if cfg.geodesic {
        let u = match (&control.data, control.frame) {
            (ControlData::Piecewise(p), ControlFrame::Parallel) if p.len() == 1 => DVector::from_vec(p[0].u.clone()),
            _ => return Err(CliError::Config("`geodesic` needs a single constant piece in the parallel frame".into())),
        };
        Some(geodesic_agreement(&pair, &q0, &u, control.horizon, step)?)
    } else {
        None
    };
    let equivariance = match &cfg.isometry {
        Some(iso) => {
            if control.frame != ControlFrame::Parallel {
                return Err(CliError::Config("the isometry check needs a parallel-frame control".into()));
            }
            Some(equivariance_error(&pair, &q0, &control, &iso.m, &iso.m_hat, step)?)
        }
        None => None,
    };

    let result = json!({
        "n": pair.n(),
        "n_hat": pair.n_hat(),
        "horizon": control.horizon,
        "samples": traj.len(),
        "initial_state": q0.to_record(),
        "final_state": traj.final_state().to_record(),
        "diagnostics": traj.diagnostics,
        "exit": traj.exit,
        "transport_equivalence": transport,
        "closure": summary.closure,
        "holonomy_angle": summary.holonomy_angle,
        "geodesic": geodesic,
        "equivariance_error": equivariance,
    });
    Ok(Outcome {
        result,
        tolerances: json!({ "step": step, "construction_tol": CONSTRUCTION_TOL }),
        seed: cfg.seed,
        csv: Some(traj.to_csv()),
        failure,
    })
}

fn larc_summary(r: &LieSpanReport) -> Value {
    json!({
        "dim_q": r.dim_q,
        "rank": r.rank(),
        "rank_per_depth": r.rank_per_depth,
        "verdict": r.verdict,
    })
}

fn cmd_larc(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let pair = cfg.pair()?;
    let q0 = cfg.initial_state(&pair)?;
    let depth = cfg.depth.unwrap_or(MAX_DEPTH);
    let opts = LarcOptions::with_depth(depth);
    let report = larc(&pair, &q0, &opts)?;
    let mut extra = Map::new();
    extra.insert("rank".into(), json!(report.rank()));
    extra.insert("codim".into(), to_value(&codim_report(&report)));
    if pair.n() < pair.n_hat() {
        extra.insert("totally_geodesic".into(), to_value(&totally_geodesic_obstruction(&pair)?));
    }
    if let Some(states) = cfg.bracket_states {
        let seed = cfg.seed("the bracket gate samples random states")?;
        extra.insert("bracket_gate".into(), to_value(&bracket_gate(&pair, states, seed, opts.oracle_step)?));
    }
    if let Some(iso) = &cfg.isometry {
        let moved = pair.act_isometry(&q0, &iso.m, &iso.m_hat)?;
        extra.insert("isometry".into(), larc_summary(&larc(&pair, &moved, &opts)?));
    }
    if let Some(gap) = &cfg.gap {
        let lifted = lifted_pair(&pair, gap.side)?;
        let q1 = lift(&pair, &q0, gap)?;
        let r1 = larc(&lifted, &q1, &opts)?;
        extra.insert("lifted".into(), merge(larc_summary(&r1), json!({ "deficiency": r1.dim_q - r1.rank() })));
    }
    Ok(Outcome {
        result: merge(to_value(&report), Value::Object(extra)),
        tolerances: json!({
            "depth": depth,
            "rank_rel_tol": opts.rank_tol,
            "rank_abs_floor": RANK_ABS_FLOOR,
            "oracle_step": opts.oracle_step,
            "oracle_agreement_tol": ORACLE_AGREEMENT_TOL,
        }),
        seed: cfg.seed,
        ..Default::default()
    })
}

fn cmd_holonomy(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = cfg.manifold()?;
    let samples = cfg.require(cfg.samples, "samples")?;
    let seed = cfg.seed("holonomy sampling is random")?;
    let x = match &cfg.point {
        Some(p) => DVector::from_vec(p.clone()),
        None => spec.origin().into_coords(),
    };
    let alg = holonomy_algebra(&spec, &x, samples, seed)?;
    let mut result = merge(to_value(&alg.to_record()), json!({ "closure_defect": alg.closure_defect() }));
    if let Some(more) = cfg.recheck_samples {
        let again = holonomy_algebra(&spec, &x, more, seed)?;
        result = merge(result, json!({ "recheck": { "samples": more, "dim": again.dim(), "stable": again.dim() == alg.dim() } }));
    }
    Ok(Outcome { result, tolerances: json!({ "rank_rel_tol": RANK_REL_TOL }), seed: Some(seed), ..Default::default() })
}

fn cmd_ns_check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let pair = cfg.pair()?;
    let samples = cfg.require(cfg.samples, "samples")?;
    let seed = cfg.seed("holonomy sampling is random")?;
    let report = ns_controllable(&pair, samples, seed)?;
    Ok(Outcome { result: to_value(&report), tolerances: json!({ "rank_rel_tol": RANK_REL_TOL }), seed: Some(seed), ..Default::default() })
}

fn cmd_rol_scan(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let pair = cfg.pair()?;
    let states = cfg.require(cfg.states, "states")?;
    let seed = cfg.seed("states are drawn at random")?;
    let norms = rol_scan(&pair, states, seed)?;
    let inv = involutivity_check(&pair, states, seed)?;
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = norms.iter().sum::<f64>() / norms.len().max(1) as f64;
    let result = merge(to_value(&inv), json!({ "min_rol": min, "mean_rol": mean, "norms": norms }));
    Ok(Outcome { result, tolerances: json!({ "involutivity_tol": INVOLUTIVITY_TOL }), seed: Some(seed), ..Default::default() })
}

fn cmd_dimgap(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let pair = cfg.pair()?;
    let q0 = cfg.initial_state(&pair)?;
    let gap = cfg.gap.ok_or_else(|| CliError::Config("`gap` is required for dimgap".into()))?;
    let control = cfg.control(pair.n())?;
    let step = cfg.step()?;
    let report = commutation_check(&pair, &q0, &control, &gap, step)?;
    Ok(Outcome { result: to_value(&report), tolerances: json!({ "step": step }), seed: cfg.seed, ..Default::default() })
}
