//! Controllability of the no-spin system (holonomy criterion) and of the
//! rolling system (bracket generation), plus the non-controllability tests
//! that follow from flatness, equal curvature and totally geodesic
//! submanifolds.

mod holonomy;
mod larc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{span_basis, to_rows, RANK_REL_TOL};
use crate::rol::rol_norm;
use crate::state::{i_nnhat, random_partial_isometry, vertical_dim, RollingPair, RollingState};

pub use holonomy::{
    close_under_brackets, holonomy_algebra, holonomy_algebra_with, loop_holonomy, HolonomyAlgebra, HolonomyRecord, HolonomySampling,
    Provenance,
};
pub use larc::{larc, LarcOptions, LieSpanReport, OracleStats, TripleRecord, Verdict, MAX_DEPTH, ORACLE_AGREEMENT_TOL};

/// Threshold on `max ‖Rol‖` below which the distribution counts as involutive.
pub const INVOLUTIVITY_TOL: f64 = 1e-7;

/// Number of random partial isometries probed besides `I_{n,n̂}`.
pub const NS_PROBES: usize = 10;

/// `span{k̂A − Ak : k ∈ 𝔥, k̂ ∈ 𝔥̂}` inside the vertical space at `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberSpan {
    pub dim: usize,
    pub vertical_dim: usize,
    pub basis: Vec<DMatrix<f64>>,
}

pub fn ns_fiber_span(a: &DMatrix<f64>, h: &HolonomyAlgebra, h_hat: &HolonomyAlgebra) -> Result<FiberSpan> {
    let (n_hat, n) = a.shape();
    if h.n != n || h_hat.n != n_hat {
        return Err(Error::Dimension(format!("holonomy algebras act on R^{} and R^{}, A is {n_hat}x{n}", h.n, h_hat.n)));
    }
    let flat = |m: DMatrix<f64>| DVector::from_column_slice(m.as_slice());
    let mut vecs: Vec<DVector<f64>> = h.basis.iter().map(|k| flat(a * k)).collect();
    vecs.extend(h_hat.basis.iter().map(|k| flat(k * a)));
    let span = span_basis(&vecs, n * n_hat, RANK_REL_TOL);
    let basis = span.basis.iter().map(|v| DMatrix::from_column_slice(n_hat, n, v.as_slice())).collect();
    Ok(FiberSpan { dim: span.rank(), vertical_dim: vertical_dim(n, n_hat), basis })
}

/// Dimension of the no-spin orbit's tangent in the fiber at `q`.
pub fn ns_fiber_tangent_dim(q: &RollingState, h: &HolonomyAlgebra, h_hat: &HolonomyAlgebra) -> Result<usize> {
    Ok(ns_fiber_span(q.a(), h, h_hat)?.dim)
}

/// Outcome of the holonomy test for the no-spin system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NsReport {
    /// `None` when a manifold is not declared simply connected.
    pub controllable: Option<bool>,
    pub fiber_dim: usize,
    pub vertical_dim: usize,
    pub holonomy_dims: (usize, usize),
    /// Fiber dimensions at random partial isometries.
    pub probe_dims: Vec<usize>,
    /// Basis of the achieved fiber span at `I_{n,n̂}`.
    pub generators: Vec<Vec<Vec<f64>>>,
    pub samples: usize,
    pub seed: u64,
    pub note: Option<String>,
}

/// Decides controllability of the no-spin system for simply connected
/// manifolds by the fiber span at `A = I_{n,n̂}`; other inputs only get the
/// probes.
pub fn ns_controllable(pair: &RollingPair, samples: usize, seed: u64) -> Result<NsReport> {
    let x = pair.m.origin().into_coords();
    let xh = pair.m_hat.origin().into_coords();
    let h = holonomy_algebra(&pair.m, &x, samples, seed)?;
    let h_hat = holonomy_algebra(&pair.m_hat, &xh, samples, seed.wrapping_add(1))?;
    let (n, n_hat) = (pair.n(), pair.n_hat());
    let span = ns_fiber_span(&i_nnhat(n, n_hat), &h, &h_hat)?;
    let probe_dims = (0..NS_PROBES)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            ns_fiber_span(&random_partial_isometry(&mut rng, n, n_hat), &h, &h_hat).map(|s| s.dim)
        })
        .collect::<Result<Vec<_>>>()?;
    let simply_connected = pair.m.is_simply_connected() && pair.m_hat.is_simply_connected();
    let controllable = simply_connected.then_some(span.dim == span.vertical_dim);
    let note = if !simply_connected {
        Some("a manifold is not declared simply connected: verdict withheld, probes only".into())
    } else if probe_dims.iter().any(|&d| d != span.dim) {
        Some("fiber dimension varies across probed A; the criterion quantifies over all A".into())
    } else {
        None
    };
    Ok(NsReport {
        controllable,
        fiber_dim: span.dim,
        vertical_dim: span.vertical_dim,
        holonomy_dims: (h.dim(), h_hat.dim()),
        probe_dims,
        generators: span.basis.iter().map(to_rows).collect(),
        samples,
        seed,
        note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvolutivityReport {
    pub involutive: bool,
    pub max_rol: f64,
    /// For `n < n̂`: the same test on `Q(M̂, M)` at transposed states.
    pub dual_involutive: Option<bool>,
    pub dual_max_rol: Option<f64>,
    pub states: usize,
    pub seed: u64,
}

/// Largest `‖Rol‖` over `states` seeded random states (ordered by seed stream).
pub fn rol_scan(pair: &RollingPair, states: usize, seed: u64) -> Result<Vec<f64>> {
    (0..states)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            rol_norm(pair, &pair.random_state(&mut rng))
        })
        .collect()
}

/// Samples `Rol` to decide involutivity of the rolling distribution.
pub fn involutivity_check(pair: &RollingPair, states: usize, seed: u64) -> Result<InvolutivityReport> {
    if states == 0 {
        return Err(Error::InvalidArgument("involutivity check needs at least one state".into()));
    }
    let max_rol = rol_scan(pair, states, seed)?.into_iter().fold(0.0, f64::max);
    let (dual_involutive, dual_max_rol) = if pair.n() < pair.n_hat() {
        let dual = pair.dual();
        let norms = (0..states)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64 + 1);
                rol_norm(&dual, &pair.random_state(&mut rng).transpose_dual())
            })
            .collect::<Result<Vec<_>>>()?;
        let m = norms.into_iter().fold(0.0, f64::max);
        (Some(m <= INVOLUTIVITY_TOL), Some(m))
    } else {
        (None, None)
    };
    Ok(InvolutivityReport { involutive: max_rol <= INVOLUTIVITY_TOL, max_rol, dual_involutive, dual_max_rol, states, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Obstruction {
    /// `M̂` contains a complete totally geodesic submanifold of dimension
    /// `dim` with `n ≤ dim < n̂`.
    NotControllable { dim: usize },
    Inconclusive,
}

/// Non-controllability from a declared totally geodesic submanifold of `M̂`.
pub fn totally_geodesic_obstruction(pair: &RollingPair) -> Result<Obstruction> {
    let (n, n_hat) = (pair.n(), pair.n_hat());
    if n >= n_hat {
        return Err(Error::InvalidArgument(format!("the totally geodesic test needs n < n̂, got ({n}, {n_hat})")));
    }
    Ok(match pair.m_hat.totally_geodesic_dims().iter().find(|&&m| n <= m && m < n_hat) {
        Some(&dim) => Obstruction::NotControllable { dim },
        None => Obstruction::Inconclusive,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodimReport {
    pub dim_q: usize,
    pub rank: usize,
    pub codim: usize,
    /// `|n̂ − n| + 1`.
    pub bound: usize,
    pub within_bound: bool,
    pub note: Option<String>,
}

/// Codimension of the achieved span against the `|n̂ − n| + 1` bound.
pub fn codim_report(report: &LieSpanReport) -> CodimReport {
    let rank = report.rank();
    let codim = report.dim_q.saturating_sub(rank);
    let bound = report.n.abs_diff(report.n_hat) + 1;
    let within_bound = codim <= bound;
    let note = (!within_bound).then(|| {
        "codimension exceeds the bound, so the bound's hypothesis on vertical directions fails for this pair".to_string()
    });
    CodimReport { dim_q: report.dim_q, rank, codim, bound, within_bound, note }
}
