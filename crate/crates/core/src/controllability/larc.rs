//! Lie algebra rank condition for the rolling distribution.
//!
//! Generators are the rolling lifts of the frame-constant fields `F_i`.
//! Brackets up to depth four are assembled from the closed forms in
//! [`crate::rol`]:
//!
//! - depth 2: `C_ij = [L_R F_i, L_R F_j]`;
//! - depth 3: `[L_R F_k, C_ij] = [L_R F_k, L_R W_ij] + [L_R F_k, ν(Rol(F_i, F_j))]`
//!   with `W_ij = [F_i, F_j]`;
//! - depth 4: `[C_ij, C_kl]` expanded the same way, then `[L_R F_m, D]` for
//!   depth-3 fields `D` through the flow oracle when the rank is still short.
//!
//! Oracle brackets only enter the span when their component outside it is
//! clearly above both the rank threshold and their own error estimate.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{flow_bracket_oracle, QField, ORACLE_STEP};
use crate::linalg::{residual_outside, span_basis, to_rows, RANK_REL_TOL};
use crate::rol::{MField, RolContext};
use crate::state::{RollingPair, RollingState, StateRecord, TangentTriple};

/// Largest supported bracket depth.
pub const MAX_DEPTH: usize = 4;

/// Allowed disagreement between a closed-form bracket and the oracle.
pub const ORACLE_AGREEMENT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LarcOptions {
    pub depth: usize,
    pub rank_tol: f64,
    pub oracle_step: f64,
    /// Every `verify_every`-th closed-form bracket is recomputed by the
    /// oracle (`0` disables the check).
    pub verify_every: usize,
    /// Whether depth 4 may fall back to oracle brackets.
    pub oracle_fallback: bool,
}

impl Default for LarcOptions {
    fn default() -> Self {
        LarcOptions { depth: MAX_DEPTH, rank_tol: RANK_REL_TOL, oracle_step: ORACLE_STEP, verify_every: 10, oracle_fallback: true }
    }
}

impl LarcOptions {
    pub fn with_depth(depth: usize) -> Self {
        LarcOptions { depth, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    FullRank,
    RankDeficient,
}

/// Book-keeping of oracle use during one LARC run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct OracleStats {
    /// Closed-form brackets recomputed by the oracle.
    pub checks: usize,
    /// Largest closed-form vs oracle difference among the checks.
    pub max_error: f64,
    /// Checks above [`ORACLE_AGREEMENT_TOL`].
    pub mismatches: usize,
    /// Oracle brackets evaluated at depth 4 / inserted into the span.
    pub evaluated: usize,
    pub inserted: usize,
}

/// Tangent triple in JSON form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripleRecord {
    pub u: Vec<f64>,
    pub u_hat: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

impl From<&TangentTriple> for TripleRecord {
    fn from(t: &TangentTriple) -> Self {
        TripleRecord { u: t.u.iter().copied().collect(), u_hat: t.u_hat.iter().copied().collect(), b: to_rows(&t.b) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LieSpanReport {
    pub state: StateRecord,
    pub n: usize,
    pub n_hat: usize,
    pub dim_q: usize,
    pub depth: usize,
    pub rank_per_depth: Vec<usize>,
    pub generators_per_depth: Vec<usize>,
    /// Singular values of all generated vectors (flat coordinates).
    pub singular_values: Vec<f64>,
    /// Orthonormal basis of the achieved span.
    pub basis: Vec<TripleRecord>,
    pub verdict: Verdict,
    pub rank_tolerance: f64,
    pub oracle: OracleStats,
}

impl LieSpanReport {
    pub fn rank(&self) -> usize {
        self.rank_per_depth.last().copied().unwrap_or(0)
    }
}

struct Builder<'a> {
    pair: &'a RollingPair,
    q: &'a RollingState,
    opts: LarcOptions,
    vectors: Vec<DVector<f64>>,
    analytic_count: usize,
    stats: OracleStats,
}

impl Builder<'_> {
    fn push_analytic(&mut self, t: TangentTriple, oracle: Option<(QField, QField)>) -> Result<()> {
        self.analytic_count += 1;
        if let (Some((v1, v2)), true) = (oracle, self.opts.verify_every > 0) {
            if self.analytic_count % self.opts.verify_every == 0 {
                let o = flow_bracket_oracle(self.pair, self.q, &v1, &v2, self.opts.oracle_step)?;
                let err = o.triple.sub(&t).norm();
                self.stats.checks += 1;
                self.stats.max_error = self.stats.max_error.max(err);
                self.stats.mismatches += usize::from(err > ORACLE_AGREEMENT_TOL);
            }
        }
        self.vectors.push(t.to_vector());
        Ok(())
    }

    fn rank(&self) -> usize {
        span_basis(&self.vectors, self.vectors[0].len(), self.opts.rank_tol).rank()
    }
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })
}

/// Bracket generation at `q` up to `opts.depth`.
pub fn larc(pair: &RollingPair, q: &RollingState, opts: &LarcOptions) -> Result<LieSpanReport> {
    if !(1..=MAX_DEPTH).contains(&opts.depth) {
        return Err(Error::InvalidArgument(format!("LARC depth must be in 1..={MAX_DEPTH}, got {}", opts.depth)));
    }
    let ctx = RolContext::new(pair, q)?;
    let (n, dim_q) = (pair.n(), pair.dim_q());
    let fields: Vec<MField> = (0..n).map(|i| MField::FrameConstant(unit(n, i))).collect();
    let at = |f: &MField| f.at(&pair.m, q.x());
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let w: Vec<MField> = pairs.iter().map(|&(i, j)| MField::bracket(fields[i].clone(), fields[j].clone())).collect();
    let lift = |f: &MField| QField::RollingLift(f.clone());
    let c_field = |p: usize| QField::LrBracket(fields[pairs[p].0].clone(), fields[pairs[p].1].clone());

    let mut b = Builder { pair, q, opts: *opts, vectors: vec![], analytic_count: 0, stats: OracleStats::default() };
    let mut rank_per_depth = vec![];
    let mut generators_per_depth = vec![];

    for f in &fields {
        b.vectors.push(TangentTriple::rolling_lift(q.a(), &at(f)?.value).to_vector());
    }
    rank_per_depth.push(b.rank());
    generators_per_depth.push(n);

    if opts.depth >= 2 {
        for &(i, j) in &pairs {
            let t = ctx.lr_bracket(&at(&fields[i])?, &at(&fields[j])?);
            b.push_analytic(t, Some((lift(&fields[i]), lift(&fields[j]))))?;
        }
        rank_per_depth.push(b.rank());
        generators_per_depth.push(pairs.len());
    }

    // depth-3 fields [L_R F_k, C_ij], kept for the oracle stage
    let mut depth3: Vec<QField> = vec![];
    if opts.depth >= 3 {
        for (k, fk) in fields.iter().enumerate() {
            for (p, &(i, j)) in pairs.iter().enumerate() {
                let t = ctx.lr_bracket(&at(fk)?, &at(&w[p])?).add(&ctx.lr_nu_bracket(&at(fk)?, &at(&fields[i])?, &at(&fields[j])?)?);
                b.push_analytic(t, Some((lift(fk), c_field(p))))?;
                depth3.push(QField::Sum(vec![
                    QField::LrBracket(fields[k].clone(), w[p].clone()),
                    QField::LrNu { z: fields[k].clone(), x: fields[i].clone(), y: fields[j].clone() },
                ]));
            }
        }
        rank_per_depth.push(b.rank());
        generators_per_depth.push(depth3.len());
    }

    if opts.depth >= 4 {
        let mut count = 0;
        for p in 0..pairs.len() {
            for r in (p + 1)..pairs.len() {
                let ((i, j), (k, l)) = (pairs[p], pairs[r]);
                let (wp, wr) = (at(&w[p])?, at(&w[r])?);
                let (fi, fj, fk, fl) = (at(&fields[i])?, at(&fields[j])?, at(&fields[k])?, at(&fields[l])?);
                let t = ctx
                    .lr_bracket(&wp, &wr)
                    .add(&ctx.lr_nu_bracket(&wp, &fk, &fl)?)
                    .sub(&ctx.lr_nu_bracket(&wr, &fi, &fj)?)
                    .add(&ctx.nu_nu_bracket(&fi.value, &fj.value, &fk.value, &fl.value));
                b.push_analytic(t, Some((c_field(p), c_field(r))))?;
                count += 1;
            }
        }
        if opts.oracle_fallback && b.rank() < dim_q {
            count += oracle_stage(&mut b, &fields, &depth3, dim_q)?;
        }
        rank_per_depth.push(b.rank());
        generators_per_depth.push(count);
    }

    let span = span_basis(&b.vectors, b.vectors[0].len(), opts.rank_tol);
    let (nn, nh) = (pair.n(), pair.n_hat());
    let rank = span.rank();
    Ok(LieSpanReport {
        state: q.to_record(),
        n: nn,
        n_hat: nh,
        dim_q,
        depth: opts.depth,
        rank_per_depth,
        generators_per_depth,
        singular_values: span.spectrum.clone(),
        basis: span.basis.iter().map(|v| TripleRecord::from(&TangentTriple::from_vector(nn, nh, v))).collect(),
        verdict: if rank >= dim_q { Verdict::FullRank } else { Verdict::RankDeficient },
        rank_tolerance: opts.rank_tol,
        oracle: b.stats,
    })
}

/// `[L_R F_m, D]` for every depth-3 field `D`, by the flow oracle.
fn oracle_stage(b: &mut Builder, fields: &[MField], depth3: &[QField], dim_q: usize) -> Result<usize> {
    let mut count = 0;
    for f in fields {
        for d in depth3 {
            let span = span_basis(&b.vectors, b.vectors[0].len(), b.opts.rank_tol);
            if span.rank() >= dim_q {
                return Ok(count);
            }
            let o = flow_bracket_oracle(b.pair, b.q, &QField::RollingLift(f.clone()), d, b.opts.oracle_step)?;
            b.stats.evaluated += 1;
            count += 1;
            let v = o.triple.to_vector();
            let outside = residual_outside(&v, &span.basis).norm();
            let scale = span.spectrum.first().copied().unwrap_or(1.0);
            if outside > (b.opts.rank_tol * scale).max(10.0 * o.error) {
                b.vectors.push(v);
                b.stats.inserted += 1;
            }
        }
    }
    Ok(count)
}
