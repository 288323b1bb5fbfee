//! Vector fields on `Q` given by lifts and rolling-curvature expressions,
//! their flows, and a finite-difference Lie bracket of two such fields.
//!
//! The bracket is read off the group commutator
//! `φ²₋ₕ ∘ φ¹₋ₕ ∘ φ²ₕ ∘ φ¹ₕ (q) = q + h² [V₁, V₂](q) + O(h³)`,
//! symmetrized in `h` and extrapolated once, then mapped back to a
//! [`TangentTriple`] through the frames at `q`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, Side};
use crate::ode::{rk4_step, Packer};
use crate::rol::{MField, RolContext};
use crate::rolling::{on_side, q_velocity};
use crate::state::{RollingPair, RollingState, TangentTriple};

/// Default oracle step.
pub const ORACLE_STEP: f64 = 1e-3;

/// A vector field on `Q` evaluated from fields on `M`.
#[derive(Debug, Clone, PartialEq)]
pub enum QField {
    /// `L_R(X)`.
    RollingLift(MField),
    /// `ν(Rol(X, Y))`.
    RolVertical(MField, MField),
    /// `[L_R(X), L_R(Y)]` evaluated pointwise from the closed form.
    LrBracket(MField, MField),
    /// `[L_R(Z), ν(Rol(X, Y))]` evaluated pointwise from the closed form.
    LrNu { z: MField, x: MField, y: MField },
    /// `[ν(Rol(X, Y)), ν(Rol(Z, W))]` with the arguments taken from the fields.
    NuNu([MField; 4]),
    /// Pointwise sum.
    Sum(Vec<QField>),
}

impl QField {
    /// The field at `q` as a triple.
    pub fn triple(&self, pair: &RollingPair, q: &RollingState) -> Result<TangentTriple> {
        match self {
            QField::RollingLift(f) => {
                let c = f.value(&pair.m, q.x()).map_err(on_side(Side::Source, 0.0))?;
                Ok(TangentTriple::rolling_lift(q.a(), &c))
            }
            QField::RolVertical(x, y) => {
                let ctx = RolContext::new(pair, q)?;
                let (xv, yv) = (x.value(&pair.m, q.x())?, y.value(&pair.m, q.x())?);
                Ok(TangentTriple::vertical(ctx.rol(&xv, &yv)))
            }
            QField::LrBracket(x, y) => {
                let ctx = RolContext::new(pair, q)?;
                Ok(ctx.lr_bracket(&x.at(&pair.m, q.x())?, &y.at(&pair.m, q.x())?))
            }
            QField::LrNu { z, x, y } => {
                let ctx = RolContext::new(pair, q)?;
                let at = |f: &MField| f.at(&pair.m, q.x());
                ctx.lr_nu_bracket(&at(z)?, &at(x)?, &at(y)?)
            }
            QField::NuNu(fs) => {
                let ctx = RolContext::new(pair, q)?;
                let v = fs.iter().map(|f| f.value(&pair.m, q.x())).collect::<Result<Vec<_>>>()?;
                Ok(ctx.nu_nu_bracket(&v[0], &v[1], &v[2], &v[3]))
            }
            QField::Sum(parts) => {
                let mut acc = TangentTriple::zeros(pair.n(), pair.n_hat());
                for p in parts {
                    acc = acc.add(&p.triple(pair, q)?);
                }
                Ok(acc)
            }
        }
    }
}

/// Chart coordinates `(x, x̂, A)` of `Q` packed into one vector.
struct Coords {
    packer: Packer,
    n: usize,
    n_hat: usize,
}

impl Coords {
    fn new(pair: &RollingPair) -> Self {
        let (n, n_hat) = (pair.n(), pair.n_hat());
        Coords { packer: Packer::new().block(n, 1).block(n_hat, 1).block(n_hat, n), n, n_hat }
    }

    fn pack(&self, q: &RollingState) -> DVector<f64> {
        let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        self.packer.pack(&[&col(q.x()), &col(q.x_hat()), q.a()])
    }

    fn unpack(&self, y: &DVector<f64>) -> RollingState {
        RollingState::trusted(self.packer.vector(y, 0), self.packer.vector(y, 1), self.packer.get(y, 2))
    }

    fn velocity(&self, pair: &RollingPair, field: &QField, y: &DVector<f64>) -> Result<DVector<f64>> {
        let q = self.unpack(y);
        let v = field.triple(pair, &q)?;
        let (dx, dxh, da) = q_velocity(pair, q.x(), q.x_hat(), q.a(), &v, 0.0)?;
        let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        Ok(self.packer.pack(&[&col(&dx), &col(&dxh), &da]))
    }

    /// Reads a coordinate tangent vector at `q` as a triple.
    fn triple(&self, pair: &RollingPair, q: &RollingState, d: &DVector<f64>) -> Result<TangentTriple> {
        let pg = pair.m.geometry().at(q.x(), 1).map_err(on_side(Side::Source, 0.0))?;
        let pgh = pair.m_hat.geometry().at(q.x_hat(), 1).map_err(on_side(Side::Target, 0.0))?;
        let u = &pg.frame_inv * self.packer.vector(d, 0);
        let u_hat = &pgh.frame_inv * self.packer.vector(d, 1);
        let a = q.a();
        let b = self.packer.get(d, 2) - (a * pg.connection.apply(&u) - pgh.connection.apply(&u_hat) * a);
        debug_assert_eq!((u.len(), u_hat.len()), (self.n, self.n_hat));
        Ok(TangentTriple { u, u_hat, b })
    }
}

/// Flows `field` for signed time `t` from `q` with `substeps` RK4 steps.
pub fn flow(pair: &RollingPair, field: &QField, q: &RollingState, t: f64, substeps: usize) -> Result<RollingState> {
    let coords = Coords::new(pair);
    let y = flow_coords(&coords, pair, field, coords.pack(q), t, substeps)?;
    Ok(coords.unpack(&y))
}

fn flow_coords(coords: &Coords, pair: &RollingPair, field: &QField, mut y: DVector<f64>, t: f64, substeps: usize) -> Result<DVector<f64>> {
    let h = t / substeps as f64;
    let f = |_t: f64, y: &DVector<f64>| coords.velocity(pair, field, y);
    for k in 0..substeps {
        y = rk4_step(&f, k as f64 * h, &y, h)?;
    }
    Ok(y)
}

/// Finite-difference bracket with an a-posteriori error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleBracket {
    pub triple: TangentTriple,
    /// Difference to the extrapolation at half the step (flat-vector norm).
    pub error: f64,
}

/// `[V₁, V₂](q)` from the commutator of flows at step `h`, symmetrized and
/// Richardson-extrapolated with step `h/2`.
pub fn flow_bracket_oracle(pair: &RollingPair, q: &RollingState, v1: &QField, v2: &QField, h: f64) -> Result<OracleBracket> {
    pair.check(q)?;
    let coords = Coords::new(pair);
    let y0 = coords.pack(q);
    let sym = |h: f64| -> Result<DVector<f64>> {
        let loop_at = |s: f64| -> Result<DVector<f64>> {
            let mut y = y0.clone();
            for (field, t) in [(v1, s), (v2, s), (v1, -s), (v2, -s)] {
                y = flow_coords(&coords, pair, field, y, t, 2)?;
            }
            Ok(y)
        };
        Ok(((loop_at(h)? + loop_at(-h)?) * 0.5 - &y0) / (h * h))
    };
    let (d1, d2, d4) = (sym(h)?, sym(h / 2.0)?, sym(h / 4.0)?);
    let r1 = (&d2 * 4.0 - &d1) / 3.0;
    let r2 = (&d4 * 4.0 - &d2) / 3.0;
    let error = (&r1 - &r2).norm();
    Ok(OracleBracket { triple: coords.triple(pair, q, &r1)?, error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ManifoldSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn pairs() -> Vec<RollingPair> {
        vec![
            RollingPair::new(ManifoldSpec::sphere(2, 1.0), ManifoldSpec::euclidean(2)),
            RollingPair::new(ManifoldSpec::sphere(2, 1.0), ManifoldSpec::sphere(2, 2.0)),
            RollingPair::new(ManifoldSpec::hyperbolic(2, 1.0), ManifoldSpec::sphere(3, 1.0)),
            RollingPair::new(ManifoldSpec::generic(3, 0.4, 7).unwrap(), ManifoldSpec::sphere(2, 1.0)),
            RollingPair::new(ManifoldSpec::sphere(3, 1.0), ManifoldSpec::generic(3, 0.4, 8).unwrap()),
        ]
    }

    #[test]
    fn commuting_translations_have_zero_bracket() {
        let pair = RollingPair::new(ManifoldSpec::euclidean(2), ManifoldSpec::euclidean(2));
        let q = pair.standard_state();
        let e = |i: usize| QField::RollingLift(MField::FrameConstant(DVector::from_fn(2, |k, _| if k == i { 1.0 } else { 0.0 })));
        let b = flow_bracket_oracle(&pair, &q, &e(0), &e(1), ORACLE_STEP).unwrap();
        assert!(b.triple.norm() < 1e-8);
    }

    #[test]
    fn lr_bracket_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for pair in pairs() {
            let n = pair.n();
            for _ in 0..3 {
                let q = pair.random_state(&mut rng);
                let ctx = RolContext::new(&pair, &q).unwrap();
                for parallel in [false, true] {
                    let (cx, cy) = (rv(&mut rng, n), rv(&mut rng, n));
                    let mk = |c: DVector<f64>| {
                        if parallel {
                            MField::ParallelAt { base: q.x().clone(), value: c }
                        } else {
                            MField::FrameConstant(c)
                        }
                    };
                    let (fx, fy) = (mk(cx), mk(cy));
                    let exact = ctx.lr_bracket(&fx.at(&pair.m, q.x()).unwrap(), &fy.at(&pair.m, q.x()).unwrap());
                    let o = flow_bracket_oracle(&pair, &q, &QField::RollingLift(fx.clone()), &QField::RollingLift(fy.clone()), ORACLE_STEP).unwrap();
                    let err = exact.sub(&o.triple).norm();
                    assert!(err < 1e-4, "{} parallel={parallel}: {err:e} (est {:e})", pair.m.label(), o.error);
                    let swapped = flow_bracket_oracle(&pair, &q, &QField::RollingLift(fy), &QField::RollingLift(fx), ORACLE_STEP).unwrap();
                    assert!(swapped.triple.add(&o.triple).norm() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn lr_nu_bracket_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for pair in pairs() {
            let n = pair.n();
            for _ in 0..2 {
                let q = pair.random_state(&mut rng);
                let ctx = RolContext::new(&pair, &q).unwrap();
                let fz = MField::FrameConstant(rv(&mut rng, n));
                let fx = MField::FrameConstant(rv(&mut rng, n));
                let fy = MField::ParallelAt { base: q.x().clone(), value: rv(&mut rng, n) };
                let at = |f: &MField| f.at(&pair.m, q.x()).unwrap();
                let exact = ctx.lr_nu_bracket(&at(&fz), &at(&fx), &at(&fy)).unwrap();
                let o = flow_bracket_oracle(&pair, &q, &QField::RollingLift(fz), &QField::RolVertical(fx, fy), ORACLE_STEP).unwrap();
                let err = exact.sub(&o.triple).norm();
                assert!(err < 1e-4, "{}: {err:e} (est {:e})", pair.m_hat.label(), o.error);
            }
        }
    }

    #[test]
    fn depth_three_bracket_matches_oracle() {
        // [L_R(Z), [L_R(X), L_R(Y)]] = [L_R(Z), L_R([X,Y])] + [L_R(Z), ν(Rol(X,Y))]
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for pair in pairs() {
            let n = pair.n();
            let q = pair.random_state(&mut rng);
            let ctx = RolContext::new(&pair, &q).unwrap();
            let mut field = || MField::FrameConstant(rv(&mut rng, n));
            let (fz, fx, fy) = (field(), field(), field());
            let at = |f: &MField| f.at(&pair.m, q.x()).unwrap();
            let w = MField::bracket(fx.clone(), fy.clone());
            let exact = ctx.lr_bracket(&at(&fz), &at(&w)).add(&ctx.lr_nu_bracket(&at(&fz), &at(&fx), &at(&fy)).unwrap());
            let o = flow_bracket_oracle(&pair, &q, &QField::RollingLift(fz), &QField::LrBracket(fx, fy), ORACLE_STEP).unwrap();
            let err = exact.sub(&o.triple).norm();
            assert!(err < 1e-4, "{}: {err:e}", pair.m.label());
        }
    }

    #[test]
    fn nu_nu_bracket_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut nonzero = 0;
        for pair in pairs() {
            let n = pair.n();
            let q = pair.random_state(&mut rng);
            let ctx = RolContext::new(&pair, &q).unwrap();
            let v: Vec<DVector<f64>> = (0..4).map(|_| rv(&mut rng, n)).collect();
            let exact = ctx.nu_nu_bracket(&v[0], &v[1], &v[2], &v[3]);
            let f = |i: usize| MField::FrameConstant(v[i].clone());
            let o = flow_bracket_oracle(&pair, &q, &QField::RolVertical(f(0), f(1)), &QField::RolVertical(f(2), f(3)), ORACLE_STEP).unwrap();
            let err = exact.sub(&o.triple).norm();
            assert!(err < 1e-4, "{}: {err:e}", pair.m_hat.label());
            nonzero += usize::from(exact.norm() > 1e-2);
        }
        assert!(nonzero >= 2);
    }
}
