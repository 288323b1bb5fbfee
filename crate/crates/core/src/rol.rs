//! Rolling curvature `Rol_q(X, Y) = A R(X, Y) − R̂(AX, AY) A`, its
//! covariant derivatives, and the brackets of the rolling distribution.
//!
//! Vector fields enter the bracket formulas through their value and first
//! covariant derivative at the base point, both in frame components
//! ([`FieldAtPoint`]). Fields extended parallel at the point have zero
//! derivative there, which removes the `∇`-argument terms.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, Side};
use crate::manifold::{CurvatureTensor, ManifoldSpec, PointGeometry};
use crate::rolling::on_side;
use crate::state::{vertical_residual, RollingPair, RollingState, TangentTriple};

/// Vector field on `M` given globally (used by the flow oracle and LARC).
#[derive(Debug, Clone, PartialEq)]
pub enum MField {
    /// Constant frame components `c` in the orthonormal frame.
    FrameConstant(DVector<f64>),
    /// Frame components `c − Γ_{x0}(F_{x0}⁻¹ (x − x0)) c`: equal to `c` at
    /// `x0` with vanishing covariant derivative there.
    ParallelAt { base: DVector<f64>, value: DVector<f64> },
    /// The Lie bracket `[X, Y] = ∇_X Y − ∇_Y X`; its covariant Jacobian is
    /// taken by central differences.
    Bracket(Box<MField>, Box<MField>),
}

/// Relative step for differentiating bracket fields.
const BRACKET_STEP: f64 = 1e-5;

impl MField {
    pub fn value(&self, spec: &ManifoldSpec, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            MField::FrameConstant(c) => Ok(c.clone()),
            MField::ParallelAt { base, value } => {
                let pg0 = spec.geometry().at(base, 1)?;
                let d = &pg0.frame_inv * (x - base);
                Ok(value - pg0.connection.apply(&d) * value)
            }
            MField::Bracket(x_field, y_field) => {
                let (xa, ya) = (x_field.at(spec, x)?, y_field.at(spec, x)?);
                Ok(&ya.jacobian * &xa.value - &xa.jacobian * &ya.value)
            }
        }
    }

    pub fn bracket(x: MField, y: MField) -> MField {
        MField::Bracket(Box::new(x), Box::new(y))
    }

    /// Value and covariant Jacobian `J` with `∇_Z X = J z` at `x`.
    pub fn at(&self, spec: &ManifoldSpec, x: &DVector<f64>) -> Result<FieldAtPoint> {
        let pg = spec.geometry().at(x, 1)?;
        let n = spec.dim();
        let value = self.value(spec, x)?;
        let mut jac = DMatrix::zeros(n, n);
        match self {
            MField::FrameConstant(_) => {
                for m in 0..n {
                    jac.set_column(m, &(&pg.connection.omega[m] * &value));
                }
            }
            MField::ParallelAt { base, value: c } => {
                let pg0 = spec.geometry().at(base, 1)?;
                for m in 0..n {
                    let dir = &pg0.frame_inv * pg.frame.column(m);
                    let deriv = -(pg0.connection.apply(&dir) * c);
                    jac.set_column(m, &(deriv + &pg.connection.omega[m] * &value));
                }
            }
            MField::Bracket(..) => {
                let eps = BRACKET_STEP * (1.0 + x.norm());
                for m in 0..n {
                    let dir = pg.frame.column(m) * eps;
                    let deriv = (self.value(spec, &(x + &dir))? - self.value(spec, &(x - &dir))?) / (2.0 * eps);
                    jac.set_column(m, &(deriv + &pg.connection.omega[m] * &value));
                }
            }
        }
        Ok(FieldAtPoint { value, jacobian: jac })
    }
}

/// Value and covariant derivative of a vector field at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldAtPoint {
    pub value: DVector<f64>,
    /// `∇_Z X = jacobian · z` in frame components.
    pub jacobian: DMatrix<f64>,
}

impl FieldAtPoint {
    /// Extension parallel at the point (zero covariant derivative).
    pub fn parallel(value: DVector<f64>) -> Self {
        let n = value.len();
        FieldAtPoint { value, jacobian: DMatrix::zeros(n, n) }
    }
}

/// Geometry of both manifolds at a fixed state, with lazily computed
/// covariant curvature derivatives.
pub struct RolContext<'a> {
    pub pair: &'a RollingPair,
    pub q: RollingState,
    pub geo: PointGeometry,
    pub geo_hat: PointGeometry,
    cov: [OnceLock<Result<(CurvatureTensor, CurvatureTensor)>>; 2],
}

impl<'a> RolContext<'a> {
    pub fn new(pair: &'a RollingPair, q: &RollingState) -> Result<Self> {
        pair.check(q)?;
        let geo = pair.m.geometry().at(q.x(), 2).map_err(on_side(Side::Source, 0.0))?;
        let geo_hat = pair.m_hat.geometry().at(q.x_hat(), 2).map_err(on_side(Side::Target, 0.0))?;
        Ok(RolContext { pair, q: q.clone(), geo, geo_hat, cov: [OnceLock::new(), OnceLock::new()] })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        self.q.a()
    }

    /// `R(x, y)` on `M` in frame components.
    pub fn r(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        self.geo.curvature_apply(x, y)
    }

    /// `R̂(x̂, ŷ)` on `M̂`.
    pub fn r_hat(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        self.geo_hat.curvature_apply(x, y)
    }

    pub fn rol(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        let a = self.a();
        a * self.r(x, y) - self.r_hat(&(a * x), &(a * y)) * a
    }

    fn cov(&self, k: usize) -> Result<&(CurvatureTensor, CurvatureTensor)> {
        let cell = &self.cov[k - 1];
        cell.get_or_init(|| {
            let t = self.pair.m.geometry().curvature_cov(self.q.x(), k).map_err(on_side(Side::Source, 0.0))?;
            let th = self.pair.m_hat.geometry().curvature_cov(self.q.x_hat(), k).map_err(on_side(Side::Target, 0.0))?;
            Ok((t, th))
        })
        .as_ref()
        .map_err(Clone::clone)
    }

    /// `A (∇^k R)(x, y, ·, z_1..z_k) − (∇̂^k R̂)(Ax, Ay, A·, Az_1..Az_k) A`.
    pub fn rol_cov(&self, x: &DVector<f64>, y: &DVector<f64>, zs: &[&DVector<f64>]) -> Result<DMatrix<f64>> {
        match zs.len() {
            0 => Ok(self.rol(x, y)),
            k @ (1 | 2) => {
                let (t, th) = self.cov(k)?;
                let a = self.a();
                let azs: Vec<DVector<f64>> = zs.iter().map(|z| a * *z).collect();
                let azr: Vec<&DVector<f64>> = azs.iter().collect();
                Ok(a * t.apply(x, y, zs) - th.apply(&(a * x), &(a * y), &azr) * a)
            }
            k => Err(Error::UnsupportedOrder(k)),
        }
    }

    /// `[L_R(X), L_R(Y)] = L_R([X, Y]) + ν(Rol(X, Y))`.
    pub fn lr_bracket(&self, x: &FieldAtPoint, y: &FieldAtPoint) -> TangentTriple {
        let w = &y.jacobian * &x.value - &x.jacobian * &y.value;
        TangentTriple { u_hat: self.a() * &w, u: w, b: self.rol(&x.value, &y.value) }
    }

    /// `[L_R(Z), ν(Rol(X, Y))]`: the no-spin lift of `(0, −Rol(X, Y) Z)`
    /// plus the vertical part `∇̄Rol(X, Y, Z) + Rol(∇_Z X, Y) + Rol(X, ∇_Z Y)`.
    pub fn lr_nu_bracket(&self, z: &FieldAtPoint, x: &FieldAtPoint, y: &FieldAtPoint) -> Result<TangentTriple> {
        let n = self.q.n();
        let zv = &z.value;
        let mut b = self.rol_cov(&x.value, &y.value, &[zv])?;
        b += self.rol(&(&x.jacobian * zv), &y.value);
        b += self.rol(&x.value, &(&y.jacobian * zv));
        let u_hat = -(self.rol(&x.value, &y.value) * zv);
        Ok(TangentTriple { u: DVector::zeros(n), u_hat, b })
    }

    /// `[ν(Rol(X, Y)), ν(Rol(Z, W))]`, purely vertical.
    pub fn nu_nu_bracket(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, w: &DVector<f64>) -> TangentTriple {
        let a = self.a();
        let u = self.rol(x, y);
        let v = self.rol(z, w);
        let (rxy, rzw) = (self.r(x, y), self.r(z, w));
        let (ax, ay, az, aw) = (a * x, a * y, a * z, a * w);
        let (hxy, hzw) = (self.r_hat(&ax, &ay), self.r_hat(&az, &aw));
        let mut b = a * (&rxy * &rzw - &rzw * &rxy) - (&hxy * &hzw - &hzw * &hxy) * a;
        b -= self.r_hat(&(&u * z), &aw) * a;
        b -= self.r_hat(&az, &(&u * w)) * a;
        b += self.r_hat(&(&v * x), &ay) * a;
        b += self.r_hat(&ax, &(&v * y)) * a;
        TangentTriple::vertical(b)
    }
}

/// `Rol_q(x, y)` for frame vectors `x, y`.
pub fn rol(pair: &RollingPair, q: &RollingState, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(RolContext::new(pair, q)?.rol(x, y))
}

/// `∇^k Rol` with `k = zs.len() ∈ {0, 1, 2}`.
pub fn rol_cov(pair: &RollingPair, q: &RollingState, x: &DVector<f64>, y: &DVector<f64>, zs: &[&DVector<f64>]) -> Result<DMatrix<f64>> {
    if zs.len() > 2 {
        return Err(Error::UnsupportedOrder(zs.len()));
    }
    RolContext::new(pair, q)?.rol_cov(x, y, zs)
}

pub fn lr_bracket(pair: &RollingPair, q: &RollingState, x: &FieldAtPoint, y: &FieldAtPoint) -> Result<TangentTriple> {
    Ok(RolContext::new(pair, q)?.lr_bracket(x, y))
}

pub fn lr_nu_bracket(pair: &RollingPair, q: &RollingState, z: &FieldAtPoint, x: &FieldAtPoint, y: &FieldAtPoint) -> Result<TangentTriple> {
    RolContext::new(pair, q)?.lr_nu_bracket(z, x, y)
}

pub fn nu_nu_bracket(
    pair: &RollingPair,
    q: &RollingState,
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<TangentTriple> {
    Ok(RolContext::new(pair, q)?.nu_nu_bracket(x, y, z, w))
}

/// Largest `‖Rol_q(e_i, e_j)‖` over frame pairs.
pub fn rol_norm(pair: &RollingPair, q: &RollingState) -> Result<f64> {
    let ctx = RolContext::new(pair, q)?;
    let n = q.n();
    let mut best: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut ei = DVector::zeros(n);
            let mut ej = DVector::zeros(n);
            ei[i] = 1.0;
            ej[j] = 1.0;
            best = best.max(ctx.rol(&ei, &ej).norm());
        }
    }
    Ok(best)
}

/// Vertical-constraint residual of a triple's `B` part at `q`.
pub fn triple_vertical_residual(q: &RollingState, t: &TangentTriple) -> f64 {
    vertical_residual(q.a(), &t.b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn equal_spheres_have_zero_rol() {
        let pair = RollingPair::new(ManifoldSpec::sphere(2, 1.0), ManifoldSpec::sphere(2, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let q = pair.random_state(&mut rng);
            assert!(rol_norm(&pair, &q).unwrap() < 1e-10);
        }
    }

    #[test]
    fn sphere_on_plane_model() {
        let pair = RollingPair::new(ManifoldSpec::sphere(2, 1.0), ManifoldSpec::euclidean(2));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = pair.random_state(&mut rng);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let y = DVector::from_vec(vec![0.0, 1.0]);
        let r = rol(&pair, &q, &x, &y).unwrap();
        assert!((r * &y - q.a() * &x).norm() < 1e-10);
    }

    #[test]
    fn rol_is_antisymmetric_bilinear_and_vertical() {
        let pair = RollingPair::new(ManifoldSpec::sphere(2, 1.0), ManifoldSpec::hyperbolic(3, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let q = pair.random_state(&mut rng);
        let ctx = RolContext::new(&pair, &q).unwrap();
        let (x, y, z) = (rv(&mut rng, 2), rv(&mut rng, 2), rv(&mut rng, 2));
        assert!((ctx.rol(&x, &y) + ctx.rol(&y, &x)).norm() < 1e-12);
        assert!(ctx.rol(&x, &x).norm() < 1e-12);
        assert!((ctx.rol(&(&x * 2.0 + &z), &y) - ctx.rol(&x, &y) * 2.0 - ctx.rol(&z, &y)).norm() < 1e-12);
        assert!(vertical_residual(q.a(), &ctx.rol(&x, &y)) < 1e-12);
    }

    #[test]
    fn symmetric_pairs_have_vanishing_derivative() {
        let pair = RollingPair::new(ManifoldSpec::sphere(2, 1.0), ManifoldSpec::sphere(2, 2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = pair.random_state(&mut rng);
        let (x, y, z) = (rv(&mut rng, 2), rv(&mut rng, 2), rv(&mut rng, 2));
        assert!(rol_cov(&pair, &q, &x, &y, &[&z]).unwrap().norm() < 1e-6);
        assert!(matches!(rol_cov(&pair, &q, &x, &y, &[&z, &z, &z]), Err(Error::UnsupportedOrder(3))));
    }

    #[test]
    fn parallel_field_has_zero_jacobian_at_base() {
        let s = ManifoldSpec::sphere(2, 1.0);
        let base = DVector::from_vec(vec![0.4, -0.3]);
        let f = MField::ParallelAt { base: base.clone(), value: DVector::from_vec(vec![0.3, 0.9]) };
        let at = f.at(&s, &base).unwrap();
        assert!(at.jacobian.norm() < 1e-14);
    }
}
