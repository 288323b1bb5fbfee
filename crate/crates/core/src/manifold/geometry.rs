//! Frames, connection forms and curvature at a chart point.

use nalgebra::{DMatrix, DVector};

use super::metric::{metric_jet, MetricJet};
use super::ManifoldSpec;
use crate::error::{Error, Result};

/// Relative step of the frame-level finite differences behind `∇R` and `∇²R`.
const COV_STEP: [f64; 2] = [1e-4, 1e-3];

/// Connection forms in the orthonormal frame: `omega[m] = Γ(e_m)` with
/// `Γ(u)[l][i] = g(∇_{Fu} F_i, F_l)`.
#[derive(Debug, Clone)]
pub struct FrameConnection {
    pub omega: Vec<DMatrix<f64>>,
}

impl FrameConnection {
    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    /// `Γ(u) = sum_m u_m Γ(e_m)`.
    pub fn apply(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (m, om) in self.omega.iter().enumerate() {
            if u[m] != 0.0 {
                out += om * u[m];
            }
        }
        out
    }
}

/// `∇^k R` in the orthonormal frame at `base`, stored as endomorphisms
/// `R(e_i, e_j; e_{z_1}, ..., e_{z_k})` indexed by `(i, j, z_1, ..., z_k)`
/// in row-major order. Entry `[l][c]` of an endomorphism is the component
/// `R^l_{ijc}` (the endomorphism applied to `e_c`, read on `e_l`).
#[derive(Debug, Clone)]
pub struct CurvatureTensor {
    pub n: usize,
    pub order: usize,
    pub base: DVector<f64>,
    pub endos: Vec<DMatrix<f64>>,
}

impl CurvatureTensor {
    fn index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order + 2);
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn endo(&self, idx: &[usize]) -> &DMatrix<f64> {
        &self.endos[self.index(idx)]
    }

    /// `R^l_{ijk}` for `order == 0`.
    pub fn comp(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        self.endo(&[i, j])[(l, k)]
    }

    /// Multilinear evaluation `(∇^k R)(x, y, ., z_1, ..., z_k)` on frame components.
    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>, zs: &[&DVector<f64>]) -> DMatrix<f64> {
        assert_eq!(zs.len(), self.order, "wrong number of derivative arguments");
        let n = self.n;
        let mut args: Vec<&DVector<f64>> = vec![x, y];
        args.extend_from_slice(zs);
        let mut out = DMatrix::zeros(n, n);
        for (flat, e) in self.endos.iter().enumerate() {
            let mut coef = 1.0;
            let mut rest = flat;
            for slot in (0..args.len()).rev() {
                coef *= args[slot][rest % n];
                rest /= n;
                if coef == 0.0 {
                    break;
                }
            }
            if coef != 0.0 {
                out += e * coef;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.endos.iter().map(|m| m.amax()).fold(0.0, f64::max)
    }
}

/// Geometric data at one chart point.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub x: DVector<f64>,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// Columns are the frame vectors in coordinates.
    pub frame: DMatrix<f64>,
    pub frame_inv: DMatrix<f64>,
    /// `christoffel[k][(a, b)] = Γ^a_{kb}` (coordinate symbols); empty for order 0.
    pub christoffel: Vec<DMatrix<f64>>,
    /// Frame connection forms; empty for order 0.
    pub connection: FrameConnection,
    /// Frame curvature endomorphisms indexed `i * n + j`; empty below order 2.
    pub curvature: Vec<DMatrix<f64>>,
}

impl PointGeometry {
    /// `order` 0: metric and frame; 1: connection; 2: curvature.
    pub fn new(spec: &ManifoldSpec, x: &DVector<f64>, order: usize) -> Result<Self> {
        if x.len() != spec.dim() {
            return Err(Error::Dimension(format!("point has {} coordinates, manifold dimension is {}", x.len(), spec.dim())));
        }
        if !spec.contains(x) {
            return Err(Error::OutOfDomain { coords: x.iter().copied().collect() });
        }
        let jet = metric_jet(spec, x, order);
        Self::from_jet(x.clone(), jet, order)
    }

    fn from_jet(x: DVector<f64>, jet: MetricJet, order: usize) -> Result<Self> {
        let n = x.len();
        let chol = jet
            .g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidManifold(format!("metric is not positive definite at {:?}", x.as_slice())))?;
        let l = chol.l();
        let frame_inv = l.transpose();
        let frame = frame_inv.clone().try_inverse().expect("triangular factor with positive diagonal");
        let g_inv = chol.inverse();
        let mut christoffel = Vec::new();
        let mut omega = Vec::new();
        let mut curvature = Vec::new();
        if order >= 1 {
            let t: Vec<DMatrix<f64>> = (0..n).map(|k| christoffel_lowered(&jet.dg, k)).collect();
            christoffel = t.iter().map(|tk| &g_inv * tk * 0.5).collect();
            // derivative of the frame along each coordinate
            let d_frame: Vec<DMatrix<f64>> = (0..n)
                .map(|k| {
                    let s = frame.transpose() * &jet.dg[k] * &frame;
                    -(&frame * phi(&s))
                })
                .collect();
            let coord_omega: Vec<DMatrix<f64>> = (0..n)
                .map(|k| frame.transpose() * &jet.g * (&d_frame[k] + &christoffel[k] * &frame))
                .collect();
            omega = (0..n)
                .map(|m| {
                    let mut acc = DMatrix::zeros(n, n);
                    for k in 0..n {
                        acc += &coord_omega[k] * frame[(k, m)];
                    }
                    acc
                })
                .collect();
            if order >= 2 {
                // d_i Γ_k = -½ G⁻¹ dG_i G⁻¹ T_k + ½ G⁻¹ d_i T_k
                let mut d_gamma = vec![vec![DMatrix::zeros(n, n); n]; n];
                for i in 0..n {
                    let dginv = -(&g_inv * &jet.dg[i] * &g_inv);
                    for k in 0..n {
                        let dt = christoffel_lowered_derivative(&jet.ddg, i, k);
                        d_gamma[i][k] = (&dginv * &t[k] + &g_inv * dt) * 0.5;
                    }
                }
                let coord_r = |i: usize, j: usize| {
                    &d_gamma[i][j] - &d_gamma[j][i] + &christoffel[i] * &christoffel[j] - &christoffel[j] * &christoffel[i]
                };
                let coord: Vec<DMatrix<f64>> = (0..n * n).map(|ij| coord_r(ij / n, ij % n)).collect();
                curvature = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = DMatrix::zeros(n, n);
                        for p in 0..n {
                            for q in 0..n {
                                let c = frame[(p, i)] * frame[(q, j)];
                                if c != 0.0 {
                                    acc += &coord[p * n + q] * c;
                                }
                            }
                        }
                        curvature.push(&frame_inv * acc * &frame);
                    }
                }
            }
        }
        Ok(PointGeometry { x, g: jet.g, g_inv, frame, frame_inv, christoffel, connection: FrameConnection { omega }, curvature })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Coordinate Christoffel contraction `Γ^a_{kb} v^k w^b`.
    pub fn christoffel_contract(&self, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for (k, gk) in self.christoffel.iter().enumerate() {
            if v[k] != 0.0 {
                out += gk * w * v[k];
            }
        }
        out
    }

    /// Curvature endomorphism `R(u, v)` for frame components `u, v`.
    pub fn curvature_apply(&self, u: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let c = u[i] * v[j];
                if c != 0.0 {
                    out += &self.curvature[i * n + j] * c;
                }
            }
        }
        out
    }
}

/// `T_k[c][b] = d_k g_cb + d_b g_ck - d_c g_kb`.
fn christoffel_lowered(dg: &[DMatrix<f64>], k: usize) -> DMatrix<f64> {
    let n = dg.len();
    DMatrix::from_fn(n, n, |c, b| dg[k][(c, b)] + dg[b][(c, k)] - dg[c][(k, b)])
}

fn christoffel_lowered_derivative(ddg: &[Vec<DMatrix<f64>>], i: usize, k: usize) -> DMatrix<f64> {
    let n = ddg.len();
    DMatrix::from_fn(n, n, |c, b| ddg[i][k][(c, b)] + ddg[i][b][(c, k)] - ddg[i][c][(k, b)])
}

/// Strict upper part plus half the diagonal.
fn phi(s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => s[(i, j)],
        std::cmp::Ordering::Equal => 0.5 * s[(i, j)],
        std::cmp::Ordering::Greater => 0.0,
    })
}

/// Geometry accessor bound to one manifold.
#[derive(Debug, Clone, Copy)]
pub struct Geometry<'a> {
    spec: &'a ManifoldSpec,
}

impl<'a> Geometry<'a> {
    pub fn new(spec: &'a ManifoldSpec) -> Self {
        Geometry { spec }
    }

    pub fn spec(&self) -> &'a ManifoldSpec {
        self.spec
    }

    pub fn at(&self, x: &DVector<f64>, order: usize) -> Result<PointGeometry> {
        PointGeometry::new(self.spec, x, order)
    }

    pub fn metric(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.at(x, 0)?.g)
    }

    pub fn orthonormal_frame(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.at(x, 0)?.frame)
    }

    pub fn christoffel_frame(&self, x: &DVector<f64>) -> Result<FrameConnection> {
        Ok(self.at(x, 1)?.connection)
    }

    pub fn curvature(&self, x: &DVector<f64>) -> Result<CurvatureTensor> {
        self.curvature_cov(x, 0)
    }

    /// `∇^k R` for `k ∈ {0, 1, 2}`.
    pub fn curvature_cov(&self, x: &DVector<f64>, k: usize) -> Result<CurvatureTensor> {
        if k > 2 {
            return Err(Error::UnsupportedOrder(k));
        }
        let endos = self.cov_endos(x, k)?;
        Ok(CurvatureTensor { n: self.spec.dim(), order: k, base: x.clone(), endos })
    }

    fn cov_endos(&self, x: &DVector<f64>, k: usize) -> Result<Vec<DMatrix<f64>>> {
        if k == 0 {
            return Ok(self.at(x, 2)?.curvature);
        }
        let n = self.spec.dim();
        let pg = self.at(x, 1)?;
        let lower = self.cov_endos(x, k - 1)?;
        let h = COV_STEP[k - 1] * (1.0 + x.norm());
        let slots = k + 1;
        let count = n.pow(slots as u32);
        let mut out = vec![DMatrix::zeros(n, n); count * n];
        for m in 0..n {
            let dir = pg.frame.column(m).into_owned();
            let plus = self.cov_endos(&(x + &dir * h), k - 1)?;
            let minus = self.cov_endos(&(x - &dir * h), k - 1)?;
            let om = &pg.connection.omega[m];
            for flat in 0..count {
                let mut val = (&plus[flat] - &minus[flat]) / (2.0 * h);
                val += om * &lower[flat] - &lower[flat] * om;
                // subtract T(.., Γ_m e_s, ..) for each argument slot
                let digits = to_digits(flat, n, slots);
                for s in 0..slots {
                    for p in 0..n {
                        let c = om[(p, digits[s])];
                        if c != 0.0 {
                            let mut d = digits.clone();
                            d[s] = p;
                            val -= &lower[from_digits(&d, n)] * c;
                        }
                    }
                }
                out[flat * n + m] = val;
            }
        }
        Ok(out)
    }

    /// Sectional curvature of the plane spanned by coordinate vectors `xv, yv`.
    pub fn sectional(&self, x: &DVector<f64>, xv: &DVector<f64>, yv: &DVector<f64>) -> Result<f64> {
        let pg = self.at(x, 2)?;
        let u = &pg.frame_inv * xv;
        let v = &pg.frame_inv * yv;
        let denom = u.norm_squared() * v.norm_squared() - u.dot(&v).powi(2);
        if denom <= 1e-14 * u.norm_squared() * v.norm_squared() || denom == 0.0 {
            return Err(Error::DegeneratePlane);
        }
        let r = pg.curvature_apply(&u, &v);
        Ok(u.dot(&(r * &v)) / denom)
    }
}

fn to_digits(mut flat: usize, n: usize, len: usize) -> Vec<usize> {
    let mut d = vec![0; len];
    for s in (0..len).rev() {
        d[s] = flat % n;
        flat /= n;
    }
    d
}

fn from_digits(d: &[usize], n: usize) -> usize {
    d.iter().fold(0, |acc, &i| acc * n + i)
}

/// Constant-curvature model `K (<v, w> u - <u, w> v)` as an endomorphism in `w`.
pub fn constant_curvature_model(k: f64, u: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    (u * v.transpose() - v * u.transpose()) * k
}
