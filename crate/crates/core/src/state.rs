//! The state space `Q(M, M̂)` of partial isometries of maximal rank.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{flatten_row_major, from_row_major, null_space, orthonormal_complement, polar_factor};
use crate::manifold::{ChartPoint, ManifoldSpec};

/// Tolerance of the partial-isometry invariant at construction.
pub const CONSTRUCTION_TOL: f64 = 1e-9;

/// `dim Q = n + n̂ + n n̂ - N(N+1)/2`, `N = min(n, n̂)`.
pub fn dim_q(n: usize, n_hat: usize) -> usize {
    n + n_hat + vertical_dim(n, n_hat)
}

/// Dimension of the fibers of `Q → M × M̂`.
pub fn vertical_dim(n: usize, n_hat: usize) -> usize {
    let m = n.min(n_hat);
    n * n_hat - m * (m + 1) / 2
}

/// The block matrix `I_{n,n̂}` (shape `n̂ × n`) with ones on the diagonal.
pub fn i_nnhat(n: usize, n_hat: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n_hat, n, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// `‖AᵀA − I‖` if `n ≤ n̂`, else `‖AAᵀ − I‖` (Frobenius).
pub fn partial_isometry_residual(a: &DMatrix<f64>) -> f64 {
    let (n_hat, n) = a.shape();
    if n <= n_hat {
        (a.transpose() * a - DMatrix::<f64>::identity(n, n)).norm()
    } else {
        (a * a.transpose() - DMatrix::<f64>::identity(n_hat, n_hat)).norm()
    }
}

/// Nearest partial isometry (orthonormal polar factor). Square inputs must
/// have positive determinant.
pub fn project_partial_isometry(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let u = polar_factor(a)?;
    if u.is_square() {
        let det = u.determinant();
        if det < 0.0 {
            return Err(Error::Orientation { det });
        }
    }
    Ok(u)
}

/// A point `q = (x, x̂; A)` of `Q(M, M̂)`; `a` is `n̂ × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingState {
    x: ChartPoint,
    x_hat: ChartPoint,
    a: DMatrix<f64>,
}

impl RollingState {
    pub(crate) fn trusted(x: DVector<f64>, x_hat: DVector<f64>, a: DMatrix<f64>) -> Self {
        RollingState { x: ChartPoint::trusted(x), x_hat: ChartPoint::trusted(x_hat), a }
    }

    pub fn x(&self) -> &DVector<f64> {
        self.x.coords()
    }

    pub fn x_hat(&self) -> &DVector<f64> {
        self.x_hat.coords()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_hat(&self) -> usize {
        self.a.nrows()
    }

    /// The transpose duality `(x, x̂; A) ↦ (x̂, x; Aᵀ)` onto `Q(M̂, M)`.
    pub fn transpose_dual(&self) -> RollingState {
        RollingState { x: self.x_hat.clone(), x_hat: self.x.clone(), a: self.a.transpose() }
    }

    /// Max-norm distance between states (points and matrices).
    pub fn distance(&self, other: &RollingState) -> f64 {
        let dx = (self.x() - other.x()).amax();
        let dxh = (self.x_hat() - other.x_hat()).amax();
        let da = (&self.a - &other.a).amax();
        dx.max(dxh).max(da)
    }

    /// Orthonormal basis of the vertical space `{B : AᵀB ∈ so(n)}`
    /// (`n ≤ n̂`) or `{B : BAᵀ ∈ so(n̂)}` (`n ≥ n̂`).
    pub fn vertical_basis(&self) -> Vec<DMatrix<f64>> {
        vertical_basis(&self.a)
    }

    /// `(P_ker, P_coker)`: projections of `T_xM` onto `ker A` and its
    /// orthogonal complement. `P_ker = 0` when `n ≤ n̂`.
    pub fn kernel_projections(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        kernel_projections(&self.a)
    }

    pub fn to_record(&self) -> StateRecord {
        StateRecord {
            x: self.x().iter().copied().collect(),
            x_hat: self.x_hat().iter().copied().collect(),
            a_mat: flatten_row_major(&self.a),
            n: self.n(),
            n_hat: self.n_hat(),
        }
    }
}

/// Vertical constraint residual of `b` at `a`.
pub fn vertical_residual(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let (n_hat, n) = a.shape();
    let m = if n <= n_hat { a.transpose() * b } else { b * a.transpose() };
    ((&m + m.transpose()) * 0.5).norm()
}

pub fn vertical_basis(a: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let (n_hat, n) = a.shape();
    // linear constraint map on vec(B) (column-major), one row per i <= j
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let dim = n_hat * n;
    if n <= n_hat {
        // (AᵀB + BᵀA)_{ij} = sum_k a_ki b_kj + b_ki a_kj
        for i in 0..n {
            for j in i..n {
                let mut r = vec![0.0; dim];
                for k in 0..n_hat {
                    r[j * n_hat + k] += a[(k, i)];
                    r[i * n_hat + k] += a[(k, j)];
                }
                rows.push(r);
            }
        }
    } else {
        // (BAᵀ + ABᵀ)_{ij} = sum_k b_ik a_jk + a_ik b_jk
        for i in 0..n_hat {
            for j in i..n_hat {
                let mut r = vec![0.0; dim];
                for k in 0..n {
                    r[k * n_hat + i] += a[(j, k)];
                    r[k * n_hat + j] += a[(i, k)];
                }
                rows.push(r);
            }
        }
    }
    let m = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
    let ns = null_space(&m, 1e-10);
    ns.column_iter().map(|c| DMatrix::from_column_slice(n_hat, n, c.as_slice())).collect()
}

pub fn kernel_projections(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n_hat, n) = a.shape();
    let id = DMatrix::<f64>::identity(n, n);
    if n <= n_hat {
        (DMatrix::zeros(n, n), id)
    } else {
        let coker = a.transpose() * a;
        (&id - &coker, coker)
    }
}

/// Serialized form `{x, x_hat, A_mat (row-major), n, n_hat}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRecord {
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    #[serde(rename = "A_mat")]
    pub a_mat: Vec<f64>,
    pub n: usize,
    pub n_hat: usize,
}

/// A tangent vector of `Q`: the no-spin lift of `(u, û)` plus the
/// vertical part `b`. Components are in the orthonormal frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentTriple {
    pub u: DVector<f64>,
    pub u_hat: DVector<f64>,
    pub b: DMatrix<f64>,
}

impl TangentTriple {
    pub fn zeros(n: usize, n_hat: usize) -> Self {
        TangentTriple { u: DVector::zeros(n), u_hat: DVector::zeros(n_hat), b: DMatrix::zeros(n_hat, n) }
    }

    pub fn vertical(b: DMatrix<f64>) -> Self {
        let (n_hat, n) = b.shape();
        TangentTriple { u: DVector::zeros(n), u_hat: DVector::zeros(n_hat), b }
    }

    /// Rolling lift `L_R(u) = (u, Au, 0)`.
    pub fn rolling_lift(a: &DMatrix<f64>, u: &DVector<f64>) -> Self {
        TangentTriple { u: u.clone(), u_hat: a * u, b: DMatrix::zeros(a.nrows(), a.ncols()) }
    }

    /// Flat coordinates `(u, û, vec_row(B))` used for rank computations.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v: Vec<f64> = self.u.iter().copied().collect();
        v.extend(self.u_hat.iter());
        v.extend(flatten_row_major(&self.b));
        DVector::from_vec(v)
    }

    pub fn from_vector(n: usize, n_hat: usize, v: &DVector<f64>) -> Self {
        let b = from_row_major(n_hat, n, &v.as_slice()[n + n_hat..]).expect("vector length matches");
        TangentTriple { u: v.rows(0, n).into_owned(), u_hat: v.rows(n, n_hat).into_owned(), b }
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        TangentTriple { u: &self.u * s, u_hat: &self.u_hat * s, b: &self.b * s }
    }

    pub fn add(&self, other: &TangentTriple) -> Self {
        TangentTriple { u: &self.u + &other.u, u_hat: &self.u_hat + &other.u_hat, b: &self.b + &other.b }
    }

    pub fn sub(&self, other: &TangentTriple) -> Self {
        self.add(&other.scale(-1.0))
    }
}

/// The ordered pair `(M, M̂)` on which rolling takes place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingPair {
    #[serde(rename = "M")]
    pub m: ManifoldSpec,
    #[serde(rename = "M_hat")]
    pub m_hat: ManifoldSpec,
}

impl RollingPair {
    pub fn new(m: ManifoldSpec, m_hat: ManifoldSpec) -> Self {
        RollingPair { m, m_hat }
    }

    pub fn n(&self) -> usize {
        self.m.dim()
    }

    pub fn n_hat(&self) -> usize {
        self.m_hat.dim()
    }

    pub fn dim_q(&self) -> usize {
        dim_q(self.n(), self.n_hat())
    }

    pub fn vertical_dim(&self) -> usize {
        vertical_dim(self.n(), self.n_hat())
    }

    /// The pair `(M̂, M)` of the dual problem.
    pub fn dual(&self) -> RollingPair {
        RollingPair { m: self.m_hat.clone(), m_hat: self.m.clone() }
    }

    /// Validates the points and projects `a_raw` onto the nearest partial isometry.
    pub fn make_state(&self, x: &[f64], x_hat: &[f64], a_raw: &DMatrix<f64>) -> Result<RollingState> {
        let x = self.m.point(x)?;
        let x_hat = self.m_hat.point(x_hat)?;
        if a_raw.shape() != (self.n_hat(), self.n()) {
            return Err(Error::Dimension(format!(
                "A must be {}x{}, got {}x{}",
                self.n_hat(),
                self.n(),
                a_raw.nrows(),
                a_raw.ncols()
            )));
        }
        let a = project_partial_isometry(a_raw)?;
        Ok(RollingState { x, x_hat, a })
    }

    pub fn state_from_record(&self, rec: &StateRecord) -> Result<RollingState> {
        if rec.n != self.n() || rec.n_hat != self.n_hat() {
            return Err(Error::Dimension("state record dimensions do not match the manifolds".into()));
        }
        let a = from_row_major(rec.n_hat, rec.n, &rec.a_mat)?;
        if partial_isometry_residual(&a) > CONSTRUCTION_TOL {
            return Err(Error::InvalidArgument("A_mat is not a partial isometry".into()));
        }
        self.make_state(&rec.x, &rec.x_hat, &a)
    }

    /// Checks that a state belongs to this pair.
    pub fn check(&self, q: &RollingState) -> Result<()> {
        if q.n() != self.n() || q.n_hat() != self.n_hat() {
            return Err(Error::Dimension("state does not match the manifold pair".into()));
        }
        if !self.m.contains(q.x()) {
            return Err(Error::OutOfDomain { coords: q.x().iter().copied().collect() });
        }
        if !self.m_hat.contains(q.x_hat()) {
            return Err(Error::OutOfDomain { coords: q.x_hat().iter().copied().collect() });
        }
        Ok(())
    }

    /// State at the domain centers with `A = I_{n,n̂}`.
    pub fn standard_state(&self) -> RollingState {
        RollingState {
            x: self.m.origin(),
            x_hat: self.m_hat.origin(),
            a: i_nnhat(self.n(), self.n_hat()),
        }
    }

    /// Random state: sampled base points and a random partial isometry.
    pub fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> RollingState {
        RollingState {
            x: self.m.sample_point(rng),
            x_hat: self.m_hat.sample_point(rng),
            a: random_partial_isometry(rng, self.n(), self.n_hat()),
        }
    }
}

/// Haar-distributed element of `SO(n, n̂)` (orientation fixed when square).
pub fn random_partial_isometry<R: Rng + ?Sized>(rng: &mut R, n: usize, n_hat: usize) -> DMatrix<f64> {
    loop {
        let g = DMatrix::from_fn(n_hat, n, |_, _| StandardNormal.sample(rng));
        if let Ok(mut u) = polar_factor(&g) {
            if n == n_hat && u.determinant() < 0.0 {
                let c = -u.column(0);
                u.set_column(0, &c);
            }
            return u;
        }
    }
}

/// Completes the orthonormal columns of a tall `a` (`n̂ × n`, `n < n̂`) to a
/// positively oriented orthonormal basis `[a | c]`.
pub fn oriented_completion(a: &DMatrix<f64>) -> DMatrix<f64> {
    let c = orthonormal_complement(a);
    let mut full = DMatrix::zeros(a.nrows(), a.nrows());
    full.view_mut((0, 0), a.shape()).copy_from(a);
    full.view_mut((0, a.ncols()), c.shape()).copy_from(&c);
    if full.determinant() < 0.0 {
        let last = full.ncols() - 1;
        let col = -full.column(last);
        full.set_column(last, &col);
    }
    full
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dimension_counts() {
        assert_eq!(dim_q(3, 2), 8);
        assert_eq!(dim_q(2, 2), 5);
        assert_eq!(vertical_dim(2, 3), 3);
        for n in 1..=4 {
            for m in 1..=4 {
                let a = i_nnhat(n, m);
                assert_eq!(vertical_basis(&a).len(), vertical_dim(n, m), "({n},{m})");
            }
        }
    }

    #[test]
    fn i_nnhat_shapes() {
        assert_eq!(i_nnhat(2, 3), DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
        assert_eq!(i_nnhat(3, 2), DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
        assert_eq!(i_nnhat(2, 2), DMatrix::identity(2, 2));
    }

    #[test]
    fn make_state_projects_and_rejects() {
        let pair = RollingPair::new(ManifoldSpec::euclidean(2), ManifoldSpec::euclidean(2));
        let q = pair.make_state(&[0.0, 0.0], &[0.0, 0.0], &DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]))).unwrap();
        assert!((q.a() - DMatrix::<f64>::identity(2, 2)).norm() < 1e-15);
        let flip = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(pair.make_state(&[0.0, 0.0], &[0.0, 0.0], &flip), Err(Error::Orientation { .. })));
        let rank1 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(pair.make_state(&[0.0, 0.0], &[0.0, 0.0], &rank1), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn vertical_basis_for_embedded_plane() {
        let a = i_nnhat(2, 3);
        let basis = vertical_basis(&a);
        assert_eq!(basis.len(), 3);
        let expected = [
            DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
            DMatrix::from_row_slice(3, 2, &[0.0, -1.0, 1.0, 0.0, 0.0, 0.0]),
        ];
        for e in &expected {
            let proj: f64 = basis.iter().map(|b| b.dot(e).powi(2)).sum();
            assert!((proj - e.norm_squared()).abs() < 1e-12);
        }
        for (i, b) in basis.iter().enumerate() {
            for (j, c) in basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((b.dot(c) - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duality_maps_vertical_to_vertical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pair = RollingPair::new(ManifoldSpec::sphere(2, 1.0), ManifoldSpec::euclidean(3));
        let q = pair.random_state(&mut rng);
        let d = q.transpose_dual();
        assert_eq!(d.transpose_dual(), q);
        assert!(partial_isometry_residual(d.a()) < 1e-12);
        for b in q.vertical_basis() {
            assert!(vertical_residual(d.a(), &b.transpose()) < 1e-12);
        }
    }

    #[test]
    fn kernel_projection_of_wide_state() {
        let a = i_nnhat(3, 2);
        let (pk, pc) = kernel_projections(&a);
        let mut e3 = DMatrix::zeros(3, 3);
        e3[(2, 2)] = 1.0;
        assert!((&pk - e3).norm() < 1e-15);
        assert!((&pk + &pc - DMatrix::<f64>::identity(3, 3)).norm() < 1e-15);
        assert!((&a * &pk).norm() < 1e-15);
    }
}
