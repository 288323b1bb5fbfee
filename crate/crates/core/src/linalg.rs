//! Small dense linear-algebra helpers shared by the geometry and
//! controllability code. Everything here works on `nalgebra` dynamic
//! matrices since all dimensions are runtime values (typically <= 4).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value threshold for rank decisions.
pub const RANK_REL_TOL: f64 = 1e-7;

/// Singular values below this are zero regardless of the largest one.
pub const RANK_ABS_FLOOR: f64 = 1e-10;

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol * sigma_max` (and above the
/// absolute floor).
pub fn rank_of_spectrum(spectrum: &[f64], rel_tol: f64) -> usize {
    let largest = spectrum.first().copied().unwrap_or(0.0);
    let cut = (rel_tol * largest).max(RANK_ABS_FLOOR);
    spectrum.iter().filter(|&&s| s > cut).count()
}

/// Orthonormal factor of the polar decomposition `a = U P`.
///
/// Works for tall, wide and square inputs. Fails when the smallest singular
/// value is below `RANK_REL_TOL` relative to the largest.
pub fn polar_factor(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = a.clone().svd(true, true);
    let s = &svd.singular_values;
    let max = s.max();
    let min = s.min();
    if !(max > 0.0) || min < RANK_REL_TOL * max {
        return Err(Error::RankDeficient { ratio: if max > 0.0 { min / max } else { 0.0 } });
    }
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    Ok(u * v_t)
}

/// Columns spanning the orthogonal complement of the column space of `a`,
/// assumed to have orthonormal columns. Deterministic: complements are
/// built by Gram-Schmidt over the standard basis in index order.
pub fn orthonormal_complement(a: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = a.nrows();
    let mut basis: Vec<DVector<f64>> = a.column_iter().map(|c| c.into_owned()).collect();
    let start = basis.len();
    for i in 0..rows {
        if basis.len() == rows {
            break;
        }
        let mut v = DVector::<f64>::zeros(rows);
        v[i] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    DMatrix::from_columns(&basis[start..])
}

/// Orthonormal basis of the null space of `m` (columns of the result).
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    // pad to at least square so that V is complete
    let padded = if m.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let s = &svd.singular_values;
    let max = s.max();
    let cut = (rel_tol * max).max(RANK_ABS_FLOOR);
    let kept: Vec<DVector<f64>> = (0..cols)
        .filter(|&i| s[i] <= cut)
        .map(|i| v_t.row(i).transpose())
        .collect();
    if kept.is_empty() {
        DMatrix::zeros(cols, 0)
    } else {
        DMatrix::from_columns(&kept)
    }
}

pub fn skew_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m - m.transpose()) * 0.5
}

/// Frobenius norm of the symmetric part; zero for antisymmetric input.
pub fn skew_residual(m: &DMatrix<f64>) -> f64 {
    ((m + m.transpose()) * 0.5).norm()
}

pub fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Frobenius-orthonormal basis `(E_ab - E_ba)/sqrt(2)`, a < b, of so(n).
pub fn so_basis(n: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let c = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..n {
        for b in (a + 1)..n {
            let mut m = DMatrix::zeros(n, n);
            m[(a, b)] = -c;
            m[(b, a)] = c;
            out.push(m);
        }
    }
    out
}

/// Row-major flattening.
pub fn flatten_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Rows of a matrix as nested vectors (the JSON form used in reports).
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "expected {} entries for a {}x{} matrix, got {}",
            rows * cols,
            rows,
            cols,
            data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

/// Orthonormal basis (as vectors) of the span of `vectors`, together with
/// the full singular spectrum of the stacked matrix.
#[derive(Debug, Clone)]
pub struct SpanBasis {
    pub basis: Vec<DVector<f64>>,
    pub spectrum: Vec<f64>,
}

impl SpanBasis {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }
}

pub fn span_basis(vectors: &[DVector<f64>], dim: usize, rel_tol: f64) -> SpanBasis {
    if vectors.is_empty() {
        return SpanBasis { basis: Vec::new(), spectrum: Vec::new() };
    }
    // rows = vectors; right singular vectors span the row space
    let mut m = DMatrix::zeros(vectors.len().max(dim), dim);
    for (i, v) in vectors.iter().enumerate() {
        m.row_mut(i).copy_from(&v.transpose());
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let spectrum: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let rank = rank_of_spectrum(&spectrum, rel_tol);
    let basis = order[..rank].iter().map(|&i| v_t.row(i).transpose()).collect();
    SpanBasis { basis, spectrum }
}

/// Component of `v` orthogonal to the orthonormal family `basis`.
pub fn residual_outside(v: &DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    let mut r = v.clone();
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&r);
            r.axpy(-c, b, 1.0);
        }
    }
    r
}

/// Rotation angle of a 2x2 rotation matrix, in (-pi, pi].
pub fn rotation_angle_2d(r: &DMatrix<f64>) -> f64 {
    r[(1, 0)].atan2(r[(0, 0)])
}

/// Principal logarithm of a rotation matrix close enough to the identity
/// (rotation angles below pi), via the inverse scaling-and-squaring series.
pub fn rotation_log(r: &DMatrix<f64>) -> DMatrix<f64> {
    let n = r.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    // take square roots (Denman-Beavers) until close to identity
    let mut y = r.clone();
    let mut squarings = 0;
    while (&y - &id).norm() > 1e-3 && squarings < 40 {
        let mut z = id.clone();
        let mut yk = y.clone();
        for _ in 0..60 {
            let y_inv = yk.clone().try_inverse().expect("rotation is invertible");
            let z_inv = z.clone().try_inverse().expect("rotation is invertible");
            let y_next = (&yk + &z_inv) * 0.5;
            let z_next = (&z + &y_inv) * 0.5;
            let done = (&y_next - &yk).norm() < 1e-15;
            yk = y_next;
            z = z_next;
            if done {
                break;
            }
        }
        y = yk;
        squarings += 1;
    }
    // log(I + E) series
    let e = &y - &id;
    let mut term = e.clone();
    let mut log = DMatrix::zeros(n, n);
    for k in 1..30 {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        log += &term * (sign / k as f64);
        term = &term * &e;
    }
    log * 2f64.powi(squarings)
}
