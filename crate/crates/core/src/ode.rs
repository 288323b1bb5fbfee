//! Fixed-step explicit Runge-Kutta integration on flat state vectors.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// One classical RK4 step of `y' = f(t, y)`.
pub fn rk4_step<F>(f: &F, t: f64, y: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &(y + &k1 * (0.5 * h)))?;
    let k3 = f(t + 0.5 * h, &(y + &k2 * (0.5 * h)))?;
    let k4 = f(t + h, &(y + &k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Number of equal substeps of length at most `step` covering `span`.
pub fn substeps(span: f64, step: f64) -> usize {
    ((span / step) - 1e-9).ceil().max(1.0) as usize
}

/// Packs vectors and matrices (column-major) into one state vector.
#[derive(Debug, Clone, Default)]
pub struct Packer {
    parts: Vec<(usize, usize)>,
}

impl Packer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a block of `rows x cols` and returns its index.
    pub fn block(mut self, rows: usize, cols: usize) -> Self {
        self.parts.push((rows, cols));
        self
    }

    pub fn len(&self) -> usize {
        self.parts.iter().map(|(r, c)| r * c).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn offset(&self, idx: usize) -> usize {
        self.parts[..idx].iter().map(|(r, c)| r * c).sum()
    }

    pub fn pack(&self, blocks: &[&DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.len());
        for (i, b) in blocks.iter().enumerate() {
            let (r, c) = self.parts[i];
            debug_assert_eq!((b.nrows(), b.ncols()), (r, c));
            out.rows_mut(self.offset(i), r * c).copy_from_slice(b.as_slice());
        }
        out
    }

    pub fn get(&self, y: &DVector<f64>, idx: usize) -> DMatrix<f64> {
        let (r, c) = self.parts[idx];
        DMatrix::from_column_slice(r, c, y.rows(self.offset(idx), r * c).as_slice())
    }

    pub fn vector(&self, y: &DVector<f64>, idx: usize) -> DVector<f64> {
        let (r, c) = self.parts[idx];
        y.rows(self.offset(idx), r * c).into_owned()
    }
}
