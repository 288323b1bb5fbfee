//! Built-in isometries acting on chart coordinates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ManifoldKind, ManifoldSpec};
use crate::error::{Error, Result};

/// Catalog isometries. Rotation matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Isometry {
    Identity,
    /// `x -> R x + b` on euclidean space, `R ∈ SO(n)`.
    EuclideanMotion { rotation: Vec<f64>, translation: Vec<f64> },
    /// Rotation `Q ∈ SO(n+1)` of the sphere, acting through the stereographic chart.
    SphereRotation { rotation: Vec<f64> },
    /// Rotation `Q ∈ SO(n)` of the Poincaré ball about its center.
    BallRotation { rotation: Vec<f64> },
}

fn square(data: &[f64], n: usize) -> Result<DMatrix<f64>> {
    if data.len() != n * n {
        return Err(Error::Dimension(format!("expected a {n}x{n} rotation")));
    }
    let m = DMatrix::from_row_slice(n, n, data);
    if (m.transpose() * &m - DMatrix::<f64>::identity(n, n)).norm() > 1e-9 || m.determinant() < 0.0 {
        return Err(Error::InvalidArgument("isometry matrix must be a rotation".into()));
    }
    Ok(m)
}

fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    crate::linalg::flatten_row_major(m)
}

impl Isometry {
    pub fn translation(b: &[f64]) -> Self {
        let n = b.len();
        Isometry::EuclideanMotion { rotation: flatten(&DMatrix::identity(n, n)), translation: b.to_vec() }
    }

    pub fn euclidean_motion(rotation: &DMatrix<f64>, translation: &[f64]) -> Self {
        Isometry::EuclideanMotion { rotation: flatten(rotation), translation: translation.to_vec() }
    }

    pub fn sphere_rotation(rotation: &DMatrix<f64>) -> Self {
        Isometry::SphereRotation { rotation: flatten(rotation) }
    }

    pub fn ball_rotation(rotation: &DMatrix<f64>) -> Self {
        Isometry::BallRotation { rotation: flatten(rotation) }
    }

    /// Checks the isometry belongs to the manifold's isometry group.
    pub fn validate(&self, spec: &ManifoldSpec) -> Result<()> {
        let n = spec.dim();
        match (self, spec.kind()) {
            (Isometry::Identity, _) => Ok(()),
            (Isometry::EuclideanMotion { rotation, translation }, ManifoldKind::Euclidean { .. }) => {
                square(rotation, n)?;
                if translation.len() != n {
                    return Err(Error::Dimension("translation length must equal the dimension".into()));
                }
                Ok(())
            }
            (Isometry::SphereRotation { rotation }, ManifoldKind::Sphere { .. }) => square(rotation, n + 1).map(|_| ()),
            (Isometry::BallRotation { rotation }, ManifoldKind::Hyperbolic { .. }) => square(rotation, n).map(|_| ()),
            _ => Err(Error::InvalidArgument(format!("isometry does not act on {}", spec.label()))),
        }
    }

    pub fn inverse(&self) -> Isometry {
        match self {
            Isometry::Identity => Isometry::Identity,
            Isometry::EuclideanMotion { rotation, translation } => {
                let n = translation.len();
                let rt = DMatrix::from_row_slice(n, n, rotation).transpose();
                let b = -(&rt * DVector::from_column_slice(translation));
                Isometry::EuclideanMotion { rotation: flatten(&rt), translation: b.iter().copied().collect() }
            }
            Isometry::SphereRotation { rotation } => {
                let n = (rotation.len() as f64).sqrt().round() as usize;
                Isometry::SphereRotation { rotation: flatten(&DMatrix::from_row_slice(n, n, rotation).transpose()) }
            }
            Isometry::BallRotation { rotation } => {
                let n = (rotation.len() as f64).sqrt().round() as usize;
                Isometry::BallRotation { rotation: flatten(&DMatrix::from_row_slice(n, n, rotation).transpose()) }
            }
        }
    }

    /// Image point and coordinate Jacobian at `x`.
    pub fn apply_with_jacobian(&self, spec: &ManifoldSpec, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.validate(spec)?;
        let n = spec.dim();
        let (y, jac) = match self {
            Isometry::Identity => (x.clone(), DMatrix::identity(n, n)),
            Isometry::EuclideanMotion { rotation, translation } => {
                let r = DMatrix::from_row_slice(n, n, rotation);
                (&r * x + DVector::from_column_slice(translation), r)
            }
            Isometry::BallRotation { rotation } => {
                let r = DMatrix::from_row_slice(n, n, rotation);
                (&r * x, r)
            }
            Isometry::SphereRotation { rotation } => {
                let radius = match spec.kind() {
                    ManifoldKind::Sphere { radius, .. } => *radius,
                    _ => unreachable!("validated above"),
                };
                let q = DMatrix::from_row_slice(n + 1, n + 1, rotation);
                let (p, dp) = inverse_stereo(x, radius);
                let qp = &q * p;
                let (y, dy) = stereo(&qp, radius).ok_or_else(|| Error::IsometryUndefined { coords: x.iter().copied().collect() })?;
                (y, dy * q * dp)
            }
        };
        if !spec.contains(&y) {
            return Err(Error::IsometryUndefined { coords: x.iter().copied().collect() });
        }
        Ok((y, jac))
    }

    pub fn apply(&self, spec: &ManifoldSpec, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.apply_with_jacobian(spec, x)?.0)
    }

    /// Differential in orthonormal frames: `F(f(x))^{-1} Df(x) F(x)`, an
    /// element of SO(n).
    pub fn frame_differential(&self, spec: &ManifoldSpec, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (y, jac) = self.apply_with_jacobian(spec, x)?;
        let geo = spec.geometry();
        let fx = geo.at(x, 0)?;
        let fy = geo.at(&y, 0)?;
        Ok(fy.frame_inv * jac * fx.frame)
    }
}

/// Inverse stereographic projection from the north pole and its Jacobian.
fn inverse_stereo(x: &DVector<f64>, r: f64) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let r2 = r * r;
    let x2 = x.norm_squared();
    let s = x2 + r2;
    let mut p = DVector::zeros(n + 1);
    let mut dp = DMatrix::zeros(n + 1, n);
    for i in 0..n {
        p[i] = 2.0 * r2 * x[i] / s;
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            dp[(i, j)] = 2.0 * r2 * (delta / s - 2.0 * x[i] * x[j] / (s * s));
        }
    }
    p[n] = r * (x2 - r2) / s;
    for j in 0..n {
        dp[(n, j)] = 4.0 * r2 * r * x[j] / (s * s);
    }
    (p, dp)
}

/// Stereographic projection from the north pole and its Jacobian (ambient).
fn stereo(p: &DVector<f64>, r: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let n = p.len() - 1;
    let denom = r - p[n];
    if denom.abs() < 1e-12 * r {
        return None;
    }
    let mut y = DVector::zeros(n);
    let mut dy = DMatrix::zeros(n, n + 1);
    for i in 0..n {
        y[i] = r * p[i] / denom;
        dy[(i, i)] = r / denom;
        dy[(i, n)] = r * p[i] / (denom * denom);
    }
    Some((y, dy))
}
