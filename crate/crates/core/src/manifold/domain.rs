use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Open chart domain in coordinate space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    /// Open box `lo < x < hi` componentwise.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Open ball `|x - center| < radius`.
    Ball { center: Vec<f64>, radius: f64 },
    /// Cartesian product; coordinates concatenated in order.
    Product { parts: Vec<Domain> },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Ball { center, .. } => center.len(),
            Domain::Product { parts } => parts.iter().map(Domain::dim).sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Box { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(Error::InvalidManifold("box bounds must have equal positive length".into()));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::InvalidManifold("box must satisfy lo < hi".into()));
                }
                Ok(())
            }
            Domain::Ball { center, radius } => {
                if center.is_empty() || !(*radius > 0.0) {
                    return Err(Error::InvalidManifold("ball needs a center and positive radius".into()));
                }
                Ok(())
            }
            Domain::Product { parts } => parts.iter().try_for_each(Domain::validate),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            Domain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| v > a && v < b),
            Domain::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() < *radius
            }
            Domain::Product { parts } => {
                let mut offset = 0;
                parts.iter().all(|p| {
                    let d = p.dim();
                    let ok = p.contains(&x[offset..offset + d]);
                    offset += d;
                    ok
                })
            }
        }
    }

    pub fn center(&self) -> Vec<f64> {
        match self {
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
            Domain::Ball { center, .. } => center.clone(),
            Domain::Product { parts } => parts.iter().flat_map(Domain::center).collect(),
        }
    }

    /// Radius of the largest ball around `center()` contained in the domain.
    pub fn inner_radius(&self) -> f64 {
        match self {
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).fold(f64::INFINITY, f64::min),
            Domain::Ball { radius, .. } => *radius,
            Domain::Product { parts } => parts.iter().map(Domain::inner_radius).fold(f64::INFINITY, f64::min),
        }
    }

    /// Upper bound of `|x|` over the domain.
    pub fn max_norm(&self) -> f64 {
        match self {
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| a.abs().max(b.abs()).powi(2)).sum::<f64>().sqrt(),
            Domain::Ball { center, radius } => center.iter().map(|c| c * c).sum::<f64>().sqrt() + radius,
            Domain::Product { parts } => parts.iter().map(|p| p.max_norm().powi(2)).sum::<f64>().sqrt(),
        }
    }

    /// Uniform sample of the ball of radius `radius` around `center()`.
    pub fn sample_ball<R: Rng + ?Sized>(&self, rng: &mut R, radius: f64, dim: usize) -> Vec<f64> {
        let center = self.center();
        let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = dir.iter().map(|d: &f64| d * d).sum::<f64>().sqrt().max(1e-300);
        let u: f64 = rng.random();
        let rho = radius * u.powf(1.0 / dim as f64);
        center.iter().zip(dir).map(|(c, d)| c + rho * d / norm).collect()
    }

    /// Uniform sample of the central half of the domain.
    pub fn sample_core<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Domain::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(a, b)| {
                    let mid = 0.5 * (a + b);
                    let half = 0.25 * (b - a);
                    mid + half * (2.0 * rng.random::<f64>() - 1.0)
                })
                .collect(),
            Domain::Ball { center, radius } => self.sample_ball(rng, 0.5 * radius, center.len()),
            Domain::Product { parts } => parts.iter().flat_map(|p| p.sample_core(rng)).collect(),
        }
    }

    /// Deterministic points used to spot-check metric validity.
    pub fn probe_points(&self) -> Vec<Vec<f64>> {
        let center = self.center();
        let n = center.len();
        let mut pts = vec![center.clone()];
        let (lo, hi) = self.bounding_box();
        for frac in [0.5, 0.9] {
            for k in 0..n {
                for sign in [-1.0, 1.0] {
                    let mut p = center.clone();
                    let reach = if sign > 0.0 { hi[k] - center[k] } else { center[k] - lo[k] };
                    p[k] += sign * frac * reach;
                    if self.contains(&p) {
                        pts.push(p);
                    }
                }
            }
            let mut diag = center.clone();
            for k in 0..n {
                diag[k] += frac * (hi[k] - center[k]) / (n as f64).sqrt();
            }
            if self.contains(&diag) {
                pts.push(diag);
            }
        }
        pts
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Domain::Product { parts } => {
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for p in parts {
                    let (l, h) = p.bounding_box();
                    lo.extend(l);
                    hi.extend(h);
                }
                (lo, hi)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn product_membership_splits_coordinates() {
        let d = Domain::Product {
            parts: vec![
                Domain::Ball { center: vec![0.0, 0.0], radius: 1.0 },
                Domain::Box { lo: vec![-1.0], hi: vec![1.0] },
            ],
        };
        assert!(d.contains(&[0.5, 0.5, 0.9]));
        assert!(!d.contains(&[0.9, 0.9, 0.0]));
        assert!(!d.contains(&[0.0, 0.0, 1.0]));
    }

    #[test]
    fn samples_stay_inside() {
        let d = Domain::Ball { center: vec![1.0, -2.0, 0.5], radius: 0.3 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            assert!(d.contains(&d.sample_core(&mut rng)));
        }
    }
}
