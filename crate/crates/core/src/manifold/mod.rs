//! Chart-described Riemannian manifolds and their intrinsic geometry.
//!
//! Every manifold lives on a single chart. Geometric quantities are
//! expressed in the deterministic orthonormal frame obtained by
//! Gram-Schmidt of the coordinate basis (equivalently, the inverse
//! transpose of the upper Cholesky factor of the metric matrix).
//!
//! Metric derivatives come either from closed forms (`Analytic`) or from
//! central finite differences of the metric (`FiniteDifference`); the two
//! routes are independent and used to cross-check each other.

mod desc;
mod domain;
pub mod geodesic;
mod geometry;
pub mod isometry;
mod metric;
pub mod transport;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use desc::ManifoldDesc;
pub use domain::Domain;
pub use geometry::{constant_curvature_model, CurvatureTensor, FrameConnection, Geometry, PointGeometry};
pub use metric::MetricJet;

/// How metric derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    #[default]
    Analytic,
    FiniteDifference,
}

/// Warping function `f` of a warped product `dr^2 + f(r)^2 g_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Warping {
    /// `f(r) = c`
    Constant { c: f64 },
    /// `f(r) = a + b r`
    Linear { a: f64, b: f64 },
    /// `f(r) = c exp(k r)`
    Exponential { c: f64, k: f64 },
}

impl Warping {
    /// `(f, f', f'')` at `r`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        match *self {
            Warping::Constant { c } => (c, 0.0, 0.0),
            Warping::Linear { a, b } => (a + b * r, b, 0.0),
            Warping::Exponential { c, k } => {
                let f = c * (k * r).exp();
                (f, k * f, k * k * f)
            }
        }
    }

    pub fn has_zero_second_derivative(&self) -> bool {
        match *self {
            Warping::Constant { .. } | Warping::Linear { .. } => true,
            Warping::Exponential { c, k } => c == 0.0 || k == 0.0,
        }
    }
}

/// Quadratic polynomial metric `g(x) = G0 + sum_k x_k L_k + sum x_i x_j Q_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMetric {
    pub constant: DMatrix<f64>,
    pub linear: Vec<DMatrix<f64>>,
    pub quadratic: Vec<(usize, usize, DMatrix<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldKind {
    Euclidean { dim: usize },
    /// Round sphere of radius `radius`, stereographic chart from the north pole.
    Sphere { dim: usize, radius: f64 },
    /// Hyperbolic space of curvature `-1/radius^2`, Poincaré ball chart.
    Hyperbolic { dim: usize, radius: f64 },
    /// Riemannian product; coordinates are concatenated in factor order.
    Product { factors: Vec<ManifoldSpec> },
    /// `(I x N, dr^2 + f(r)^2 g_N)`; coordinates are `(r, y)`.
    Warped { fiber: Box<ManifoldSpec>, warping: Warping, interval: (f64, f64) },
    CustomMetric { dim: usize, metric: PolynomialMetric },
}

/// A chart-described Riemannian manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ManifoldDesc", into = "ManifoldDesc")]
pub struct ManifoldSpec {
    kind: ManifoldKind,
    domain: Domain,
    derivatives: DerivativeMode,
    simply_connected: bool,
    totally_geodesic_dims: Vec<usize>,
}

/// Coordinates of a point inside a manifold's chart domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint(DVector<f64>);

impl ChartPoint {
    /// Wraps coordinates already known to lie in the chart.
    pub(crate) fn trusted(coords: DVector<f64>) -> Self {
        ChartPoint(coords)
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl ManifoldSpec {
    pub fn euclidean(dim: usize) -> Self {
        Self::build(ManifoldKind::Euclidean { dim }).expect("valid euclidean space")
    }

    pub fn sphere(dim: usize, radius: f64) -> Self {
        Self::build(ManifoldKind::Sphere { dim, radius }).expect("valid sphere")
    }

    pub fn hyperbolic(dim: usize, radius: f64) -> Self {
        Self::build(ManifoldKind::Hyperbolic { dim, radius }).expect("valid hyperbolic space")
    }

    pub fn product(factors: Vec<ManifoldSpec>) -> Result<Self> {
        Self::build(ManifoldKind::Product { factors })
    }

    pub fn warped(fiber: ManifoldSpec, warping: Warping, interval: (f64, f64)) -> Result<Self> {
        Self::build(ManifoldKind::Warped { fiber: Box::new(fiber), warping, interval })
    }

    pub fn custom(metric: PolynomialMetric, domain: Domain) -> Result<Self> {
        let dim = metric.constant.nrows();
        let mut spec = Self::build(ManifoldKind::CustomMetric { dim, metric })?;
        spec.set_domain(domain)?;
        Ok(spec)
    }

    /// A seeded random perturbation `I + ε(Σ xᵢLᵢ + Σ xᵢxⱼQᵢⱼ)` of the flat
    /// metric on the box `[-1/2, 1/2]^dim`. Generic enough that no
    /// curvature symmetry survives; `strength ≤ 0.5` keeps it positive.
    pub fn generic(dim: usize, strength: f64, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut sym = || {
            let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
            (&m + m.transpose()) * (0.5 * strength)
        };
        let linear = (0..dim).map(|_| sym()).collect();
        let mut quadratic = vec![];
        for i in 0..dim {
            for j in i..dim {
                quadratic.push((i, j, sym()));
            }
        }
        let metric = PolynomialMetric { constant: DMatrix::identity(dim, dim), linear, quadratic };
        let half = vec![0.5; dim];
        Self::custom(metric, Domain::Box { lo: half.iter().map(|v| -v).collect(), hi: half })
    }

    /// Builds a manifold with its default chart domain and metadata.
    pub fn build(kind: ManifoldKind) -> Result<Self> {
        validate_kind(&kind)?;
        let domain = default_domain(&kind);
        let simply_connected = default_simply_connected(&kind);
        let totally_geodesic_dims = default_totally_geodesic(&kind);
        let spec = ManifoldSpec {
            kind,
            domain,
            derivatives: DerivativeMode::Analytic,
            simply_connected,
            totally_geodesic_dims,
        };
        spec.check_metric_samples()?;
        Ok(spec)
    }

    pub fn with_derivatives(mut self, mode: DerivativeMode) -> Self {
        self.derivatives = mode;
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        self.set_domain(domain)?;
        Ok(self)
    }

    pub fn with_simply_connected(mut self, flag: bool) -> Self {
        self.simply_connected = flag;
        self
    }

    pub fn with_totally_geodesic_dims(mut self, mut dims: Vec<usize>) -> Self {
        dims.sort_unstable();
        dims.dedup();
        self.totally_geodesic_dims = dims;
        self
    }

    fn set_domain(&mut self, domain: Domain) -> Result<()> {
        if domain.dim() != self.dim() {
            return Err(Error::InvalidManifold(format!(
                "domain has dimension {} but manifold has dimension {}",
                domain.dim(),
                self.dim()
            )));
        }
        domain.validate()?;
        if let ManifoldKind::Sphere { radius, .. } | ManifoldKind::Hyperbolic { radius, .. } = self.kind {
            let bound = domain.max_norm();
            let limit = match self.kind {
                ManifoldKind::Hyperbolic { .. } => radius,
                _ => f64::INFINITY,
            };
            if !(bound < limit) {
                return Err(Error::InvalidManifold(
                    "chart domain reaches the metric singularity".into(),
                ));
            }
        }
        if let ManifoldKind::Warped { interval, .. } = &self.kind {
            if let Domain::Product { parts } = &domain {
                if let Some(Domain::Box { lo, hi }) = parts.first() {
                    if lo[0] < interval.0 || hi[0] > interval.1 {
                        return Err(Error::InvalidManifold(
                            "warped domain exceeds the warping interval".into(),
                        ));
                    }
                }
            }
        }
        self.domain = domain;
        self.check_metric_samples()
    }

    pub fn kind(&self) -> &ManifoldKind {
        &self.kind
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn derivatives(&self) -> DerivativeMode {
        self.derivatives
    }

    pub fn is_simply_connected(&self) -> bool {
        self.simply_connected
    }

    /// Dimensions `m` of complete totally geodesic submanifolds declared
    /// through every point.
    pub fn totally_geodesic_dims(&self) -> &[usize] {
        &self.totally_geodesic_dims
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ManifoldKind::Euclidean { dim }
            | ManifoldKind::Sphere { dim, .. }
            | ManifoldKind::Hyperbolic { dim, .. }
            | ManifoldKind::CustomMetric { dim, .. } => *dim,
            ManifoldKind::Product { factors } => factors.iter().map(|f| f.dim()).sum(),
            ManifoldKind::Warped { fiber, .. } => 1 + fiber.dim(),
        }
    }

    /// Sectional curvature if the manifold has constant curvature by construction.
    pub fn constant_curvature(&self) -> Option<f64> {
        match &self.kind {
            ManifoldKind::Euclidean { .. } => Some(0.0),
            ManifoldKind::Sphere { radius, dim } if *dim >= 2 => Some(1.0 / (radius * radius)),
            ManifoldKind::Hyperbolic { radius, dim } if *dim >= 2 => Some(-1.0 / (radius * radius)),
            ManifoldKind::Sphere { .. } | ManifoldKind::Hyperbolic { .. } => Some(0.0),
            ManifoldKind::Product { factors } => {
                let flat = factors.iter().all(|f| f.constant_curvature() == Some(0.0));
                let curved: Vec<_> = factors.iter().filter(|f| f.dim() > 0 && f.constant_curvature() != Some(0.0)).collect();
                if flat {
                    Some(0.0)
                } else if curved.len() == 1 && curved[0].dim() == self.dim() {
                    curved[0].constant_curvature()
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    pub fn point(&self, coords: &[f64]) -> Result<ChartPoint> {
        self.point_from(DVector::from_column_slice(coords))
    }

    pub fn point_from(&self, coords: DVector<f64>) -> Result<ChartPoint> {
        if coords.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, manifold dimension is {}",
                coords.len(),
                self.dim()
            )));
        }
        if !self.contains(&coords) {
            return Err(Error::OutOfDomain { coords: coords.iter().copied().collect() });
        }
        Ok(ChartPoint(coords))
    }

    pub fn contains(&self, coords: &DVector<f64>) -> bool {
        coords.iter().all(|c| c.is_finite()) && self.domain.contains(coords.as_slice())
    }

    /// A reference point of the chart (domain center).
    pub fn origin(&self) -> ChartPoint {
        ChartPoint(DVector::from_vec(self.domain.center()))
    }

    /// Random point in a well-conditioned core region of the chart.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> ChartPoint {
        ChartPoint(DVector::from_vec(self.sample_coords(rng)))
    }

    fn sample_coords<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            ManifoldKind::Euclidean { dim } => self.domain.sample_ball(rng, 1.0_f64.min(0.5 * self.domain.inner_radius()), *dim),
            ManifoldKind::Sphere { dim, radius } => {
                self.domain.sample_ball(rng, radius.min(0.5 * self.domain.inner_radius()), *dim)
            }
            ManifoldKind::Hyperbolic { dim, radius } => {
                self.domain.sample_ball(rng, (0.5 * radius).min(0.5 * self.domain.inner_radius()), *dim)
            }
            ManifoldKind::Product { factors } => {
                let mut out = Vec::with_capacity(self.dim());
                if let Domain::Product { parts } = &self.domain {
                    for (f, part) in factors.iter().zip(parts) {
                        let sub = f.clone().with_domain(part.clone()).expect("factor domain is valid");
                        out.extend(sub.sample_coords(rng));
                    }
                } else {
                    for f in factors {
                        out.extend(f.sample_coords(rng));
                    }
                }
                out
            }
            ManifoldKind::Warped { fiber, .. } => {
                let mut out = Vec::with_capacity(self.dim());
                if let Domain::Product { parts } = &self.domain {
                    out.extend(parts[0].sample_core(rng));
                    let sub = fiber.as_ref().clone().with_domain(parts[1].clone()).expect("fiber domain is valid");
                    out.extend(sub.sample_coords(rng));
                } else {
                    out.extend(self.domain.sample_core(rng));
                }
                out
            }
            ManifoldKind::CustomMetric { .. } => self.domain.sample_core(rng),
        }
    }

    pub fn geometry(&self) -> Geometry<'_> {
        Geometry::new(self)
    }

    /// Short human-readable label, e.g. `sphere(2,1)`.
    pub fn label(&self) -> String {
        match &self.kind {
            ManifoldKind::Euclidean { dim } => format!("euclidean({dim})"),
            ManifoldKind::Sphere { dim, radius } => format!("sphere({dim},{radius})"),
            ManifoldKind::Hyperbolic { dim, radius } => format!("hyperbolic({dim},{radius})"),
            ManifoldKind::Product { factors } => {
                factors.iter().map(|f| f.label()).collect::<Vec<_>>().join("x")
            }
            ManifoldKind::Warped { fiber, .. } => format!("warped(I x {})", fiber.label()),
            ManifoldKind::CustomMetric { dim, .. } => format!("custom({dim})"),
        }
    }

    fn check_metric_samples(&self) -> Result<()> {
        for pt in self.domain.probe_points() {
            let g = metric::metric_value(self, &DVector::from_vec(pt.clone()));
            if (&g - g.transpose()).norm() > 1e-12 * (1.0 + g.norm()) {
                return Err(Error::InvalidManifold(format!("metric is not symmetric at {pt:?}")));
            }
            if g.clone().cholesky().is_none() {
                return Err(Error::InvalidManifold(format!("metric is not positive definite at {pt:?}")));
            }
        }
        Ok(())
    }
}

fn validate_kind(kind: &ManifoldKind) -> Result<()> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidManifold(format!("{name} must be positive, got {v}")))
        }
    };
    match kind {
        ManifoldKind::Euclidean { dim } if *dim == 0 => Err(Error::InvalidManifold("dimension must be positive".into())),
        ManifoldKind::Sphere { dim, radius } | ManifoldKind::Hyperbolic { dim, radius } => {
            if *dim == 0 {
                return Err(Error::InvalidManifold("dimension must be positive".into()));
            }
            positive("radius", *radius)
        }
        ManifoldKind::Product { factors } => {
            if factors.is_empty() {
                return Err(Error::InvalidManifold("product needs at least one factor".into()));
            }
            Ok(())
        }
        ManifoldKind::Warped { warping, interval, .. } => {
            if !(interval.0 < interval.1) {
                return Err(Error::InvalidManifold("warping interval must be non-empty".into()));
            }
            for r in [interval.0, 0.5 * (interval.0 + interval.1), interval.1] {
                if !(warping.eval(r).0 > 0.0) {
                    return Err(Error::InvalidManifold(format!("warping function must be positive on the interval (f({r}) <= 0)")));
                }
            }
            if let Warping::Linear { a, b } = warping {
                // root of a + b r must lie outside the open interval
                if *b != 0.0 {
                    let root = -a / b;
                    if root > interval.0 && root < interval.1 {
                        return Err(Error::InvalidManifold("linear warping vanishes inside the interval".into()));
                    }
                }
            }
            Ok(())
        }
        ManifoldKind::CustomMetric { dim, metric } => {
            if *dim == 0 {
                return Err(Error::InvalidManifold("dimension must be positive".into()));
            }
            let square = |m: &DMatrix<f64>| m.nrows() == *dim && m.ncols() == *dim;
            let symmetric = |m: &DMatrix<f64>| (m - m.transpose()).norm() <= 1e-12 * (1.0 + m.norm());
            if !square(&metric.constant) || !symmetric(&metric.constant) {
                return Err(Error::InvalidManifold("constant metric term must be a symmetric dim x dim matrix".into()));
            }
            if !metric.linear.is_empty() && metric.linear.len() != *dim {
                return Err(Error::InvalidManifold("linear terms: one matrix per coordinate".into()));
            }
            for m in &metric.linear {
                if !square(m) || !symmetric(m) {
                    return Err(Error::InvalidManifold("linear metric terms must be symmetric".into()));
                }
            }
            for (i, j, m) in &metric.quadratic {
                if *i >= *dim || *j >= *dim || !square(m) || !symmetric(m) {
                    return Err(Error::InvalidManifold("quadratic metric terms: bad index or non-symmetric matrix".into()));
                }
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn default_domain(kind: &ManifoldKind) -> Domain {
    match kind {
        ManifoldKind::Euclidean { dim } => Domain::Box { lo: vec![-1e3; *dim], hi: vec![1e3; *dim] },
        ManifoldKind::Sphere { dim, radius } => Domain::Ball { center: vec![0.0; *dim], radius: 10.0 * radius },
        ManifoldKind::Hyperbolic { dim, radius } => Domain::Ball { center: vec![0.0; *dim], radius: 0.99 * radius },
        ManifoldKind::Product { factors } => Domain::Product { parts: factors.iter().map(|f| f.domain.clone()).collect() },
        ManifoldKind::Warped { fiber, interval, .. } => Domain::Product {
            parts: vec![Domain::Box { lo: vec![interval.0], hi: vec![interval.1] }, fiber.domain.clone()],
        },
        ManifoldKind::CustomMetric { dim, .. } => Domain::Box { lo: vec![-1.0; *dim], hi: vec![1.0; *dim] },
    }
}

fn default_simply_connected(kind: &ManifoldKind) -> bool {
    match kind {
        ManifoldKind::Euclidean { .. } | ManifoldKind::Hyperbolic { .. } => true,
        ManifoldKind::Sphere { dim, .. } => *dim >= 2,
        ManifoldKind::Product { factors } => factors.iter().all(|f| f.simply_connected),
        ManifoldKind::Warped { fiber, .. } => fiber.simply_connected,
        // the chart domain is a box: contractible
        ManifoldKind::CustomMetric { .. } => true,
    }
}

fn default_totally_geodesic(kind: &ManifoldKind) -> Vec<usize> {
    match kind {
        ManifoldKind::Euclidean { dim } | ManifoldKind::Sphere { dim, .. } | ManifoldKind::Hyperbolic { dim, .. } => {
            (1..*dim).collect()
        }
        ManifoldKind::Product { factors } => {
            // sums of totally geodesic pieces of each factor (0 and full allowed per factor)
            let mut sums = vec![0usize];
            for f in factors {
                let mut options = vec![0, f.dim()];
                options.extend(f.totally_geodesic_dims.iter().copied());
                let mut next = Vec::new();
                for s in &sums {
                    for o in &options {
                        next.push(s + o);
                    }
                }
                next.sort_unstable();
                next.dedup();
                sums = next;
            }
            let total: usize = factors.iter().map(|f| f.dim()).sum();
            sums.into_iter().filter(|&m| m > 0 && m < total).collect()
        }
        // the r-lines are geodesics of any warped product
        ManifoldKind::Warped { fiber, .. } if fiber.dim() >= 1 => vec![1],
        _ => Vec::new(),
    }
}
