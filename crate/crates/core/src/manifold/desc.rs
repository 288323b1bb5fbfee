//! JSON description `{kind, dim, params, domain}` of a manifold.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{DerivativeMode, Domain, ManifoldKind, ManifoldSpec, PolynomialMetric, Warping};
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldDesc {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub params: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivatives: Option<DerivativeMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simply_connected: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub totally_geodesic_dims: Option<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RadiusParams {
    #[serde(default = "unit")]
    radius: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProductParams {
    factors: Vec<ManifoldDesc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WarpedParams {
    fiber: ManifoldDesc,
    warping: Warping,
    interval: [f64; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenericParams {
    strength: f64,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadraticTerm {
    i: usize,
    j: usize,
    matrix: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomParams {
    constant: Vec<Vec<f64>>,
    #[serde(default)]
    linear: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    quadratic: Vec<QuadraticTerm>,
}

fn params<T: for<'de> Deserialize<'de>>(kind: &str, map: &Map<String, Value>) -> Result<T, Error> {
    serde_json::from_value(Value::Object(map.clone()))
        .map_err(|e| Error::InvalidManifold(format!("params of {kind}: {e}")))
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, Error> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidManifold("metric matrices must be square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl TryFrom<ManifoldDesc> for ManifoldSpec {
    type Error = Error;

    fn try_from(desc: ManifoldDesc) -> Result<Self, Error> {
        let dim_required = || desc.dim.ok_or_else(|| Error::InvalidManifold(format!("{} needs `dim`", desc.kind)));
        if desc.kind == "generic" {
            let p: GenericParams = params(&desc.kind, &desc.params)?;
            let spec = ManifoldSpec::generic(dim_required()?, p.strength, p.seed)?;
            return finish(spec, desc);
        }
        let kind = match desc.kind.as_str() {
            "euclidean" => {
                if !desc.params.is_empty() {
                    return Err(Error::InvalidManifold("euclidean takes no params".into()));
                }
                ManifoldKind::Euclidean { dim: dim_required()? }
            }
            "sphere" | "hyperbolic" => {
                let p: RadiusParams = params(&desc.kind, &desc.params)?;
                let dim = dim_required()?;
                if desc.kind == "sphere" {
                    ManifoldKind::Sphere { dim, radius: p.radius }
                } else {
                    ManifoldKind::Hyperbolic { dim, radius: p.radius }
                }
            }
            "product" => {
                let p: ProductParams = params(&desc.kind, &desc.params)?;
                let factors = p.factors.into_iter().map(ManifoldSpec::try_from).collect::<Result<Vec<_>, _>>()?;
                ManifoldKind::Product { factors }
            }
            "warped" => {
                let p: WarpedParams = params(&desc.kind, &desc.params)?;
                ManifoldKind::Warped {
                    fiber: Box::new(ManifoldSpec::try_from(p.fiber)?),
                    warping: p.warping,
                    interval: (p.interval[0], p.interval[1]),
                }
            }
            "custom_metric" => {
                let p: CustomParams = params(&desc.kind, &desc.params)?;
                let constant = matrix(&p.constant)?;
                let linear = p.linear.iter().map(|m| matrix(m)).collect::<Result<Vec<_>, _>>()?;
                let quadratic = p
                    .quadratic
                    .iter()
                    .map(|t| Ok((t.i, t.j, matrix(&t.matrix)?)))
                    .collect::<Result<Vec<_>, Error>>()?;
                ManifoldKind::CustomMetric { dim: constant.nrows(), metric: PolynomialMetric { constant, linear, quadratic } }
            }
            other => return Err(Error::InvalidManifold(format!("unknown manifold kind `{other}`"))),
        };
        finish(ManifoldSpec::build(kind)?, desc)
    }
}

fn finish(mut spec: ManifoldSpec, desc: ManifoldDesc) -> Result<ManifoldSpec, Error> {
    if let Some(dim) = desc.dim {
        if dim != spec.dim() {
            return Err(Error::InvalidManifold(format!("declared dim {dim} but the description has dimension {}", spec.dim())));
        }
    }
    if let Some(domain) = desc.domain {
        spec.set_domain(domain)?;
    }
    if let Some(mode) = desc.derivatives {
        spec.derivatives = mode;
    }
    if let Some(flag) = desc.simply_connected {
        spec.simply_connected = flag;
    }
    if let Some(dims) = desc.totally_geodesic_dims {
        if dims.iter().any(|&m| m == 0 || m >= spec.dim()) {
            return Err(Error::InvalidManifold("totally geodesic dimensions must lie in 1..dim".into()));
        }
        spec = spec.with_totally_geodesic_dims(dims);
    }
    Ok(spec)
}

impl From<ManifoldSpec> for ManifoldDesc {
    fn from(spec: ManifoldSpec) -> Self {
        let dim = spec.dim();
        let (kind, params) = match &spec.kind {
            ManifoldKind::Euclidean { .. } => ("euclidean", Map::new()),
            ManifoldKind::Sphere { radius, .. } => ("sphere", object(json!({ "radius": radius }))),
            ManifoldKind::Hyperbolic { radius, .. } => ("hyperbolic", object(json!({ "radius": radius }))),
            ManifoldKind::Product { factors } => {
                let factors: Vec<ManifoldDesc> = factors.iter().cloned().map(ManifoldDesc::from).collect();
                ("product", object(json!({ "factors": factors })))
            }
            ManifoldKind::Warped { fiber, warping, interval } => (
                "warped",
                object(json!({
                    "fiber": ManifoldDesc::from(fiber.as_ref().clone()),
                    "warping": warping,
                    "interval": [interval.0, interval.1],
                })),
            ),
            ManifoldKind::CustomMetric { metric, .. } => {
                let quadratic: Vec<QuadraticTerm> = metric
                    .quadratic
                    .iter()
                    .map(|(i, j, m)| QuadraticTerm { i: *i, j: *j, matrix: rows(m) })
                    .collect();
                let linear: Vec<_> = metric.linear.iter().map(rows).collect();
                (
                    "custom_metric",
                    object(json!({
                        "constant": rows(&metric.constant),
                        "linear": linear,
                        "quadratic": quadratic,
                    })),
                )
            }
        };
        ManifoldDesc {
            kind: kind.to_string(),
            dim: Some(dim),
            params,
            domain: Some(spec.domain.clone()),
            derivatives: Some(spec.derivatives),
            simply_connected: Some(spec.simply_connected),
            totally_geodesic_dims: Some(spec.totally_geodesic_dims.clone()),
        }
    }
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("json! object literal"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_from_json() {
        let spec: ManifoldSpec = serde_json::from_str(r#"{"kind":"sphere","dim":2,"params":{"radius":2.0}}"#).unwrap();
        assert_eq!(spec.dim(), 2);
        assert_eq!(spec.constant_curvature(), Some(0.25));
    }

    #[test]
    fn round_trip_preserves_spec() {
        let w = ManifoldSpec::warped(ManifoldSpec::sphere(2, 1.0), Warping::Exponential { c: 1.0, k: 0.3 }, (-1.0, 2.0)).unwrap();
        let p = ManifoldSpec::product(vec![ManifoldSpec::euclidean(1), w]).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let back: ManifoldSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn unknown_fields_and_kinds_are_errors() {
        assert!(serde_json::from_str::<ManifoldSpec>(r#"{"kind":"torus","dim":2}"#).is_err());
        assert!(serde_json::from_str::<ManifoldSpec>(r#"{"kind":"sphere","dim":2,"params":{"r":1}}"#).is_err());
        assert!(serde_json::from_str::<ManifoldSpec>(r#"{"kind":"euclidean"}"#).is_err());
    }

    #[test]
    fn generic_kind_is_seeded() {
        let text = r#"{"kind":"generic","dim":3,"params":{"strength":0.4,"seed":7}}"#;
        let a: ManifoldSpec = serde_json::from_str(text).unwrap();
        assert_eq!(a, ManifoldSpec::generic(3, 0.4, 7).unwrap());
        assert!(serde_json::from_str::<ManifoldSpec>(r#"{"kind":"generic","params":{"strength":0.4,"seed":7}}"#).is_err());
    }
}
