use nalgebra::{DMatrix, DVector};

use super::{DerivativeMode, ManifoldKind, ManifoldSpec, PolynomialMetric};

/// Metric matrix with its first and (optionally) second coordinate derivatives.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    /// `dg[k] = d g / d x_k`
    pub dg: Vec<DMatrix<f64>>,
    /// `ddg[k][l] = d^2 g / d x_k d x_l`; empty when not requested.
    pub ddg: Vec<Vec<DMatrix<f64>>>,
}

/// Relative step of first-derivative finite differences.
pub const FD_STEP_FIRST: f64 = 1e-5;
/// Relative step of second-derivative finite differences.
pub const FD_STEP_SECOND: f64 = 3e-4;

pub fn metric_value(spec: &ManifoldSpec, x: &DVector<f64>) -> DMatrix<f64> {
    analytic_jet(spec, x, 0).g
}

/// Metric jet of order 0, 1 or 2 using the manifold's derivative mode.
pub fn metric_jet(spec: &ManifoldSpec, x: &DVector<f64>, order: usize) -> MetricJet {
    match spec.derivatives() {
        DerivativeMode::Analytic => analytic_jet(spec, x, order),
        DerivativeMode::FiniteDifference => fd_jet(spec, x, order),
    }
}

fn fd_jet(spec: &ManifoldSpec, x: &DVector<f64>, order: usize) -> MetricJet {
    let n = x.len();
    let g = metric_value(spec, x);
    let scale = 1.0 + x.norm();
    let mut dg = Vec::new();
    let mut ddg = Vec::new();
    if order >= 1 {
        let h = FD_STEP_FIRST * scale;
        for k in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            dg.push((metric_value(spec, &xp) - metric_value(spec, &xm)) / (2.0 * h));
        }
    }
    if order >= 2 {
        let h = FD_STEP_SECOND * scale;
        let shifted = |pairs: &[(usize, f64)]| {
            let mut y = x.clone();
            for &(i, s) in pairs {
                y[i] += s * h;
            }
            metric_value(spec, &y)
        };
        ddg = vec![vec![DMatrix::zeros(n, n); n]; n];
        for k in 0..n {
            ddg[k][k] = (shifted(&[(k, 1.0)]) - &g * 2.0 + shifted(&[(k, -1.0)])) / (h * h);
            for l in (k + 1)..n {
                let m = (shifted(&[(k, 1.0), (l, 1.0)]) - shifted(&[(k, 1.0), (l, -1.0)]) - shifted(&[(k, -1.0), (l, 1.0)])
                    + shifted(&[(k, -1.0), (l, -1.0)]))
                    / (4.0 * h * h);
                ddg[k][l] = m.clone();
                ddg[l][k] = m;
            }
        }
    }
    MetricJet { g, dg, ddg }
}

fn analytic_jet(spec: &ManifoldSpec, x: &DVector<f64>, order: usize) -> MetricJet {
    let n = x.len();
    match spec.kind() {
        ManifoldKind::Euclidean { .. } => MetricJet {
            g: DMatrix::identity(n, n),
            dg: if order >= 1 { vec![DMatrix::zeros(n, n); n] } else { Vec::new() },
            ddg: if order >= 2 { vec![vec![DMatrix::zeros(n, n); n]; n] } else { Vec::new() },
        },
        ManifoldKind::Sphere { radius, .. } => conformal_jet(x, *radius, 1.0, order),
        ManifoldKind::Hyperbolic { radius, .. } => conformal_jet(x, *radius, -1.0, order),
        ManifoldKind::Product { factors } => product_jet(spec, factors, x, order),
        ManifoldKind::Warped { fiber, warping, .. } => {
            let r = x[0];
            let y = x.rows(1, n - 1).into_owned();
            let fj = analytic_jet(fiber, &y, order);
            let (f, df, ddf) = warping.eval(r);
            let w = f * f;
            let dw = 2.0 * f * df;
            let ddw = 2.0 * (df * df + f * ddf);
            let embed = |m: &DMatrix<f64>| {
                let mut out = DMatrix::zeros(n, n);
                out.view_mut((1, 1), (n - 1, n - 1)).copy_from(m);
                out
            };
            let mut g = embed(&(&fj.g * w));
            g[(0, 0)] = 1.0;
            let mut dg = Vec::new();
            let mut ddg = Vec::new();
            if order >= 1 {
                dg.push(embed(&(&fj.g * dw)));
                for k in 0..n - 1 {
                    dg.push(embed(&(&fj.dg[k] * w)));
                }
            }
            if order >= 2 {
                ddg = vec![vec![DMatrix::zeros(n, n); n]; n];
                ddg[0][0] = embed(&(&fj.g * ddw));
                for k in 0..n - 1 {
                    let m = embed(&(&fj.dg[k] * dw));
                    ddg[0][k + 1] = m.clone();
                    ddg[k + 1][0] = m;
                    for l in 0..n - 1 {
                        ddg[k + 1][l + 1] = embed(&(&fj.ddg[k][l] * w));
                    }
                }
            }
            MetricJet { g, dg, ddg }
        }
        ManifoldKind::CustomMetric { metric, .. } => polynomial_jet(metric, x, order),
    }
}

/// `g = mu(x) I` with `mu = 4 r^4 / (r^2 + sigma |x|^2)^2`.
fn conformal_jet(x: &DVector<f64>, radius: f64, sigma: f64, order: usize) -> MetricJet {
    let n = x.len();
    let r2 = radius * radius;
    let c = 4.0 * r2 * r2;
    let s = r2 + sigma * x.norm_squared();
    let mu = c / (s * s);
    let id = DMatrix::<f64>::identity(n, n);
    let ds: Vec<f64> = x.iter().map(|xk| 2.0 * sigma * xk).collect();
    let dg = if order >= 1 {
        ds.iter().map(|dk| &id * (-2.0 * c / (s * s * s) * dk)).collect()
    } else {
        Vec::new()
    };
    let ddg = if order >= 2 {
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|l| {
                        let dds = if k == l { 2.0 * sigma } else { 0.0 };
                        let v = 6.0 * c / s.powi(4) * ds[k] * ds[l] - 2.0 * c / s.powi(3) * dds;
                        &id * v
                    })
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };
    MetricJet { g: id * mu, dg, ddg }
}

fn product_jet(spec: &ManifoldSpec, factors: &[ManifoldSpec], x: &DVector<f64>, order: usize) -> MetricJet {
    let n = spec.dim();
    let mut g = DMatrix::zeros(n, n);
    let mut dg = if order >= 1 { vec![DMatrix::zeros(n, n); n] } else { Vec::new() };
    let mut ddg = if order >= 2 { vec![vec![DMatrix::zeros(n, n); n]; n] } else { Vec::new() };
    let mut off = 0;
    for f in factors {
        let d = f.dim();
        let y = x.rows(off, d).into_owned();
        let fj = analytic_jet(f, &y, order);
        g.view_mut((off, off), (d, d)).copy_from(&fj.g);
        if order >= 1 {
            for k in 0..d {
                dg[off + k].view_mut((off, off), (d, d)).copy_from(&fj.dg[k]);
            }
        }
        if order >= 2 {
            for k in 0..d {
                for l in 0..d {
                    ddg[off + k][off + l].view_mut((off, off), (d, d)).copy_from(&fj.ddg[k][l]);
                }
            }
        }
        off += d;
    }
    MetricJet { g, dg, ddg }
}

fn polynomial_jet(metric: &PolynomialMetric, x: &DVector<f64>, order: usize) -> MetricJet {
    let n = x.len();
    let mut g = metric.constant.clone();
    for (k, m) in metric.linear.iter().enumerate() {
        g += m * x[k];
    }
    for (i, j, m) in &metric.quadratic {
        g += m * (x[*i] * x[*j]);
    }
    let mut dg = Vec::new();
    if order >= 1 {
        dg = (0..n)
            .map(|k| metric.linear.get(k).cloned().unwrap_or_else(|| DMatrix::zeros(n, n)))
            .collect();
        for (i, j, m) in &metric.quadratic {
            dg[*i] += m * x[*j];
            dg[*j] += m * x[*i];
        }
    }
    let mut ddg = Vec::new();
    if order >= 2 {
        ddg = vec![vec![DMatrix::zeros(n, n); n]; n];
        for (i, j, m) in &metric.quadratic {
            ddg[*i][*j] += m;
            ddg[*j][*i] += m;
        }
    }
    MetricJet { g, dg, ddg }
}
