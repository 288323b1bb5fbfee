//! Geodesics by fixed-step RK4 on `x'' = -Γ(x', x')`.

use nalgebra::DVector;

use super::transport::SampledPath;
use super::ManifoldSpec;
use crate::error::{Error, Result};
use crate::ode::{rk4_step, substeps, Packer};

fn exit_at(time: f64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::OutOfDomain { .. } => Error::ChartExit { time },
        other => other,
    }
}

/// Integrates the geodesic through `x` with coordinate velocity `v` over
/// `[0, t_end]` and returns every step.
pub fn geodesic_path(spec: &ManifoldSpec, x: &DVector<f64>, v: &DVector<f64>, t_end: f64, step: f64) -> Result<SampledPath> {
    if !(step > 0.0) || !(t_end > 0.0) {
        return Err(Error::InvalidArgument("step and horizon must be positive".into()));
    }
    if x.len() != spec.dim() || v.len() != spec.dim() {
        return Err(Error::Dimension("geodesic initial data must match the manifold dimension".into()));
    }
    if !spec.contains(x) {
        return Err(Error::OutOfDomain { coords: x.iter().copied().collect() });
    }
    let n = spec.dim();
    let packer = Packer::new().block(n, 1).block(n, 1);
    let geo = spec.geometry();
    let rhs = |_t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        let p = packer.vector(y, 0);
        let w = packer.vector(y, 1);
        let pg = geo.at(&p, 1)?;
        let acc = -pg.christoffel_contract(&w, &w);
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&w);
        out.rows_mut(n, n).copy_from(&acc);
        Ok(out)
    };
    let steps = substeps(t_end, step);
    let h = t_end / steps as f64;
    let mut y = DVector::zeros(2 * n);
    y.rows_mut(0, n).copy_from(x);
    y.rows_mut(n, n).copy_from(v);
    let mut times = vec![0.0];
    let mut points = vec![x.clone()];
    let mut velocities = vec![v.clone()];
    for i in 0..steps {
        let t = i as f64 * h;
        y = rk4_step(&rhs, t, &y, h).map_err(exit_at(t))?;
        let p = packer.vector(&y, 0);
        if !spec.contains(&p) {
            return Err(Error::ChartExit { time: t + h });
        }
        times.push((i + 1) as f64 * h);
        points.push(p);
        velocities.push(packer.vector(&y, 1));
    }
    SampledPath::new(times, points, Some(velocities))
}

/// End point and velocity of the geodesic flow after time `t_end`
/// (negative times flow backwards).
pub fn geodesic_flow(
    spec: &ManifoldSpec,
    x: &DVector<f64>,
    v: &DVector<f64>,
    t_end: f64,
    step: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if t_end == 0.0 {
        return Ok((x.clone(), v.clone()));
    }
    if t_end < 0.0 {
        let (y, w) = geodesic_flow(spec, x, &-v, -t_end, step)?;
        return Ok((y, -w));
    }
    let path = geodesic_path(spec, x, v, t_end, step)?;
    let last = path.len() - 1;
    Ok((path.points()[last].clone(), path.velocities()[last].clone()))
}

/// Same as [`geodesic_path`] with the initial velocity in frame components.
pub fn geodesic_path_frame(spec: &ManifoldSpec, x: &DVector<f64>, u: &DVector<f64>, t_end: f64, step: f64) -> Result<SampledPath> {
    let frame = spec.geometry().orthonormal_frame(x)?;
    geodesic_path(spec, x, &(frame * u), t_end, step)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn speed(spec: &ManifoldSpec, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let g = spec.geometry().metric(x).unwrap();
        v.dot(&(g * v)).sqrt()
    }

    #[test]
    fn euclidean_geodesics_are_lines() {
        let e = ManifoldSpec::euclidean(3);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let v = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let (y, w) = geodesic_flow(&e, &x, &v, 2.0, 1e-2).unwrap();
        assert!((y - (&x + &v * 2.0)).norm() < 1e-12);
        assert!((w - v).norm() < 1e-12);
    }

    #[test]
    fn great_circle_closes_after_full_period() {
        let s = ManifoldSpec::sphere(2, 1.0);
        // a point on the equator, moving along it (never near the pole)
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let f = s.geometry().orthonormal_frame(&x).unwrap();
        let v = f.column(1).into_owned();
        let (y, _) = geodesic_flow(&s, &x, &v, 2.0 * std::f64::consts::PI, 1e-3).unwrap();
        assert!((y - &x).norm() < 1e-6);
    }

    #[test]
    fn speed_is_conserved() {
        let s = ManifoldSpec::hyperbolic(2, 1.0);
        let x = DVector::from_vec(vec![0.1, -0.2]);
        let v = DVector::from_vec(vec![0.3, 0.2]);
        let path = geodesic_path(&s, &x, &v, 1.0, 1e-3).unwrap();
        let s0 = speed(&s, &x, &v);
        for (p, w) in path.points().iter().zip(path.velocities()) {
            assert!((speed(&s, p, &w) - s0).abs() < 1e-8);
        }
    }

    #[test]
    fn leaving_the_chart_reports_time() {
        let h = ManifoldSpec::hyperbolic(2, 1.0);
        let x = DVector::from_vec(vec![0.0, 0.0]);
        let v = DVector::from_vec(vec![1.0, 0.0]);
        match geodesic_flow(&h, &x, &v, 10.0, 1e-2) {
            Err(Error::ChartExit { time }) => assert!(time > 0.5 && time < 10.0),
            other => panic!("expected chart exit, got {other:?}"),
        }
    }
}
