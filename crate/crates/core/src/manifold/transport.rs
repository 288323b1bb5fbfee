//! Curves on a chart, parallel transport, development and anti-development.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ManifoldSpec;
use crate::error::{Error, Result};
use crate::ode::{rk4_step, substeps, Packer};

/// A curve known at increasing sample times, with one-sided velocities at
/// every node; evaluated between nodes by cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    times: Vec<f64>,
    points: Vec<DVector<f64>>,
    /// velocity at node `i` seen from the left interval
    vel_minus: Vec<DVector<f64>>,
    /// velocity at node `i` seen from the right interval
    vel_plus: Vec<DVector<f64>>,
}

impl SampledPath {
    /// Builds a path; missing velocities are estimated by second-order
    /// finite differences of the samples.
    pub fn new(times: Vec<f64>, points: Vec<DVector<f64>>, velocities: Option<Vec<DVector<f64>>>) -> Result<Self> {
        if times.len() != points.len() || times.len() < 2 {
            return Err(Error::InvalidArgument("a path needs at least two samples with matching timestamps".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("path timestamps must be strictly increasing".into()));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Dimension("path samples have inconsistent dimension".into()));
        }
        let velocities = match velocities {
            Some(v) => {
                if v.len() != points.len() || v.iter().any(|w| w.len() != dim) {
                    return Err(Error::Dimension("velocity samples do not match the path".into()));
                }
                v
            }
            None => estimate_velocities(&times, &points),
        };
        Ok(SampledPath { times, points, vel_minus: velocities.clone(), vel_plus: velocities })
    }

    /// Path with velocity jumps: `vel_plus[i]` drives the interval after node `i`.
    pub fn with_one_sided(
        times: Vec<f64>,
        points: Vec<DVector<f64>>,
        vel_minus: Vec<DVector<f64>>,
        vel_plus: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let mut p = Self::new(times, points, Some(vel_plus.clone()))?;
        if vel_minus.len() != p.points.len() {
            return Err(Error::Dimension("velocity samples do not match the path".into()));
        }
        p.vel_minus = vel_minus;
        p.vel_plus = vel_plus;
        Ok(p)
    }

    /// Unit-speed polygonal path through `vertices`, sampled at spacing at
    /// most `spacing`, with velocity jumps at the corners.
    pub fn polyline(vertices: &[DVector<f64>], spacing: f64) -> Result<Self> {
        if vertices.len() < 2 || !(spacing > 0.0) {
            return Err(Error::InvalidArgument("a polyline needs two vertices and a positive spacing".into()));
        }
        let mut times = vec![0.0];
        let mut points = vec![vertices[0].clone()];
        let mut vm = vec![];
        let mut vp = vec![];
        let mut t = 0.0;
        for w in vertices.windows(2) {
            let d = &w[1] - &w[0];
            let len = d.norm();
            if !(len > 0.0) {
                return Err(Error::InvalidArgument("polyline has repeated vertices".into()));
            }
            let dir = &d / len;
            let steps = substeps(len, spacing);
            for i in 1..=steps {
                let s = i as f64 / steps as f64;
                vp.push(dir.clone());
                vm.push(dir.clone());
                times.push(t + s * len);
                points.push(&w[0] + &d * s);
            }
            t += len;
        }
        // node i: left velocity vm[i-1], right velocity vp[i]
        let mut minus = vec![vp[0].clone()];
        minus.extend(vm);
        vp.push(minus[minus.len() - 1].clone());
        Self::with_one_sided(times, points, minus, vp)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    /// Right-sided node velocities (left-sided at the final node).
    pub fn velocities(&self) -> Vec<DVector<f64>> {
        let mut v = self.vel_plus.clone();
        let last = v.len() - 1;
        v[last] = self.vel_minus[last].clone();
        v
    }

    /// Velocity at each node as seen from the interval before it.
    pub fn vel_minus(&self) -> &[DVector<f64>] {
        &self.vel_minus
    }

    /// Velocity at each node as seen from the interval after it.
    pub fn vel_plus(&self) -> &[DVector<f64>] {
        &self.vel_plus
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.points[0]
    }

    pub fn end(&self) -> &DVector<f64> {
        &self.points[self.points.len() - 1]
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Position and velocity at `t` on interval `seg` (Hermite cubic).
    pub fn eval_on(&self, seg: usize, t: f64) -> (DVector<f64>, DVector<f64>) {
        let (t0, t1) = (self.times[seg], self.times[seg + 1]);
        let d = t1 - t0;
        let s = (t - t0) / d;
        let (p0, p1) = (&self.points[seg], &self.points[seg + 1]);
        let (m0, m1) = (&self.vel_plus[seg] * d, &self.vel_minus[seg + 1] * d);
        let s2 = s * s;
        let s3 = s2 * s;
        let x = p0 * (2.0 * s3 - 3.0 * s2 + 1.0) + &m0 * (s3 - 2.0 * s2 + s) + p1 * (-2.0 * s3 + 3.0 * s2) + &m1 * (s3 - s2);
        let dx = (p0 * (6.0 * s2 - 6.0 * s) + &m0 * (3.0 * s2 - 4.0 * s + 1.0) + p1 * (-6.0 * s2 + 6.0 * s) + &m1 * (3.0 * s2 - 2.0 * s)) / d;
        (x, dx)
    }

    /// Interval containing `t` (clamped to the path's range).
    pub fn segment(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|&s| s <= t);
        idx.saturating_sub(1).min(self.times.len() - 2)
    }

    pub fn eval(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        self.eval_on(self.segment(t), t)
    }

    /// The same curve traversed backwards, re-parametrized on `[0, T]`.
    pub fn reversed(&self) -> SampledPath {
        let t_end = self.t_end();
        let times = self.times.iter().rev().map(|t| t_end - t).collect();
        let points = self.points.iter().rev().cloned().collect();
        let vel_minus = self.vel_plus.iter().rev().map(|v| -v).collect();
        let vel_plus = self.vel_minus.iter().rev().map(|v| -v).collect();
        SampledPath { times, points, vel_minus, vel_plus }
    }
}

fn estimate_velocities(times: &[f64], points: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let n = times.len();
    (0..n)
        .map(|i| {
            // three-point nonuniform stencil (one-sided at the ends)
            let (a, b, c) = if i == 0 {
                (0, 1, 2.min(n - 1))
            } else if i == n - 1 {
                (n.saturating_sub(3), n - 2, n - 1)
            } else {
                (i - 1, i, i + 1)
            };
            if a == b || b == c {
                return (&points[1] - &points[0]) / (times[1] - times[0]);
            }
            let (ta, tb, tc, t) = (times[a], times[b], times[c], times[i]);
            let la = (2.0 * t - tb - tc) / ((ta - tb) * (ta - tc));
            let lb = (2.0 * t - ta - tc) / ((tb - ta) * (tb - tc));
            let lc = (2.0 * t - ta - tb) / ((tc - ta) * (tc - tb));
            &points[a] * la + &points[b] * lb + &points[c] * lc
        })
        .collect()
}

/// One piece of a piecewise-constant frame-component control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPiece {
    pub duration: f64,
    pub u: Vec<f64>,
}

/// Curve description: explicit samples or a frame-component control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PathSpec {
    Samples {
        times: Vec<f64>,
        points: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        velocities: Option<Vec<Vec<f64>>>,
    },
    /// `x' = F(x) u(t)` from `start` with piecewise-constant `u`.
    FrameControl { start: Vec<f64>, pieces: Vec<ControlPiece> },
}

impl PathSpec {
    pub fn horizon(&self) -> f64 {
        match self {
            PathSpec::Samples { times, .. } => times.last().copied().unwrap_or(0.0) - times.first().copied().unwrap_or(0.0),
            PathSpec::FrameControl { pieces, .. } => pieces.iter().map(|p| p.duration).sum(),
        }
    }

    /// Turns the description into samples (integrating frame controls with
    /// RK4 at `step`), checking that every sample lies in the chart.
    pub fn resolve(&self, spec: &ManifoldSpec, step: f64) -> Result<SampledPath> {
        let path = match self {
            PathSpec::Samples { times, points, velocities } => SampledPath::new(
                times.clone(),
                points.iter().map(|p| DVector::from_column_slice(p)).collect(),
                velocities.as_ref().map(|v| v.iter().map(|w| DVector::from_column_slice(w)).collect()),
            )?,
            PathSpec::FrameControl { start, pieces } => frame_control_path(spec, &DVector::from_column_slice(start), pieces, step)?,
        };
        if path.dim() != spec.dim() {
            return Err(Error::Dimension(format!("path has dimension {}, manifold has {}", path.dim(), spec.dim())));
        }
        for (t, p) in path.times.iter().zip(&path.points) {
            if !spec.contains(p) {
                return Err(Error::ChartExit { time: *t });
            }
        }
        Ok(path)
    }
}

fn frame_control_path(spec: &ManifoldSpec, start: &DVector<f64>, pieces: &[ControlPiece], step: f64) -> Result<SampledPath> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let n = spec.dim();
    if start.len() != n {
        return Err(Error::Dimension("path start does not match the manifold dimension".into()));
    }
    if pieces.is_empty() || pieces.iter().any(|p| !(p.duration > 0.0) || p.u.len() != n) {
        return Err(Error::InvalidArgument("control pieces need positive durations and n components".into()));
    }
    let geo = spec.geometry();
    let vel = |x: &DVector<f64>, u: &DVector<f64>| -> Result<DVector<f64>> { Ok(geo.orthonormal_frame(x)? * u) };
    let mut times = vec![0.0];
    let mut points = vec![start.clone()];
    let mut vm = vec![DVector::zeros(n)];
    let mut vp = Vec::new();
    let mut t0 = 0.0;
    let mut x = start.clone();
    for piece in pieces {
        let u = DVector::from_column_slice(&piece.u);
        let steps = substeps(piece.duration, step);
        let h = piece.duration / steps as f64;
        vp.push(vel(&x, &u).map_err(exit(t0))?);
        let rhs = |_t: f64, y: &DVector<f64>| vel(y, &u);
        for i in 0..steps {
            let t = t0 + i as f64 * h;
            x = rk4_step(&rhs, t, &x, h).map_err(exit(t))?;
            if !spec.contains(&x) {
                return Err(Error::ChartExit { time: t + h });
            }
            let v = vel(&x, &u)?;
            times.push(t0 + (i + 1) as f64 * h);
            points.push(x.clone());
            vm.push(v.clone());
            if i + 1 < steps {
                vp.push(v);
            }
        }
        t0 += piece.duration;
    }
    vm[0] = vp[0].clone();
    vp.push(vm[vm.len() - 1].clone());
    SampledPath::with_one_sided(times, points, vm, vp)
}

pub(crate) fn exit(time: f64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::OutOfDomain { .. } => Error::ChartExit { time },
        other => other,
    }
}

/// Frame transport maps `T_k` at every sample time: `T_k` sends frame
/// components at `γ(t_0)` to frame components of the parallel-transported
/// vector at `γ(t_k)`. Each `T_k` is orthogonal.
pub fn frame_transport(spec: &ManifoldSpec, path: &SampledPath, step: f64) -> Result<Vec<DMatrix<f64>>> {
    let n = spec.dim();
    let geo = spec.geometry();
    let packer = Packer::new().block(n, n);
    let mut out = vec![DMatrix::identity(n, n)];
    let mut y = packer.pack(&[&DMatrix::identity(n, n)]);
    for seg in 0..path.len() - 1 {
        let (ta, tb) = (path.times[seg], path.times[seg + 1]);
        let steps = substeps(tb - ta, step);
        let h = (tb - ta) / steps as f64;
        let rhs = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
            let (x, dx) = path.eval_on(seg, t);
            let pg = geo.at(&x, 1)?;
            let w = &pg.frame_inv * dx;
            let tm = packer.get(y, 0);
            Ok(packer.pack(&[&(-(pg.connection.apply(&w) * tm))]))
        };
        for i in 0..steps {
            let t = ta + i as f64 * h;
            y = rk4_step(&rhs, t, &y, h).map_err(exit(t))?;
        }
        out.push(packer.get(&y, 0));
    }
    Ok(out)
}

/// Parallel transport of the coordinate vector `v0` from the start to the
/// end of the path; returns coordinate components at the end point.
pub fn parallel_transport(spec: &ManifoldSpec, path: &SampledPath, v0: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
    let geo = spec.geometry();
    let f0 = geo.at(path.start(), 0)?;
    let f1 = geo.at(path.end(), 0)?;
    let maps = frame_transport(spec, path, step)?;
    Ok(&f1.frame * &maps[maps.len() - 1] * (&f0.frame_inv * v0))
}

/// Development `Λ(γ)(t) = ∫_0^t P_s^0 γ'(s) ds`, expressed in frame
/// components at `γ(0)`. Returned as a path in `R^n` at the same times.
pub fn develop(spec: &ManifoldSpec, path: &SampledPath, step: f64) -> Result<SampledPath> {
    let n = spec.dim();
    let geo = spec.geometry();
    let packer = Packer::new().block(n, n).block(n, 1);
    let mut y = packer.pack(&[&DMatrix::identity(n, n), &DMatrix::zeros(n, 1)]);
    let velocity = |y: &DVector<f64>, x: &DVector<f64>, dx: &DVector<f64>| -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>)> {
        let pg = geo.at(x, 1)?;
        let w = &pg.frame_inv * dx;
        let tm = packer.get(y, 0);
        let lam = tm.transpose() * &w;
        Ok((w, tm, lam))
    };
    let mut points = vec![DVector::zeros(n)];
    let mut vm = Vec::new();
    let mut vp = Vec::new();
    for seg in 0..path.len() - 1 {
        let (ta, tb) = (path.times[seg], path.times[seg + 1]);
        let steps = substeps(tb - ta, step);
        let h = (tb - ta) / steps as f64;
        let rhs = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
            let (x, dx) = path.eval_on(seg, t);
            let (w, tm, lam) = velocity(y, &x, &dx)?;
            let pg = geo.at(&x, 1)?;
            Ok(packer.pack(&[&(-(pg.connection.apply(&w) * tm)), &DMatrix::from_column_slice(n, 1, lam.as_slice())]))
        };
        let (x0, dx0) = path.eval_on(seg, ta);
        vp.push(velocity(&y, &x0, &dx0).map_err(exit(ta))?.2);
        for i in 0..steps {
            let t = ta + i as f64 * h;
            y = rk4_step(&rhs, t, &y, h).map_err(exit(t))?;
        }
        let (x1, dx1) = path.eval_on(seg, tb);
        vm.push(velocity(&y, &x1, &dx1).map_err(exit(tb))?.2);
        points.push(packer.vector(&y, 1));
    }
    vm.insert(0, vp[0].clone());
    vp.push(vm[vm.len() - 1].clone());
    SampledPath::with_one_sided(path.times.clone(), points, vm, vp)
}

/// Anti-development: the curve `γ` from `y0` with `Λ(γ) = c`, where `c` is
/// a path in `R^n` (frame components at `y0`). Sampled at the times of `c`.
pub fn antidevelop(spec: &ManifoldSpec, y0: &DVector<f64>, c: &SampledPath, step: f64) -> Result<SampledPath> {
    let n = spec.dim();
    if c.dim() != n || y0.len() != n {
        return Err(Error::Dimension("anti-development needs a curve in R^n and a point of M".into()));
    }
    let geo = spec.geometry();
    let packer = Packer::new().block(n, 1).block(n, n);
    let mut y = packer.pack(&[&DMatrix::from_column_slice(n, 1, y0.as_slice()), &DMatrix::identity(n, n)]);
    // γ' = F(γ) T c'  and  T' = -Γ(T c') T
    let field = |y: &DVector<f64>, dc: &DVector<f64>| -> Result<(DVector<f64>, DMatrix<f64>)> {
        let x = packer.vector(y, 0);
        let pg = geo.at(&x, 1)?;
        let tm = packer.get(y, 1);
        let w = &tm * dc;
        let dt = -(pg.connection.apply(&w) * tm);
        Ok((&pg.frame * w, dt))
    };
    let mut points = vec![y0.clone()];
    let mut vm = Vec::new();
    let mut vp = Vec::new();
    for seg in 0..c.len() - 1 {
        let (ta, tb) = (c.times[seg], c.times[seg + 1]);
        let steps = substeps(tb - ta, step);
        let h = (tb - ta) / steps as f64;
        let rhs = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
            let (_, dc) = c.eval_on(seg, t);
            let (dx, dt) = field(y, &dc)?;
            Ok(packer.pack(&[&DMatrix::from_column_slice(n, 1, dx.as_slice()), &dt]))
        };
        vp.push(field(&y, &c.eval_on(seg, ta).1).map_err(exit(ta))?.0);
        for i in 0..steps {
            let t = ta + i as f64 * h;
            y = rk4_step(&rhs, t, &y, h).map_err(exit(t))?;
        }
        let x = packer.vector(&y, 0);
        if !spec.contains(&x) {
            return Err(Error::ChartExit { time: tb });
        }
        vm.push(field(&y, &c.eval_on(seg, tb).1).map_err(exit(tb))?.0);
        points.push(x);
    }
    vm.insert(0, vp[0].clone());
    vp.push(vm[vm.len() - 1].clone());
    SampledPath::with_one_sided(c.times.clone(), points, vm, vp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::geodesic::geodesic_path;
    use std::f64::consts::FRAC_PI_2;

    fn norm_g(spec: &ManifoldSpec, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let g = spec.geometry().metric(x).unwrap();
        v.dot(&(g * v)).sqrt()
    }

    #[test]
    fn hermite_reproduces_cubic() {
        let times: Vec<f64> = (0..5).map(|i| i as f64 * 0.25).collect();
        let f = |t: f64| DVector::from_vec(vec![t * t * t - t, 2.0 * t]);
        let df = |t: f64| DVector::from_vec(vec![3.0 * t * t - 1.0, 2.0]);
        let path = SampledPath::new(times.clone(), times.iter().map(|&t| f(t)).collect(), Some(times.iter().map(|&t| df(t)).collect())).unwrap();
        let (x, v) = path.eval(0.6);
        assert!((x - f(0.6)).norm() < 1e-14);
        assert!((v - df(0.6)).norm() < 1e-13);
    }

    #[test]
    fn euclidean_transport_is_trivial() {
        let e = ManifoldSpec::euclidean(2);
        let times = vec![0.0, 0.5, 1.0];
        let pts = vec![DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![1.0, 3.0]), DVector::from_vec(vec![-2.0, 1.0])];
        let path = SampledPath::new(times, pts, None).unwrap();
        let v0 = DVector::from_vec(vec![0.3, -0.7]);
        assert!((parallel_transport(&e, &path, &v0, 1e-2).unwrap() - &v0).norm() < 1e-14);
    }

    #[test]
    fn octant_triangle_rotates_by_quarter_turn() {
        // developed loop: three sides of a square of side pi/2 closes up on the sphere
        let s = ManifoldSpec::sphere(2, 1.0);
        let v = |a: f64, b: f64| DVector::from_vec(vec![a, b]);
        let c = SampledPath::polyline(&[v(0.0, 0.0), v(FRAC_PI_2, 0.0), v(FRAC_PI_2, FRAC_PI_2), v(0.0, FRAC_PI_2)], 1e-2).unwrap();
        let p = antidevelop(&s, &v(0.0, 0.0), &c, 1e-3).unwrap();
        assert!(p.end().norm() < 1e-6, "loop does not close: {}", p.end());
        let t = frame_transport(&s, &p, 1e-3).unwrap();
        let angle = crate::linalg::rotation_angle_2d(&t[t.len() - 1]).abs();
        assert!((angle - FRAC_PI_2).abs() < 1e-3, "angle {angle}");
    }

    #[test]
    fn transport_preserves_norm() {
        let s = ManifoldSpec::sphere(3, 1.0);
        let times: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        let pts = times.iter().map(|&t| DVector::from_vec(vec![0.5 * (3.0 * t).sin(), t * t - 0.3, 0.2 * t])).collect();
        let path = SampledPath::new(times, pts, None).unwrap();
        let v0 = DVector::from_vec(vec![1.0, 0.5, -0.2]);
        let v1 = parallel_transport(&s, &path, &v0, 1e-3).unwrap();
        assert!((norm_g(&s, path.start(), &v0) - norm_g(&s, path.end(), &v1)).abs() < 1e-8);
    }

    #[test]
    fn geodesics_develop_to_rays() {
        let s = ManifoldSpec::sphere(2, 1.0);
        let x = DVector::from_vec(vec![0.2, -0.1]);
        let f = s.geometry().orthonormal_frame(&x).unwrap();
        let u = DVector::from_vec(vec![0.6, 0.8]);
        let path = geodesic_path(&s, &x, &(&f * &u), 1.0, 1e-3).unwrap();
        let dev = develop(&s, &path, 1e-3).unwrap();
        for (t, p) in dev.times().iter().zip(dev.points()) {
            assert!((p - &u * *t).norm() < 1e-8);
        }
    }

    #[test]
    fn antidevelopment_inverts_development() {
        let s = ManifoldSpec::sphere(2, 1.0);
        let times: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let pts = times.iter().map(|&t| DVector::from_vec(vec![0.3 * t + 0.1 * (4.0 * t).sin(), -0.2 + 0.4 * t * t])).collect();
        let vels = times.iter().map(|&t| DVector::from_vec(vec![0.3 + 0.4 * (4.0 * t).cos(), 0.8 * t])).collect();
        let path = SampledPath::new(times, pts, Some(vels)).unwrap();
        let dev = develop(&s, &path, 1e-3).unwrap();
        let back = antidevelop(&s, path.start(), &dev, 1e-3).unwrap();
        for (a, b) in back.points().iter().zip(path.points()) {
            assert!((a - b).norm() < 1e-6);
        }
    }
}
