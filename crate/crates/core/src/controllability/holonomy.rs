//! Holonomy algebras from transported curvature endomorphisms.
//!
//! Curvature operators `R(e_i, e_j)` at the ends of seeded radial geodesics
//! are pulled back to the base point by parallel transport; their span is
//! then closed under commutators. Transport around explicit loops
//! ([`loop_holonomy`]) provides an independent check.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{commutator, span_basis, to_rows, RANK_REL_TOL};
use crate::manifold::geodesic::geodesic_path_frame;
use crate::manifold::transport::{frame_transport, SampledPath};
use crate::manifold::ManifoldSpec;

/// Sampling parameters for [`holonomy_algebra_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolonomySampling {
    pub samples: usize,
    pub seed: u64,
    /// Geodesic lengths are uniform in `[0, max_length]`.
    pub max_length: f64,
    pub step: f64,
}

impl HolonomySampling {
    pub fn new(samples: usize, seed: u64) -> Self {
        HolonomySampling { samples, seed, max_length: 1.0, step: 1e-2 }
    }
}

/// Where one batch of generators came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    /// Sample index, `None` for the curvature at the base point itself.
    pub sample: Option<usize>,
    /// Unit initial direction in frame components.
    pub direction: Vec<f64>,
    pub length: f64,
}

/// A subalgebra of `so(n)` at a base point, Frobenius-orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HolonomyAlgebra {
    pub base: DVector<f64>,
    pub n: usize,
    pub basis: Vec<DMatrix<f64>>,
    pub provenance: Vec<Provenance>,
    pub samples_used: usize,
    pub samples_skipped: usize,
    /// Singular values of the closed generator family.
    pub spectrum: Vec<f64>,
    pub seed: u64,
}

impl HolonomyAlgebra {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// The zero algebra at `base`.
    pub fn trivial(base: DVector<f64>) -> Self {
        let n = base.len();
        HolonomyAlgebra { base, n, basis: vec![], provenance: vec![], samples_used: 0, samples_skipped: 0, spectrum: vec![], seed: 0 }
    }

    /// Largest Frobenius norm of `[a, b]` outside the span, over basis pairs.
    pub fn closure_defect(&self) -> f64 {
        let flat: Vec<DVector<f64>> = self.basis.iter().map(flatten).collect();
        let mut worst: f64 = 0.0;
        for a in &self.basis {
            for b in &self.basis {
                let c = flatten(&commutator(a, b));
                worst = worst.max(crate::linalg::residual_outside(&c, &flat).norm());
            }
        }
        worst
    }

    /// Distance of `k` from the algebra (Frobenius).
    pub fn residual(&self, k: &DMatrix<f64>) -> f64 {
        let flat: Vec<DVector<f64>> = self.basis.iter().map(flatten).collect();
        crate::linalg::residual_outside(&flatten(k), &flat).norm()
    }

    pub fn to_record(&self) -> HolonomyRecord {
        HolonomyRecord {
            base: self.base.iter().copied().collect(),
            n: self.n,
            dim: self.dim(),
            basis: self.basis.iter().map(to_rows).collect(),
            provenance: self.provenance.clone(),
            samples_used: self.samples_used,
            samples_skipped: self.samples_skipped,
            singular_values: self.spectrum.clone(),
            seed: self.seed,
        }
    }
}

/// JSON form of a [`HolonomyAlgebra`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolonomyRecord {
    pub base: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    pub basis: Vec<Vec<Vec<f64>>>,
    pub provenance: Vec<Provenance>,
    pub samples_used: usize,
    pub samples_skipped: usize,
    pub singular_values: Vec<f64>,
    pub seed: u64,
}

fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

fn curvature_family(spec: &ManifoldSpec, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
    let pg = spec.geometry().at(x, 2)?;
    let n = spec.dim();
    let e = |i: usize| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
    let mut out = vec![];
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(pg.curvature_apply(&e(i), &e(j)));
        }
    }
    Ok(out)
}

/// Holonomy algebra at `x` from `samples` seeded radial geodesics.
pub fn holonomy_algebra(spec: &ManifoldSpec, x: &DVector<f64>, samples: usize, seed: u64) -> Result<HolonomyAlgebra> {
    holonomy_algebra_with(spec, x, &HolonomySampling::new(samples, seed))
}

pub fn holonomy_algebra_with(spec: &ManifoldSpec, x: &DVector<f64>, opts: &HolonomySampling) -> Result<HolonomyAlgebra> {
    if opts.samples == 0 {
        return Err(Error::InvalidArgument("holonomy sampling needs at least one sample".into()));
    }
    spec.point_from(x.clone())?;
    let n = spec.dim();
    let mut family = curvature_family(spec, x)?;
    let mut provenance = vec![Provenance { sample: None, direction: vec![0.0; n], length: 0.0 }];

    let draws: Vec<Option<(Provenance, Vec<DMatrix<f64>>)>> = (0..opts.samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(s as u64 + 1);
            let mut u = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            u /= u.norm().max(1e-300);
            let length = opts.max_length * rng.random::<f64>();
            let prov = Provenance { sample: Some(s), direction: u.iter().copied().collect(), length };
            if length < opts.step {
                return curvature_family(spec, x).ok().map(|f| (prov, f));
            }
            let path = geodesic_path_frame(spec, x, &u, length, opts.step).ok()?;
            let maps = frame_transport(spec, &path, opts.step).ok()?;
            let t = &maps[maps.len() - 1];
            let ends = curvature_family(spec, path.end()).ok()?;
            Some((prov, ends.iter().map(|r| t.transpose() * r * t).collect()))
        })
        .collect();

    let mut skipped = 0;
    for d in draws {
        match d {
            Some((p, f)) => {
                provenance.push(p);
                family.extend(f);
            }
            None => skipped += 1,
        }
    }
    let used = opts.samples - skipped;
    let (basis, spectrum) = close_under_brackets(&family, n);
    Ok(HolonomyAlgebra { base: x.clone(), n, basis, provenance, samples_used: used, samples_skipped: skipped, spectrum, seed: opts.seed })
}

/// Span of `family` in `so(n)` closed under commutators.
pub fn close_under_brackets(family: &[DMatrix<f64>], n: usize) -> (Vec<DMatrix<f64>>, Vec<f64>) {
    let mut vecs: Vec<DVector<f64>> = family.iter().map(flatten).collect();
    let mut span = span_basis(&vecs, n * n, RANK_REL_TOL);
    loop {
        let mats: Vec<DMatrix<f64>> = span.basis.iter().map(|v| DMatrix::from_column_slice(n, n, v.as_slice())).collect();
        let before = span.rank();
        for (i, a) in mats.iter().enumerate() {
            for b in &mats[i + 1..] {
                vecs.push(flatten(&commutator(a, b)));
            }
        }
        span = span_basis(&vecs, n * n, RANK_REL_TOL);
        if span.rank() == before {
            let basis = span
                .basis
                .iter()
                .map(|v| {
                    let m = DMatrix::from_column_slice(n, n, v.as_slice());
                    // remove round-off symmetric parts
                    (&m - m.transpose()) * 0.5
                })
                .collect();
            return (basis, span.spectrum);
        }
    }
}

/// Parallel transport around the closed coordinate polygon `vertices`
/// (first vertex repeated at the end is implied), as an orthogonal map of
/// frame components at the first vertex.
pub fn loop_holonomy(spec: &ManifoldSpec, vertices: &[DVector<f64>], step: f64) -> Result<DMatrix<f64>> {
    let mut closed = vertices.to_vec();
    closed.push(vertices[0].clone());
    let path = SampledPath::polyline(&closed, step)?;
    let maps = frame_transport(spec, &path, step)?;
    Ok(maps[maps.len() - 1].clone())
}
