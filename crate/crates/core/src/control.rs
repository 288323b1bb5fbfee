//! Control signals `t ↦ u(t) ∈ R^n` in frame components.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::transport::ControlPiece;

/// Which frame the control components refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControlFrame {
    /// The deterministic orthonormal frame at the current point.
    #[default]
    Local,
    /// The initial frame, parallel transported along the curve (development
    /// velocity). Constant controls then give geodesics.
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSample {
    pub t: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum ControlData {
    /// Consecutive constant pieces starting at `t = 0`.
    Piecewise(Vec<ControlPiece>),
    /// Samples interpolated linearly in time.
    Samples(Vec<ControlSample>),
}

/// JSON form `{type: piecewise|samples, data, T, frame}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    #[serde(flatten)]
    pub data: ControlData,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub frame: ControlFrame,
}

impl ControlSignal {
    pub fn constant(u: &[f64], horizon: f64) -> Self {
        ControlSignal {
            data: ControlData::Piecewise(vec![ControlPiece { duration: horizon, u: u.to_vec() }]),
            horizon,
            frame: ControlFrame::Local,
        }
    }

    pub fn piecewise(pieces: Vec<ControlPiece>) -> Self {
        let horizon = pieces.iter().map(|p| p.duration).sum();
        ControlSignal { data: ControlData::Piecewise(pieces), horizon, frame: ControlFrame::Local }
    }

    pub fn in_frame(mut self, frame: ControlFrame) -> Self {
        self.frame = frame;
        self
    }

    /// Random piecewise-constant control with `pieces` equal pieces and
    /// components uniform in `[-amplitude, amplitude]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, horizon: f64, pieces: usize, amplitude: f64) -> Self {
        let d = horizon / pieces as f64;
        let pieces = (0..pieces)
            .map(|_| ControlPiece { duration: d, u: (0..n).map(|_| amplitude * (2.0 * rng.random::<f64>() - 1.0)).collect() })
            .collect();
        ControlSignal { data: ControlData::Piecewise(pieces), horizon, frame: ControlFrame::Local }
    }

    pub fn dim(&self) -> usize {
        match &self.data {
            ControlData::Piecewise(p) => p.first().map_or(0, |p| p.u.len()),
            ControlData::Samples(s) => s.first().map_or(0, |s| s.u.len()),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument("control horizon T must be positive".into()));
        }
        match &self.data {
            ControlData::Piecewise(pieces) => {
                if pieces.is_empty() {
                    return Err(Error::InvalidArgument("piecewise control needs at least one piece".into()));
                }
                if pieces.iter().any(|p| !(p.duration > 0.0) || p.u.len() != n || p.u.iter().any(|v| !v.is_finite())) {
                    return Err(Error::InvalidArgument(format!("control pieces need positive durations and {n} finite components")));
                }
                let total: f64 = pieces.iter().map(|p| p.duration).sum();
                if (total - self.horizon).abs() > 1e-9 * self.horizon {
                    return Err(Error::InvalidArgument(format!("piece durations sum to {total}, horizon is {}", self.horizon)));
                }
            }
            ControlData::Samples(samples) => {
                if samples.len() < 2 {
                    return Err(Error::InvalidArgument("sampled control needs at least two samples".into()));
                }
                if samples.iter().any(|s| s.u.len() != n || s.u.iter().any(|v| !v.is_finite())) {
                    return Err(Error::InvalidArgument(format!("control samples need {n} finite components")));
                }
                if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
                    return Err(Error::InvalidArgument("control sample times must be strictly increasing".into()));
                }
                if samples[0].t != 0.0 || samples[samples.len() - 1].t < self.horizon {
                    return Err(Error::InvalidArgument("control samples must cover [0, T]".into()));
                }
            }
        }
        Ok(())
    }

    /// Times in `[0, T]` where the control may be non-smooth, including both ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        match &self.data {
            ControlData::Piecewise(pieces) => {
                let mut t = 0.0;
                for p in &pieces[..pieces.len() - 1] {
                    t += p.duration;
                    out.push(t);
                }
            }
            ControlData::Samples(samples) => {
                out.extend(samples.iter().map(|s| s.t).filter(|&t| t > 0.0 && t < self.horizon));
            }
        }
        out.push(self.horizon);
        out
    }

    /// Value at `t` using the smooth branch active around `anchor`
    /// (normally the midpoint of the current integration interval).
    pub fn value_near(&self, anchor: f64, t: f64) -> DVector<f64> {
        match &self.data {
            ControlData::Piecewise(pieces) => {
                let mut acc = 0.0;
                for p in pieces {
                    acc += p.duration;
                    if anchor < acc {
                        return DVector::from_column_slice(&p.u);
                    }
                }
                DVector::from_column_slice(&pieces[pieces.len() - 1].u)
            }
            ControlData::Samples(samples) => {
                let idx = samples.partition_point(|s| s.t <= anchor).clamp(1, samples.len() - 1);
                let (a, b) = (&samples[idx - 1], &samples[idx]);
                let s = (t - a.t) / (b.t - a.t);
                DVector::from_iterator(a.u.len(), a.u.iter().zip(&b.u).map(|(x, y)| x + s * (y - x)))
            }
        }
    }

    /// Right-continuous value at `t`.
    pub fn value(&self, t: f64) -> DVector<f64> {
        self.value_near(t, t)
    }

    /// Control driving the time-reversed motion: `t ↦ −u(T − t)`.
    /// Exact for local-frame controls.
    pub fn reversed(&self) -> ControlSignal {
        let data = match &self.data {
            ControlData::Piecewise(pieces) => ControlData::Piecewise(
                pieces.iter().rev().map(|p| ControlPiece { duration: p.duration, u: p.u.iter().map(|v| -v).collect() }).collect(),
            ),
            ControlData::Samples(samples) => {
                let mut out: Vec<ControlSample> = samples
                    .iter()
                    .rev()
                    .filter(|s| s.t <= self.horizon)
                    .map(|s| ControlSample { t: self.horizon - s.t, u: self.value(s.t).iter().map(|v| -v).collect() })
                    .collect();
                if out[0].t > 0.0 {
                    out.insert(0, ControlSample { t: 0.0, u: self.value(self.horizon).iter().map(|v| -v).collect() });
                }
                if out[out.len() - 1].t < self.horizon {
                    out.push(ControlSample { t: self.horizon, u: self.value(0.0).iter().map(|v| -v).collect() });
                }
                ControlData::Samples(out)
            }
        };
        ControlSignal { data, horizon: self.horizon, frame: self.frame }
    }

    /// Applies a fixed linear map to every control value.
    pub fn mapped(&self, m: &DMatrix<f64>) -> ControlSignal {
        let map = |u: &[f64]| -> Vec<f64> { (m * DVector::from_column_slice(u)).iter().copied().collect() };
        let data = match &self.data {
            ControlData::Piecewise(p) => ControlData::Piecewise(p.iter().map(|p| ControlPiece { duration: p.duration, u: map(&p.u) }).collect()),
            ControlData::Samples(s) => ControlData::Samples(s.iter().map(|s| ControlSample { t: s.t, u: map(&s.u) }).collect()),
        };
        ControlSignal { data, horizon: self.horizon, frame: self.frame }
    }
}
