//! Experiment configuration: schema, overrides and hashing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rollman_core::control::ControlFrame;
use rollman_core::{ControlSignal, GapConfig, Isometry, ManifoldSpec, RollingPair, RollingState, StateRecord};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::expect::Expect;
use crate::CliError;

/// RNG streams drawn from the experiment seed, kept apart so that adding a
/// random control does not move the random state.
const STATE_STREAM: u64 = 1;
const CONTROL_STREAM: u64 = 2;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateConfig {
    /// Domain centers with `A = I_{n,n̂}`.
    #[default]
    Standard,
    /// Drawn from the experiment seed.
    Random,
    Explicit {
        x: Vec<f64>,
        x_hat: Vec<f64>,
        #[serde(rename = "A_mat")]
        a_mat: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
enum RandomTag {
    #[serde(rename = "random")]
    Random,
}

/// Seeded piecewise-constant control.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomControl {
    #[serde(rename = "type")]
    tag: RandomTag,
    pub pieces: usize,
    #[serde(default = "unit")]
    pub amplitude: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub frame: ControlFrame,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControlConfig {
    Signal(ControlSignal),
    Random(RandomControl),
}

/// Isometries applied to `M` and `M̂`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsometryPair {
    #[serde(rename = "M", default = "identity")]
    pub m: Isometry,
    #[serde(rename = "M_hat", default = "identity")]
    pub m_hat: Isometry,
}

fn identity() -> Isometry {
    Isometry::Identity
}

/// One entry of a batch: an inline config or a path relative to the batch file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentEntry {
    pub name: String,
    pub command: String,
    pub config: Value,
    /// Runs the experiment once per seed, named `<name>-s<seed>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<ManifoldSpec>,
    #[serde(rename = "M_hat", default, skip_serializing_if = "Option::is_none")]
    pub m_hat: Option<ManifoldSpec>,
    #[serde(default)]
    pub state: StateConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Holonomy: a second sample count whose dimension must agree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recheck_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapConfig>,
    /// Holonomy base point; the domain center when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isometry: Option<IsometryPair>,
    /// Roll: also run the closed-form geodesic motion.
    #[serde(default)]
    pub geodesic: bool,
    /// LARC: number of random states for the bracket-vs-oracle gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket_states: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expect: BTreeMap<String, Expect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiments: Option<Vec<ExperimentEntry>>,
}

/// Command-line overrides, applied before validation and hashing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub depth: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, value: &mut Value) -> Result<(), CliError> {
        let obj = value.as_object_mut().ok_or_else(|| CliError::Config("config must be a JSON object".into()))?;
        if let Some(s) = self.seed {
            obj.insert("seed".into(), Value::from(s));
        }
        if let Some(s) = self.step {
            obj.insert("step".into(), Value::from(s));
        }
        if let Some(d) = self.depth {
            obj.insert("depth".into(), Value::from(d));
        }
        Ok(())
    }
}

/// A validated config with the hash of its canonical JSON.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub hash: String,
    /// Directory against which relative paths in the config resolve.
    pub base_dir: PathBuf,
}

pub fn read_value(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// `serde_json` maps are ordered by key, so compact output is canonical.
pub fn config_hash(value: &Value) -> String {
    let canonical = serde_json::to_string(value).expect("JSON values serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn load(mut value: Value, overrides: &Overrides, base_dir: PathBuf) -> Result<Loaded, CliError> {
    overrides.apply(&mut value)?;
    let hash = config_hash(&value);
    let config: ExperimentConfig = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Loaded { config, hash, base_dir })
}

impl ExperimentConfig {
    pub fn step(&self) -> Result<f64, CliError> {
        let step = self.step.unwrap_or(rollman_core::rolling::DEFAULT_STEP);
        if !(step > 0.0 && step.is_finite()) {
            return Err(CliError::Config("step must be positive".into()));
        }
        Ok(step)
    }

    pub fn seed(&self, why: &str) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config(format!("`seed` is required: {why}")))
    }

    pub fn manifold(&self) -> Result<ManifoldSpec, CliError> {
        self.m.clone().ok_or_else(|| CliError::Config("`M` is required".into()))
    }

    pub fn pair(&self) -> Result<RollingPair, CliError> {
        let m_hat = self.m_hat.clone().ok_or_else(|| CliError::Config("`M_hat` is required".into()))?;
        Ok(RollingPair::new(self.manifold()?, m_hat))
    }

    pub fn require<T: Copy>(&self, field: Option<T>, name: &str) -> Result<T, CliError> {
        field.ok_or_else(|| CliError::Config(format!("`{name}` is required for this command")))
    }

    fn rng(&self, stream: u64, why: &str) -> Result<ChaCha8Rng, CliError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed(why)?);
        rng.set_stream(stream);
        Ok(rng)
    }

    pub fn initial_state(&self, pair: &RollingPair) -> Result<RollingState, CliError> {
        match &self.state {
            StateConfig::Standard => Ok(pair.standard_state()),
            StateConfig::Random => Ok(pair.random_state(&mut self.rng(STATE_STREAM, "random state")?)),
            StateConfig::Explicit { x, x_hat, a_mat } => {
                let rec = StateRecord { x: x.clone(), x_hat: x_hat.clone(), a_mat: a_mat.clone(), n: x.len(), n_hat: x_hat.len() };
                pair.state_from_record(&rec).map_err(|e| CliError::Config(format!("state: {e}")))
            }
        }
    }

    pub fn control(&self, n: usize) -> Result<ControlSignal, CliError> {
        let signal = match self.control.as_ref().ok_or_else(|| CliError::Config("`control` is required".into()))? {
            ControlConfig::Signal(s) => s.clone(),
            ControlConfig::Random(r) => {
                if r.pieces == 0 {
                    return Err(CliError::Config("random control needs at least one piece".into()));
                }
                let mut rng = self.rng(CONTROL_STREAM, "random control")?;
                ControlSignal::random(&mut rng, n, r.horizon, r.pieces, r.amplitude).in_frame(r.frame)
            }
        };
        signal.validate(n).map_err(|e| CliError::Config(format!("control: {e}")))?;
        Ok(signal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sphere_plane() -> Value {
        json!({"M": {"kind": "sphere", "dim": 2}, "M_hat": {"kind": "euclidean", "dim": 2}})
    }

    #[test]
    fn overrides_change_the_hash() {
        let a = load(sphere_plane(), &Overrides::default(), PathBuf::new()).unwrap();
        let b = load(sphere_plane(), &Overrides { seed: Some(3), ..Default::default() }, PathBuf::new()).unwrap();
        assert_ne!(a.hash, b.hash);
        assert_eq!(b.config.seed, Some(3));
        assert_eq!(a.hash, load(sphere_plane(), &Overrides::default(), PathBuf::new()).unwrap().hash);
    }

    #[test]
    fn unknown_fields_are_schema_errors() {
        let mut v = sphere_plane();
        v["colour"] = json!("red");
        assert!(matches!(load(v, &Overrides::default(), PathBuf::new()), Err(CliError::Config(_))));
    }

    #[test]
    fn random_inputs_need_a_seed() {
        let mut v = sphere_plane();
        v["state"] = json!({"kind": "random"});
        v["control"] = json!({"type": "random", "pieces": 3, "T": 1.0});
        let cfg = load(v.clone(), &Overrides::default(), PathBuf::new()).unwrap().config;
        let pair = cfg.pair().unwrap();
        assert!(cfg.initial_state(&pair).is_err());
        assert!(cfg.control(2).is_err());
        v["seed"] = json!(4);
        let cfg = load(v, &Overrides::default(), PathBuf::new()).unwrap().config;
        assert_eq!(cfg.control(2).unwrap(), cfg.control(2).unwrap());
        assert_eq!(cfg.initial_state(&pair).unwrap(), cfg.initial_state(&pair).unwrap());
    }

    #[test]
    fn explicit_controls_parse() {
        let mut v = sphere_plane();
        v["control"] = json!({"type": "piecewise", "data": [{"duration": 1.0, "u": [1.0, 0.0]}], "T": 1.0, "frame": "parallel"});
        let cfg = load(v, &Overrides::default(), PathBuf::new()).unwrap().config;
        assert_eq!(cfg.control(2).unwrap().frame, ControlFrame::Parallel);
    }
}
