//! Run configuration: one JSON document with a section per stage.

use std::fs;
use std::path::Path;

use radar_ism_core::diffnet::{Architecture, TrainConfig};
use radar_ism_core::eval::ScoreConfig;
use radar_ism_core::ray_ism::RayIsmConfig;
use radar_ism_core::sim::SimConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// File name of the effective configuration written into output directories.
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    /// Scenes generated by `gen`.
    pub scenes: usize,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    pub threads: usize,
    /// Write an intermediate checkpoint every this many epochs (0 = never).
    pub checkpoint_every: usize,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self { scenes: 500, split: [0.8, 0.1, 0.1], threads: 1, checkpoint_every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed for scene generation and inference sampling.
    pub seed: u64,
    pub sim: SimConfig,
    pub ray_ism: RayIsmConfig,
    pub net: Architecture,
    pub train: TrainConfig,
    pub eval: ScoreConfig,
    pub io: IoConfig,
}

impl RunConfig {
    /// Defaults, overlaid by an optional JSON file, then by `key.path=value`
    /// overrides in order.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(Error::io(p))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        for s in sets {
            cfg.apply_set(s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key.path=value` override. The value is read as JSON and
    /// falls back to a plain string.
    pub fn apply_set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut doc = serde_json::to_value(&*self).expect("config serializes");
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = match slot {
                Value::Object(map) => map.get_mut(part),
                Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
                _ => None,
            }
            .ok_or_else(|| Error::Config(format!("unknown configuration key `{key}`")))?;
        }
        *slot = value;
        *self = serde_json::from_value(doc).map_err(|e| Error::Config(format!("{key}: {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.ray_ism.validate()?;
        self.net.validate()?;
        self.train.validate()?;
        let s = self.io.split;
        if s.iter().any(|f| f.is_nan() || *f < 0.0) || (s.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions {s:?} must be nonnegative and sum to 1")));
        }
        if self.io.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.eval.conflict_threshold) || !(0.0..=1.0).contains(&self.eval.unknown_guard) {
            return Err(Error::Config("score thresholds must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Writes the configuration into `dir` as [`CONFIG_FILE`].
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, self.to_json()).map_err(Error::io(&path))
    }
}
