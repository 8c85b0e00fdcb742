use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::augment::D4;
use super::lidar::{lidar_ground_truth, LidarConfig, TargetPatch, VisibilityMask};
use super::radar::{simulate_radar, RadarConfig, RadarImage, SimDetection};
use super::scene::{generate_scene, Scene, SceneParams};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SimConfig {
    pub grid: GridSpec,
    pub scene: SceneParams,
    pub lidar: LidarConfig,
    pub radar: RadarConfig,
    /// Radar detections faster than this (m/s) are treated as dynamic.
    pub dynamic_velocity_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            scene: SceneParams::default(),
            lidar: LidarConfig::default(),
            radar: RadarConfig::default(),
            dynamic_velocity_threshold: 0.5,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.scene.validate()?;
        self.lidar.validate()?;
        self.radar.validate()?;
        if !(self.dynamic_velocity_threshold >= 0.0) {
            return Err(Error::Config("dynamic_velocity_threshold must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Everything generated for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub seed: u64,
    pub scene: Scene,
    pub radar: RadarImage,
    pub detections: Vec<SimDetection>,
    pub target: TargetPatch,
    pub mask: VisibilityMask,
}

impl Sample {
    /// Same transform applied to radar image, target and mask.
    pub fn augmented(&self, t: D4) -> Sample {
        Sample {
            radar: RadarImage(t.apply(&self.radar.0)),
            target: TargetPatch(t.apply(&self.target.0)),
            mask: VisibilityMask(t.apply(&self.mask.0)),
            ..self.clone()
        }
    }
}

/// Seed of sample `index` under `master` (SplitMix64 finaliser).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Generates the scene for `seed` and simulates both sensors on it.
pub fn generate_sample(seed: u64, cfg: &SimConfig) -> Result<Sample> {
    cfg.validate()?;
    let scene = generate_scene(&mut stream(seed, 0), seed, &cfg.scene)?;
    simulate_sample(scene, cfg)
}

/// Runs LiDAR ground truth and radar on an existing scene.
pub fn simulate_sample(scene: Scene, cfg: &SimConfig) -> Result<Sample> {
    let seed = scene.rng_seed;
    let (target, mask) = lidar_ground_truth(&scene, &cfg.grid, &cfg.lidar)?;
    let (radar, detections) =
        simulate_radar(&mut stream(seed, 1), &scene, cfg.grid, &cfg.radar, cfg.dynamic_velocity_threshold)?;
    Ok(Sample { seed, scene, radar, detections, target, mask })
}
