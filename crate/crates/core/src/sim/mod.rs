//! Synthetic street scenes with an ideal LiDAR for ground truth and a
//! sparse noisy radar as network input.

pub mod augment;
pub mod geometry;
pub mod lidar;
pub mod radar;
pub mod sample;
pub mod scene;

pub use augment::D4;
pub use geometry::Polygon;
pub use lidar::{lidar_ground_truth, LidarConfig, TargetClass, TargetPatch, Visibility, VisibilityMask};
pub use radar::{simulate_radar, RadarConfig, RadarImage};
pub use sample::{derive_seed, generate_sample, Sample, SimConfig};
pub use scene::{generate_scene, Scene, SceneParams};
