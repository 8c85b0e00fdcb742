use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::geometry::{nearest_hit, Polygon};
use super::scene::Scene;
use crate::error::{Error, Result};
use crate::grid::{wrap_angle, Grid2D, GridSpec, Point, Pose2D};
use crate::ray_ism::{Detection, RadarNoiseModel};

/// Where a simulated detection came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Static(usize),
    Dynamic(usize),
    Clutter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimDetection {
    pub detection: Detection,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct RadarConfig {
    /// Sensor mounting poses in the ego frame; the index is the sensor id.
    pub mounts: Vec<Pose2D>,
    /// Full opening angle, radians.
    pub fov: f64,
    pub max_range: f64,
    pub detection_probability: f64,
    /// Mean false alarms per frame over all sensors.
    pub clutter_rate: f64,
    pub max_detections_per_sensor: usize,
    /// Spacing of candidate reflection points along shape outlines, metres.
    pub point_spacing: f64,
    pub noise: RadarNoiseModel,
}

/// Four corner sensors facing diagonally outwards.
pub fn corner_mounts() -> Vec<Pose2D> {
    use core::f64::consts::FRAC_PI_4;
    alloc::vec![
        Pose2D::new(2.0, 0.8, FRAC_PI_4),
        Pose2D::new(-2.0, 0.8, 3.0 * FRAC_PI_4),
        Pose2D::new(-2.0, -0.8, -3.0 * FRAC_PI_4),
        Pose2D::new(2.0, -0.8, -FRAC_PI_4),
    ]
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            mounts: corner_mounts(),
            fov: 120f64.to_radians(),
            max_range: 10.0,
            detection_probability: 0.3,
            clutter_rate: 2.0,
            max_detections_per_sensor: 64,
            point_spacing: 0.25,
            noise: RadarNoiseModel::default(),
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.detection_probability) {
            return Err(Error::Config("detection_probability must lie in [0, 1]".into()));
        }
        if !(self.clutter_rate >= 0.0 && self.clutter_rate.is_finite()) {
            return Err(Error::Config("clutter_rate must be nonnegative".into()));
        }
        if !(self.fov > 0.0 && self.fov <= core::f64::consts::TAU) {
            return Err(Error::Config("fov must lie in (0, 2π]".into()));
        }
        if !(self.max_range > 0.0 && self.point_spacing > 0.0) {
            return Err(Error::Config("max_range and point_spacing must be positive".into()));
        }
        if !(self.noise.sigma_r >= 0.0 && self.noise.sigma_phi >= 0.0) {
            return Err(Error::Config("noise sigmas must be nonnegative".into()));
        }
        if self.mounts.is_empty() && self.clutter_rate > 0.0 {
            return Err(Error::Config("clutter needs at least one sensor".into()));
        }
        Ok(())
    }
}

/// Two-channel hit counts: `[static, dynamic]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarImage(pub Grid2D<[u32; 2]>);

impl RadarImage {
    pub fn grid(&self) -> &Grid2D<[u32; 2]> {
        &self.0
    }

    pub fn total(&self) -> [u64; 2] {
        self.0.cells().iter().fold([0, 0], |a, c| [a[0] + c[0] as u64, a[1] + c[1] as u64])
    }

    /// Channel planes as reals, row-major.
    pub fn planes(&self) -> [Vec<f64>; 2] {
        [
            self.0.cells().iter().map(|c| c[0] as f64).collect(),
            self.0.cells().iter().map(|c| c[1] as f64).collect(),
        ]
    }

    /// Bins detections (sensor-relative polar) into the grid. Detections
    /// with `|v_r|` above the threshold go to the dynamic channel.
    pub fn from_detections(spec: GridSpec, ego: Pose2D, mounts: &[Pose2D], dets: &[Detection], threshold: f64) -> Self {
        let mut g = Grid2D::filled(spec, ego, [0u32; 2]);
        for d in dets {
            let Some(m) = mounts.get(d.sensor_id as usize) else { continue };
            if let Some(c) = spec.local_to_cell(m.to_parent(d.position())) {
                g[c][usize::from(d.is_dynamic(threshold))] += 1;
            }
        }
        RadarImage(g)
    }
}

fn normal(sigma: f64) -> Normal<f64> {
    // Zero sigma is a valid degenerate Normal.
    Normal::new(0.0, sigma).unwrap_or_else(|_| Normal::new(0.0, 0.0).unwrap())
}

/// Draws false alarms for one frame, uniform over the area of each field of view.
pub fn sample_clutter(rng: &mut ChaCha8Rng, cfg: &RadarConfig) -> Vec<Detection> {
    if cfg.clutter_rate <= 0.0 || cfg.mounts.is_empty() {
        return Vec::new();
    }
    let n = Poisson::new(cfg.clutter_rate).map(|p| p.sample(rng) as usize).unwrap_or(0);
    (0..n)
        .map(|_| {
            let sensor = rng.random_range(0..cfg.mounts.len());
            let r = cfg.max_range * libm::sqrt(rng.random::<f64>());
            let phi = (rng.random::<f64>() - 0.5) * cfg.fov;
            Detection { range: r, azimuth: phi, radial_velocity: 0.0, sensor_id: sensor as u32 }
        })
        .collect()
}

/// Candidate reflection points along every edge, starting at a random phase.
fn outline_points(rng: &mut ChaCha8Rng, shape: &Polygon, spacing: f64) -> Vec<Point> {
    let mut out = Vec::new();
    for (a, b) in shape.edges() {
        let len = (b - a).norm();
        let mut s = rng.random::<f64>() * spacing;
        while s < len {
            out.push(a + (b - a) * (s / len));
            s += spacing;
        }
    }
    out
}

/// Simulates one radar frame at the ego pose of `scene`.
pub fn simulate_detections(rng: &mut ChaCha8Rng, scene: &Scene, cfg: &RadarConfig) -> Result<Vec<SimDetection>> {
    cfg.validate()?;
    let ego = scene.ego;
    let (statics, dynamics) = scene.shapes_at(0.0);
    let all: Vec<&Polygon> = statics.iter().chain(dynamics.iter()).collect();
    let n_static = statics.len();
    let nr = normal(cfg.noise.sigma_r);
    let np = normal(cfg.noise.sigma_phi);

    let mut per_sensor: Vec<Vec<SimDetection>> = (0..cfg.mounts.len()).map(|_| Vec::new()).collect();
    for (idx, shape) in all.iter().enumerate() {
        let points = outline_points(rng, shape, cfg.point_spacing);
        for (sid, mount) in cfg.mounts.iter().enumerate() {
            let sensor = ego.compose(mount);
            let origin = sensor.position();
            for &p in &points {
                let rel = sensor.to_local(p);
                let r = rel.norm();
                let phi = libm::atan2(rel.y, rel.x);
                if !(r > 0.0 && r <= cfg.max_range && phi.abs() <= cfg.fov / 2.0) {
                    continue;
                }
                let visible = match nearest_hit(all.iter().copied(), origin, p - origin) {
                    Some((t, _)) => t >= 1.0 - 1e-6,
                    None => true,
                };
                if !visible || !rng.random_bool(cfg.detection_probability) {
                    continue;
                }
                let (source, v_r) = if idx < n_static {
                    (Source::Static(idx), 0.0)
                } else {
                    let obj = &scene.dynamic_objects[idx - n_static];
                    let los = p - origin;
                    let radial = obj.velocity.x * los.x + obj.velocity.y * los.y;
                    // Ego-motion compensated: report the object's speed,
                    // signed by whether it approaches or recedes.
                    let sign = if radial < 0.0 { -1.0 } else { 1.0 };
                    (Source::Dynamic(idx - n_static), sign * obj.speed())
                };
                let range = (r + nr.sample(rng)).max(0.0);
                let azimuth = wrap_angle(phi + np.sample(rng));
                per_sensor[sid].push(SimDetection {
                    detection: Detection { range, azimuth, radial_velocity: v_r, sensor_id: sid as u32 },
                    source,
                });
            }
        }
    }
    for d in sample_clutter(rng, cfg) {
        per_sensor[d.sensor_id as usize].push(SimDetection { detection: d, source: Source::Clutter });
    }
    let mut out = Vec::new();
    for mut dets in per_sensor {
        if dets.len() > cfg.max_detections_per_sensor {
            dets.shuffle(rng);
            dets.truncate(cfg.max_detections_per_sensor);
        }
        out.extend(dets);
    }
    Ok(out)
}

/// Radar image and raw detections for the ego frame of `scene`.
pub fn simulate_radar(
    rng: &mut ChaCha8Rng,
    scene: &Scene,
    spec: GridSpec,
    cfg: &RadarConfig,
    velocity_threshold: f64,
) -> Result<(RadarImage, Vec<SimDetection>)> {
    let sim = simulate_detections(rng, scene, cfg)?;
    let raw: Vec<Detection> = sim.iter().map(|d| d.detection).collect();
    Ok((RadarImage::from_detections(spec, scene.ego, &cfg.mounts, &raw, velocity_threshold), sim))
}
