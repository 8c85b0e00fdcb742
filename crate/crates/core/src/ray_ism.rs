//! Detection-based reference inverse sensor model ("Ray-ISM").
//!
//! Each radar detection contributes an inverse detection model: the ideal
//! radial model (free before the target, occupied in a band of width `delta`
//! around it, unknown behind) integrated against Gaussian range noise in
//! closed form, then blended toward 0.5 by a unit-peak Gaussian in the
//! azimuth offset. The scene model accumulates the detections' log-odds.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::evidential::{EvidentialState, ProbabilisticState};
use crate::grid::{logodds_update, prob_to_evidential, sigmoid, wrap_angle, Grid2D, GridSpec, Point, Pose2D};

/// One radar return in its sensor's frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Detection {
    /// Measured range in metres.
    pub range: f64,
    /// Measured azimuth in radians, counter-clockwise from the boresight.
    pub azimuth: f64,
    /// Ego-motion compensated velocity in m/s.
    pub radial_velocity: f64,
    pub sensor_id: u32,
}

impl Detection {
    pub fn validate(&self) -> Result<()> {
        if !(self.range.is_finite() && self.azimuth.is_finite() && self.radial_velocity.is_finite())
        {
            return Err(Error::Config("detection fields must be finite".into()));
        }
        if self.range < 0.0 {
            return Err(Error::Config(alloc::format!("negative detection range {}", self.range)));
        }
        Ok(())
    }

    /// Position of the detection in the sensor frame.
    pub fn position(&self) -> Point {
        let (s, c) = libm::sincos(self.azimuth);
        Point::new(self.range * c, self.range * s)
    }

    pub fn is_dynamic(&self, velocity_threshold: f64) -> bool {
        self.radial_velocity.abs() > velocity_threshold
    }
}

/// Independent Gaussian range and azimuth noise.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct RadarNoiseModel {
    pub sigma_r: f64,
    pub sigma_phi: f64,
}

impl Default for RadarNoiseModel {
    fn default() -> Self {
        Self { sigma_r: 0.15, sigma_phi: 1.5_f64.to_radians() }
    }
}

impl RadarNoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_r > 0.0 && self.sigma_phi > 0.0) {
            return Err(Error::Config("noise standard deviations must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct RayIsmConfig {
    /// Occupancy probability of the ideal model in front of the target.
    pub eps_free: f64,
    /// Occupancy probability inside the target band.
    pub p_max: f64,
    /// Thickness of the occupied band in metres.
    pub delta: f64,
    pub noise: RadarNoiseModel,
    /// IDM values are clamped to `[p_clamp, 1 - p_clamp]` before the logit.
    pub p_clamp: f64,
    /// Log-odds saturation.
    pub l_max: f64,
    /// Beam footprint half-width in standard deviations.
    pub footprint_sigmas: f64,
    /// Detections faster than this are dynamic and skipped.
    pub dynamic_velocity_threshold: f64,
}

impl Default for RayIsmConfig {
    fn default() -> Self {
        Self {
            eps_free: 0.05,
            p_max: 0.95,
            delta: 0.5,
            noise: RadarNoiseModel::default(),
            p_clamp: 0.01,
            l_max: 10.0,
            footprint_sigmas: 4.0,
            dynamic_velocity_threshold: 0.5,
        }
    }
}

impl RayIsmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.eps_free && self.eps_free < 0.5 && 0.5 < self.p_max && self.p_max < 1.0) {
            return Err(Error::Config("need 0 < eps_free < 0.5 < p_max < 1".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config("delta must be > 0".into()));
        }
        if !(self.p_clamp > 0.0 && self.p_clamp < 0.5) {
            return Err(Error::Config("p_clamp must lie in (0, 0.5)".into()));
        }
        if !(self.l_max > 0.0 && self.footprint_sigmas > 0.0) {
            return Err(Error::Config("l_max and footprint_sigmas must be > 0".into()));
        }
        if !(self.dynamic_velocity_threshold >= 0.0) {
            return Err(Error::Config("velocity threshold must be >= 0".into()));
        }
        self.noise.validate()
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * core::f64::consts::FRAC_1_SQRT_2)
}

/// Occupancy probability at range `r` on the beam of a detection at `r_meas`:
/// the ideal radial model integrated against `N(r_meas, sigma_r)`.
pub fn range_model(r: f64, r_meas: f64, cfg: &RayIsmConfig) -> f64 {
    let sigma = cfg.noise.sigma_r;
    let z = |x: f64| (x - r_meas) / sigma;
    let near = normal_cdf(z(r - 0.5 * cfg.delta));
    let far = normal_cdf(z(r + 0.5 * cfg.delta));
    cfg.eps_free * (1.0 - far) + cfg.p_max * (far - near) + 0.5 * near
}

/// Unit-peak Gaussian weight of the azimuth offset.
pub fn angular_kernel(phi: f64, phi_meas: f64, sigma_phi: f64) -> f64 {
    let d = wrap_angle(phi - phi_meas);
    libm::exp(-d * d / (2.0 * sigma_phi * sigma_phi))
}

/// Inverse detection model at sensor-frame polar coordinates `(r, phi)`:
/// `0.5 + (range_model - 0.5) * kernel`, written as a convex blend so the
/// on-beam value is exactly the range model and the far off-beam value is
/// exactly 0.5.
pub fn idm(r: f64, phi: f64, det: &Detection, cfg: &RayIsmConfig) -> f64 {
    let k = angular_kernel(phi, det.azimuth, cfg.noise.sigma_phi);
    k * range_model(r, det.range, cfg) + (1.0 - k) * 0.5
}

/// Adds one detection's IDM to a log-odds grid. Only cells inside the beam
/// footprint (range up to `r + k σ_r`, azimuth within `k σ_φ`) are touched.
pub fn rasterize_idm(det: &Detection, sensor_pose: &Pose2D, grid: &mut Grid2D<f64>, cfg: &RayIsmConfig) {
    let k = cfg.footprint_sigmas;
    let max_range = det.range + k * cfg.noise.sigma_r;
    let max_dphi = k * cfg.noise.sigma_phi;
    let spec = *grid.spec();
    let origin = *grid.origin();
    let p_lo = cfg.p_clamp;
    let p_hi = 1.0 - cfg.p_clamp;

    // Only cells within max_range of the sensor can be in the footprint.
    let sensor_local = origin.to_local(sensor_pose.position());
    let (c0, r0) = spec.local_to_index(sensor_local - Point::new(max_range, max_range));
    let (c1, r1) = spec.local_to_index(sensor_local + Point::new(max_range, max_range));
    let n = spec.side_cells as i64;
    let (c0, c1) = (c0.max(0), c1.min(n - 1));
    let (r0, r1) = (r0.max(0), r1.min(n - 1));
    if c0 > c1 || r0 > r1 {
        return;
    }
    for row in r0..=r1 {
        for col in c0..=c1 {
            let cell = crate::grid::Cell::new(row as usize, col as usize);
            let world = origin.to_parent(spec.cell_center(cell));
            let p = sensor_pose.to_local(world);
            let r = p.norm();
            if r > max_range {
                continue;
            }
            let phi = libm::atan2(p.y, p.x);
            if wrap_angle(phi - det.azimuth).abs() > max_dphi {
                continue;
            }
            let prob = idm(r, phi, det, cfg).clamp(p_lo, p_hi);
            let l = &mut grid[cell];
            // prob is clamped strictly inside (0, 1).
            *l = logodds_update(*l, prob, cfg.l_max).expect("clamped probability");
        }
    }
}

/// Log-odds grid to belief masses via the pignistic-style map.
pub fn logodds_to_evidential(grid: &Grid2D<f64>) -> Grid2D<EvidentialState> {
    grid.map(|l| {
        let p_o = sigmoid(*l);
        prob_to_evidential(&ProbabilisticState { p_f: 1.0 - p_o, p_o })
    })
}

/// Accumulated log-odds of all static detections. `sensor_poses[i]` is the
/// world pose of the sensor with id `i`; detections naming an unknown sensor
/// are rejected.
pub fn accumulate_logodds(
    dets: &[Detection],
    sensor_poses: &[Pose2D],
    spec: GridSpec,
    ego: Pose2D,
    cfg: &RayIsmConfig,
) -> Result<Grid2D<f64>> {
    cfg.validate()?;
    let mut grid = Grid2D::filled(spec, ego, 0.0);
    // Floating point sums depend on order; a canonical order makes the
    // result independent of how the detections were listed.
    let mut sorted: Vec<&Detection> = dets.iter().collect();
    sorted.sort_by(|a, b| {
        (a.sensor_id, a.range.to_bits(), a.azimuth.to_bits(), a.radial_velocity.to_bits())
            .cmp(&(b.sensor_id, b.range.to_bits(), b.azimuth.to_bits(), b.radial_velocity.to_bits()))
    });
    for det in sorted {
        det.validate()?;
        if det.is_dynamic(cfg.dynamic_velocity_threshold) {
            continue;
        }
        let pose = sensor_poses.get(det.sensor_id as usize).ok_or_else(|| {
            Error::Config(alloc::format!("detection names unknown sensor {}", det.sensor_id))
        })?;
        rasterize_idm(det, pose, &mut grid, cfg);
    }
    Ok(grid)
}

/// Ray-ISM for one frame: accumulate static detections, then map every cell
/// to belief masses.
pub fn ray_ism_scene(
    dets: &[Detection],
    sensor_poses: &[Pose2D],
    spec: GridSpec,
    ego: Pose2D,
    cfg: &RayIsmConfig,
) -> Result<Grid2D<EvidentialState>> {
    accumulate_logodds(dets, sensor_poses, spec, ego, cfg).map(|g| logodds_to_evidential(&g))
}

/// World poses of the sensors given their mounting poses on the vehicle.
pub fn sensor_world_poses(ego: &Pose2D, mounts: &[Pose2D]) -> Vec<Pose2D> {
    mounts.iter().map(|m| ego.compose(m)).collect()
}
