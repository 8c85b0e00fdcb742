use alloc::vec;
use alloc::vec::Vec;

use super::geometry::{nearest_hit, Polygon};
use super::scene::Scene;
use crate::error::{Error, Result};
use crate::evidential::EvidentialState;
use crate::grid::{walk_segment, Cell, Grid2D, GridSpec, Point, Pose2D};

/// Ground-truth class of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TargetClass {
    Free,
    Occupied,
    Conflict,
    #[default]
    Unknown,
}

impl TargetClass {
    pub const ALL: [TargetClass; 4] = [Self::Free, Self::Occupied, Self::Conflict, Self::Unknown];

    /// Target vector `(b_f, b_o, u)`.
    pub fn vector(self) -> [f64; 3] {
        match self {
            Self::Free => [1.0, 0.0, 0.0],
            Self::Occupied => [0.0, 1.0, 0.0],
            Self::Conflict => [0.5, 0.5, 0.0],
            Self::Unknown => [0.0, 0.0, 1.0],
        }
    }

    pub fn state(self) -> EvidentialState {
        match self {
            Self::Free => EvidentialState::FREE,
            Self::Occupied => EvidentialState::OCCUPIED,
            Self::Conflict => EvidentialState::CONFLICT,
            Self::Unknown => EvidentialState::VACUOUS,
        }
    }

    /// Exact inverse of [`TargetClass::vector`].
    pub fn from_vector(v: [f64; 3]) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.vector() == v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Visibility {
    Visible,
    #[default]
    Hidden,
}

/// Per-cell training target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPatch(pub Grid2D<TargetClass>);

impl TargetPatch {
    pub fn grid(&self) -> &Grid2D<TargetClass> {
        &self.0
    }

    /// Channel planes `b_f, b_o, u`, each row-major.
    pub fn planes(&self) -> [Vec<f64>; 3] {
        let mut out = [Vec::new(), Vec::new(), Vec::new()];
        for c in self.0.cells() {
            for (k, v) in c.vector().into_iter().enumerate() {
                out[k].push(v);
            }
        }
        out
    }

    pub fn count(&self, class: TargetClass) -> usize {
        self.0.cells().iter().filter(|&&c| c == class).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityMask(pub Grid2D<Visibility>);

impl VisibilityMask {
    pub fn grid(&self) -> &Grid2D<Visibility> {
        &self.0
    }
}

/// How moving objects enter the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DynamicTargets {
    /// Cells seen free in one frame and hit on a moving object in another
    /// become conflict; cells only ever hit on moving objects stay unknown.
    #[default]
    Conflict,
    /// Moving objects never contribute; only static hits and free space
    /// are accumulated.
    StaticsOnly,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct LidarConfig {
    pub rays: usize,
    pub max_range: f64,
    /// Accumulate all map poses of the scene instead of the current frame only.
    pub accumulate: bool,
    pub dynamic_targets: DynamicTargets,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self { rays: 720, max_range: 10.0, accumulate: true, dynamic_targets: DynamicTargets::Conflict }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rays == 0 {
            return Err(Error::Config("lidar rays must be positive".into()));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(Error::Config("lidar max_range must be positive".into()));
        }
        Ok(())
    }
}

/// What a single frame saw in a cell; later variants win.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum FrameLabel {
    #[default]
    None,
    Free,
    DynamicHit,
    StaticHit,
}

/// Ray end vectors of length `range`. For ray counts divisible by four the
/// set is closed under exact quarter turns.
pub fn ray_directions(n: usize, range: f64) -> Vec<Point> {
    let step = core::f64::consts::TAU / n as f64;
    if !n.is_multiple_of(4) {
        return (0..n)
            .map(|k| {
                let a = (k as f64 + 0.5) * step;
                Point::new(range * libm::cos(a), range * libm::sin(a))
            })
            .collect();
    }
    let q: Vec<Point> = (0..n / 4)
        .map(|k| {
            let a = (k as f64 + 0.5) * step;
            Point::new(range * libm::cos(a), range * libm::sin(a))
        })
        .collect();
    let mut out = q.clone();
    for turn in 1..4 {
        out.extend(q.iter().map(|p| (0..turn).fold(*p, |p, _| p.rot90())));
    }
    out
}

/// Casts one frame of rays from `origin` (grid-local metres) against
/// `statics` and `dynamics` and merges the labels into `labels`.
pub fn cast_frame(
    spec: &GridSpec,
    origin: Point,
    dirs: &[Point],
    statics: &[Polygon],
    dynamics: &[Polygon],
    labels: &mut [FrameLabel],
) {
    let side = spec.side_cells;
    let mut mark = |c: Cell, l: FrameLabel| {
        let i = c.row * side + c.col;
        if l > labels[i] {
            labels[i] = l;
        }
    };
    let mut path = Vec::new();
    for &d in dirs {
        let s_hit = nearest_hit(statics, origin, d);
        let d_hit = nearest_hit(dynamics, origin, d);
        let hit = match (s_hit, d_hit) {
            (Some((ts, _)), Some((td, _))) if td < ts => Some((td, FrameLabel::DynamicHit)),
            (Some((ts, _)), _) => Some((ts, FrameLabel::StaticHit)),
            (None, Some((td, _))) => Some((td, FrameLabel::DynamicHit)),
            (None, None) => None,
        };
        path.clear();
        match hit {
            Some((t, label)) if t <= 1.0 => {
                let end = walk_segment(spec, origin, origin + d * t, |c| path.push(c));
                for &c in &path {
                    if Some(c) != end {
                        mark(c, FrameLabel::Free);
                    }
                }
                if let Some(c) = end {
                    mark(c, label);
                }
            }
            _ => {
                walk_segment(spec, origin, origin + d, |c| path.push(c));
                for &c in &path {
                    mark(c, FrameLabel::Free);
                }
            }
        }
    }
}

fn to_local_polygon(p: &Polygon, ego: &Pose2D) -> Polygon {
    Polygon::new(p.vertices().iter().map(|v| ego.to_local(*v)).collect()).unwrap_or_else(|_| p.clone())
}

/// Per-frame labels of every configured pose, in the current ego frame.
/// The first entry is always the current frame.
pub fn frame_labels(scene: &Scene, spec: &GridSpec, cfg: &LidarConfig) -> Vec<Vec<FrameLabel>> {
    let ego = scene.ego;
    let base = ray_directions(cfg.rays, cfg.max_range);
    let statics: Vec<Polygon> = scene.static_shapes.iter().map(|s| to_local_polygon(s, &ego)).collect();
    let mut poses: Vec<(f64, Pose2D)> = vec![(0.0, ego)];
    if cfg.accumulate {
        poses.extend(scene.map_poses.iter().filter(|p| p.t != 0.0).map(|p| (p.t, p.pose)));
    }
    poses
        .iter()
        .map(|&(t, pose)| {
            let dynamics: Vec<Polygon> =
                scene.dynamic_objects.iter().map(|d| to_local_polygon(&d.at(t), &ego)).collect();
            let origin = ego.to_local(pose.position());
            let rel = pose.heading - ego.heading;
            let dirs: Vec<Point> = if rel == 0.0 {
                base.clone()
            } else {
                let (s, c) = libm::sincos(rel);
                base.iter().map(|p| Point::new(c * p.x - s * p.y, s * p.x + c * p.y)).collect()
            };
            let mut labels = vec![FrameLabel::None; spec.len()];
            cast_frame(spec, origin, &dirs, &statics, &dynamics, &mut labels);
            labels
        })
        .collect()
}

/// Ideal LiDAR ground truth around the ego: training targets and the
/// visibility of each cell in the current frame.
pub fn lidar_ground_truth(scene: &Scene, spec: &GridSpec, cfg: &LidarConfig) -> Result<(TargetPatch, VisibilityMask)> {
    spec.validate()?;
    cfg.validate()?;
    let frames = frame_labels(scene, spec, cfg);
    let n = spec.len();
    let mut classes = Vec::with_capacity(n);
    let mut vis = Vec::with_capacity(n);
    for i in 0..n {
        let (mut free, mut stat, mut dyn_) = (false, false, false);
        for f in &frames {
            match f[i] {
                FrameLabel::Free => free = true,
                FrameLabel::StaticHit => stat = true,
                FrameLabel::DynamicHit => dyn_ = true,
                FrameLabel::None => {}
            }
        }
        let class = if stat {
            TargetClass::Occupied
        } else if dyn_ && free && cfg.dynamic_targets == DynamicTargets::Conflict {
            TargetClass::Conflict
        } else if free {
            TargetClass::Free
        } else {
            TargetClass::Unknown
        };
        classes.push(class);
        vis.push(match frames[0][i] {
            FrameLabel::Free | FrameLabel::StaticHit => Visibility::Visible,
            _ => Visibility::Hidden,
        });
    }
    Ok((
        TargetPatch(Grid2D::from_vec(*spec, scene.ego, classes)?),
        VisibilityMask(Grid2D::from_vec(*spec, scene.ego, vis)?),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scene::{DynamicObject, TimedPose};

    fn empty_scene() -> Scene {
        Scene {
            static_shapes: Vec::new(),
            dynamic_objects: Vec::new(),
            ego: Pose2D::default(),
            map_poses: vec![TimedPose { t: 0.0, pose: Pose2D::default() }],
            rng_seed: 0,
        }
    }

    fn single() -> LidarConfig {
        LidarConfig { accumulate: false, ..LidarConfig::default() }
    }

    #[test]
    fn target_vectors_round_trip() {
        for c in TargetClass::ALL {
            assert_eq!(TargetClass::from_vector(c.vector()), Some(c));
            assert_eq!(c.vector().iter().sum::<f64>(), 1.0);
            assert_eq!(c.state().as_array(), c.vector());
        }
    }

    #[test]
    fn quarter_turn_closed_rays() {
        let d = ray_directions(720, 10.0);
        assert_eq!(d.len(), 720);
        for (i, p) in d.iter().enumerate() {
            assert_eq!(d[(i + 180) % 720], p.rot90());
            assert!((p.norm() - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_scene_is_free_inside_range() {
        let spec = GridSpec::default();
        let (t, m) = lidar_ground_truth(&empty_scene(), &spec, &single()).unwrap();
        for (cell, &c) in t.grid().iter() {
            let p = spec.cell_center(cell);
            let r = p.norm();
            // Cells fully inside the range are free, cells fully beyond unknown.
            if r < 10.0 - 0.36 {
                assert_eq!(c, TargetClass::Free, "{cell:?}");
                assert_eq!(m.grid()[cell], Visibility::Visible);
            } else if r > 10.0 + 0.36 {
                assert_eq!(c, TargetClass::Unknown, "{cell:?}");
                assert_eq!(m.grid()[cell], Visibility::Hidden);
            }
        }
        assert_eq!(t.grid()[Cell::new(0, 0)], TargetClass::Unknown);
        assert_eq!(t.count(TargetClass::Occupied), 0);
    }

    #[test]
    fn wall_in_front() {
        let spec = GridSpec::default();
        let mut scene = empty_scene();
        let (x0, x1, yh) = (3.1, 3.3, 2.0);
        scene.static_shapes.push(Polygon::rect(x0, -yh, x1, yh).unwrap());
        let (t, m) = lidar_ground_truth(&scene, &spec, &single()).unwrap();
        let wedge = yh / x0;
        for (cell, &c) in t.grid().iter() {
            let p = spec.cell_center(cell);
            let slope = p.y / p.x;
            let lo = spec.cell_center(cell) - Point::new(0.25, 0.25);
            let hi = spec.cell_center(cell) + Point::new(0.25, 0.25);
            if lo.x <= x0 && x0 < hi.x && lo.y >= -yh && hi.y <= yh {
                // The front face runs through this column.
                assert_eq!(c, TargetClass::Occupied, "{cell:?}");
                assert_eq!(m.grid()[cell], Visibility::Visible);
            } else if hi.x < x0 && p.x > 0.3 && slope.abs() < wedge - 0.15 {
                assert_eq!(c, TargetClass::Free, "{cell:?}");
            } else if lo.x > x1 && slope.abs() < yh / (x1 + 0.5) - 0.15 {
                assert_eq!(c, TargetClass::Unknown, "{cell:?}");
                assert_eq!(m.grid()[cell], Visibility::Hidden);
            }
        }
        assert_eq!(t.count(TargetClass::Occupied), 8);
    }

    #[test]
    fn single_frame_hidden_iff_unknown() {
        let spec = GridSpec::default();
        let mut scene = empty_scene();
        scene.static_shapes.push(Polygon::rect(-4.0, 2.0, 5.0, 3.0).unwrap());
        scene.dynamic_objects.push(DynamicObject {
            shape: Polygon::rect(2.0, -2.0, 4.4, -0.2).unwrap(),
            velocity: Point::new(4.0, 0.0),
        });
        let (t, m) = lidar_ground_truth(&scene, &spec, &single()).unwrap();
        for (cell, &c) in t.grid().iter() {
            assert_eq!(c == TargetClass::Unknown, m.grid()[cell] == Visibility::Hidden);
            assert_ne!(c, TargetClass::Conflict);
        }
    }

    #[test]
    fn accumulation_creates_conflict_behind_moving_object() {
        let spec = GridSpec::default();
        let mut scene = empty_scene();
        scene.dynamic_objects.push(DynamicObject {
            shape: Polygon::rect(2.0, -3.0, 4.4, -1.2).unwrap(),
            velocity: Point::new(6.0, 0.0),
        });
        scene.map_poses = (-2..=2).map(|k| TimedPose { t: k as f64 * 0.4, pose: Pose2D::new(k as f64, 0.0, 0.0) }).collect();
        let (t, _) = lidar_ground_truth(&scene, &spec, &LidarConfig::default()).unwrap();
        assert!(t.count(TargetClass::Conflict) > 0);
        assert_eq!(t.count(TargetClass::Occupied), 0);

        let statics = LidarConfig { dynamic_targets: DynamicTargets::StaticsOnly, ..LidarConfig::default() };
        let (t, _) = lidar_ground_truth(&scene, &spec, &statics).unwrap();
        assert_eq!(t.count(TargetClass::Conflict), 0);
    }
}
