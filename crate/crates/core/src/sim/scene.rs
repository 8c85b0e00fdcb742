use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::geometry::Polygon;
use crate::error::{Error, Result};
use crate::grid::{Point, Pose2D};

/// A moving rigid shape; `shape` is its footprint at time zero.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DynamicObject {
    pub shape: Polygon,
    pub velocity: Point,
}

impl DynamicObject {
    pub fn at(&self, t: f64) -> Polygon {
        self.shape.translated(self.velocity * t)
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

/// Ego pose at a capture time relative to the current frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimedPose {
    pub t: f64,
    pub pose: Pose2D,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scene {
    pub static_shapes: Vec<Polygon>,
    pub dynamic_objects: Vec<DynamicObject>,
    /// Ego pose of the current frame (time zero).
    pub ego: Pose2D,
    /// Poses along the drive used to accumulate the ground-truth map; always
    /// contains the current frame.
    pub map_poses: Vec<TimedPose>,
    pub rng_seed: u64,
}

impl Scene {
    /// Static shapes plus dynamic objects placed at time `t`.
    pub fn shapes_at(&self, t: f64) -> (Vec<Polygon>, Vec<Polygon>) {
        (self.static_shapes.clone(), self.dynamic_objects.iter().map(|d| d.at(t)).collect())
    }

    /// The scene turned a quarter turn about the world origin.
    pub fn rot90(&self) -> Scene {
        let turn = |p: &Pose2D| {
            let q = p.position().rot90();
            Pose2D::new(q.x, q.y, p.heading + core::f64::consts::FRAC_PI_2)
        };
        Scene {
            static_shapes: self.static_shapes.iter().map(Polygon::rot90).collect(),
            dynamic_objects: self
                .dynamic_objects
                .iter()
                .map(|d| DynamicObject { shape: d.shape.rot90(), velocity: d.velocity.rot90() })
                .collect(),
            ego: turn(&self.ego),
            map_poses: self.map_poses.iter().map(|p| TimedPose { t: p.t, pose: turn(&p.pose) }).collect(),
            rng_seed: self.rng_seed,
        }
    }
}

/// Street layouts the generator draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Layout {
    /// Straight road between building fronts.
    Corridor,
    /// Straight road lined with parked cars.
    ParkedRows,
    /// Main road with a side street branching off.
    TIntersection,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SceneParams {
    pub layouts: Vec<Layout>,
    /// Upper bound on static shapes; zero (with no dynamic objects) gives an
    /// empty scene.
    pub max_static_shapes: usize,
    pub max_dynamic_objects: usize,
    /// Half side of the area of interest around the ego, metres.
    pub half_extent: f64,
    /// Extra length of street generated beyond the area of interest.
    pub margin: f64,
    pub road_half_width: (f64, f64),
    pub sidewalk: (f64, f64),
    pub building_depth: (f64, f64),
    pub parked_probability: f64,
    /// Moving car speeds, m/s.
    pub car_speed: (f64, f64),
    /// Pedestrian speeds, m/s.
    pub pedestrian_speed: (f64, f64),
    /// Frames before and after the current one used for map accumulation.
    pub map_frames: usize,
    /// Time between accumulated frames, seconds.
    pub frame_interval: f64,
    pub ego_speed: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            layouts: alloc::vec![Layout::Corridor, Layout::ParkedRows, Layout::TIntersection],
            max_static_shapes: 64,
            max_dynamic_objects: 3,
            half_extent: 8.0,
            margin: 10.0,
            road_half_width: (3.0, 4.5),
            sidewalk: (1.0, 2.5),
            building_depth: (1.0, 2.5),
            parked_probability: 0.6,
            car_speed: (3.0, 9.0),
            pedestrian_speed: (0.8, 1.6),
            map_frames: 3,
            frame_interval: 0.4,
            ego_speed: 5.0,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("road_half_width", self.road_half_width),
            ("sidewalk", self.sidewalk),
            ("building_depth", self.building_depth),
            ("car_speed", self.car_speed),
            ("pedestrian_speed", self.pedestrian_speed),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::Config(alloc::format!("{name} must be an ordered nonnegative range")));
            }
        }
        if !(self.road_half_width.0 >= 2.0) {
            return Err(Error::Config("road_half_width must be at least 2 m".into()));
        }
        if !(0.0..=1.0).contains(&self.parked_probability) {
            return Err(Error::Config("parked_probability must lie in [0, 1]".into()));
        }
        if !(self.half_extent > 0.0 && self.margin >= 0.0 && self.frame_interval >= 0.0 && self.ego_speed >= 0.0) {
            return Err(Error::Config("extents, intervals and speeds must be nonnegative".into()));
        }
        if self.layouts.is_empty() && self.max_static_shapes > 0 {
            return Err(Error::Config("at least one layout is required".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

const CAR_LENGTH: f64 = 4.4;
const CAR_WIDTH: f64 = 1.8;
/// Lateral half-width kept free of parked cars around the ego's path.
const EGO_CLEARANCE: f64 = 1.2;

/// Builds a deterministic street scene from `seed`. The road runs along the
/// world x axis; the ego drives along it at the origin.
pub fn generate_scene(rng: &mut ChaCha8Rng, seed: u64, params: &SceneParams) -> Result<Scene> {
    params.validate()?;
    let map_poses = (0..=2 * params.map_frames)
        .map(|i| {
            let t = (i as f64 - params.map_frames as f64) * params.frame_interval;
            TimedPose { t, pose: Pose2D::new(params.ego_speed * t, 0.0, 0.0) }
        })
        .collect();
    let mut scene = Scene {
        static_shapes: Vec::new(),
        dynamic_objects: Vec::new(),
        ego: Pose2D::default(),
        map_poses,
        rng_seed: seed,
    };
    if params.max_static_shapes == 0 && params.max_dynamic_objects == 0 {
        return Ok(scene);
    }

    let layout = if params.layouts.is_empty() {
        Layout::Corridor
    } else {
        params.layouts[rng.random_range(0..params.layouts.len())]
    };
    let half_width = uniform(rng, params.road_half_width);
    // Ego stays in a lane at least 1.5 m from the kerb.
    let offset_limit = (half_width - 1.5).max(0.0);
    let road_y = uniform(rng, (-offset_limit, offset_limit));
    let x_lo = -params.half_extent - params.margin;
    let x_hi = params.half_extent + params.margin;

    // Side street for T-intersections: centre x, half-width and side.
    let side_street = (layout == Layout::TIntersection).then(|| {
        let xs = uniform(rng, (-params.half_extent * 0.5, params.half_extent * 0.5));
        let ws = uniform(rng, (2.5, 3.5));
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        (xs, ws, side)
    });

    let mut shapes = Vec::new();
    for side in [1.0f64, -1.0] {
        let kerb = road_y + side * half_width;
        let walk = uniform(rng, params.sidewalk);
        let facade = kerb + side * walk;
        let blocked = |x0: f64, x1: f64| match side_street {
            Some((xs, ws, s)) if s == side => x1 > xs - ws - walk && x0 < xs + ws + walk,
            _ => false,
        };

        // Building fronts with gaps.
        let mut x = x_lo + uniform(rng, (0.0, 3.0));
        while x < x_hi {
            let len = uniform(rng, (4.0, 12.0));
            let depth = uniform(rng, params.building_depth);
            let x1 = (x + len).min(x_hi);
            let keep = x1 - x > 1.0 && !blocked(x, x1) && (layout != Layout::ParkedRows || rng.random_bool(0.5));
            if keep {
                shapes.push(Polygon::rect(x, facade, x1, facade + side * depth)?);
            }
            x = x1 + uniform(rng, (0.5, 3.0));
        }

        // Parked cars along the kerb.
        let parked_p = match layout {
            Layout::ParkedRows => params.parked_probability.max(0.8),
            _ => params.parked_probability * 0.5,
        };
        let lane = kerb - side * (0.2 + CAR_WIDTH / 2.0);
        let mut x = x_lo + uniform(rng, (0.0, 2.0));
        while x + CAR_LENGTH < x_hi {
            if rng.random_bool(parked_p) && !blocked(x, x + CAR_LENGTH) {
                // Keep the ego's own path clear.
                if lane.abs() - CAR_WIDTH / 2.0 > EGO_CLEARANCE {
                    shapes.push(Polygon::rect(x, lane - CAR_WIDTH / 2.0, x + CAR_LENGTH, lane + CAR_WIDTH / 2.0)?);
                }
            }
            x += CAR_LENGTH + uniform(rng, (0.6, 2.5));
        }
    }

    if let Some((xs, ws, side)) = side_street {
        let kerb = road_y + side * half_width;
        let walk = uniform(rng, params.sidewalk);
        let thickness = uniform(rng, params.building_depth).max(1.0);
        let far = params.half_extent + params.margin;
        // Corner buildings wrap around both sides of the side street.
        let corner_y = kerb + side * walk;
        let left = Point::new(xs - ws - walk, corner_y);
        let right = Point::new(xs + ws + walk, corner_y);
        shapes.push(Polygon::l_shape(left, (left.x - x_lo).min(10.0), far, thickness, -1.0, side)?);
        shapes.push(Polygon::l_shape(right, (x_hi - right.x).min(10.0), far, thickness, 1.0, side)?);
    }

    shapes.truncate(params.max_static_shapes);
    scene.static_shapes = shapes;

    let n_dynamic = if params.max_dynamic_objects == 0 { 0 } else { rng.random_range(0..=params.max_dynamic_objects) };
    for _ in 0..n_dynamic {
        let obj = if rng.random_bool(0.75) {
            // Car in one of the two lanes, driving with or against the ego.
            let mut dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let lane = road_y - dir * half_width * 0.5;
            let mut speed = uniform(rng, params.car_speed);
            let mut x0 = uniform(rng, (-params.half_extent, params.half_extent));
            if lane.abs() - CAR_WIDTH / 2.0 <= EGO_CLEARANCE {
                // Sharing the ego's lane: lead or follow at the ego's speed.
                dir = 1.0;
                speed = params.ego_speed;
                let gap = uniform(rng, (3.0, params.half_extent.max(3.0)));
                x0 = if rng.random_bool(0.5) { gap } else { -gap - CAR_LENGTH };
            }
            let shape = Polygon::rect(x0, lane - CAR_WIDTH / 2.0, x0 + CAR_LENGTH, lane + CAR_WIDTH / 2.0)?;
            DynamicObject { shape, velocity: Point::new(dir * speed, 0.0) }
        } else {
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let y = road_y + side * (half_width + 0.5);
            let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let speed = uniform(rng, params.pedestrian_speed);
            let x0 = uniform(rng, (-params.half_extent, params.half_extent));
            let shape = Polygon::rect(x0 - 0.3, y - 0.3, x0 + 0.3, y + 0.3)?;
            DynamicObject { shape, velocity: Point::new(dir * speed, 0.0) }
        };
        scene.dynamic_objects.push(obj);
    }
    Ok(scene)
}

/// Fraction of `side × side` cells (of size `cell`) around the origin whose
/// centre lies inside a static shape.
pub fn occupied_fraction(scene: &Scene, side: usize, cell: f64) -> f64 {
    let h = side as f64 / 2.0;
    let mut hits = 0usize;
    for row in 0..side {
        for col in 0..side {
            let p = Point::new((col as f64 - h + 0.5) * cell, (row as f64 - h + 0.5) * cell);
            if scene.static_shapes.iter().any(|s| s.contains(p)) {
                hits += 1;
            }
        }
    }
    hits as f64 / (side * side) as f64
}
