//! Ego-centred square grids: coordinate transforms, ray traversal, log-odds
//! and Dempster-Shafer accumulation, and pose-aligned patch extraction.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Index, IndexMut};

use num_traits::Float;

use crate::error::{Error, Result};
use crate::evidential::{EvidentialState, ProbabilisticState};

/// A point in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    /// Exact quarter turn counter-clockwise about the origin.
    pub fn rot90(self) -> Self {
        Self { x: -self.y, y: self.x }
    }
}

impl core::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl core::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl core::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = libm::remainder(a, 2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Position and heading in a parent frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading: wrap_angle(heading) }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// Maps a point from this pose's frame into the parent frame.
    pub fn to_parent(&self, local: Point) -> Point {
        let (s, c) = libm::sincos(self.heading);
        Point::new(self.x + c * local.x - s * local.y, self.y + s * local.x + c * local.y)
    }

    /// Maps a parent-frame point into this pose's frame.
    pub fn to_local(&self, p: Point) -> Point {
        let (s, c) = libm::sincos(self.heading);
        let d = p - self.position();
        Point::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    /// `self ∘ child`: the pose of `child` (given in this frame) in the parent.
    pub fn compose(&self, child: &Pose2D) -> Pose2D {
        let p = self.to_parent(child.position());
        Pose2D::new(p.x, p.y, self.heading + child.heading)
    }
}

/// Grid geometry: `side_cells × side_cells` square cells of `cell_size` metres
/// with the grid origin at the centre.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct GridSpec {
    pub side_cells: usize,
    pub cell_size: f64,
}

impl GridSpec {
    pub fn new(side_cells: usize, cell_size: f64) -> Result<Self> {
        let spec = Self { side_cells, cell_size };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.side_cells < 8 {
            return Err(Error::Config(alloc::format!(
                "grid needs at least 8 cells per side, got {}",
                self.side_cells
            )));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::Config(alloc::format!("cell size must be > 0, got {}", self.cell_size)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.side_cells * self.side_cells
    }

    pub fn is_empty(&self) -> bool {
        self.side_cells == 0
    }

    /// Metric side length.
    pub fn extent(&self) -> f64 {
        self.side_cells as f64 * self.cell_size
    }

    fn half(&self) -> i64 {
        (self.side_cells / 2) as i64
    }

    /// Signed cell coordinates `(col, row)` of a grid-frame point; no bounds check.
    pub fn local_to_index(&self, p: Point) -> (i64, i64) {
        let col = Float::floor(p.x / self.cell_size) as i64 + self.half();
        let row = Float::floor(p.y / self.cell_size) as i64 + self.half();
        (col, row)
    }

    pub fn cell_at(&self, col: i64, row: i64) -> Option<Cell> {
        let n = self.side_cells as i64;
        if (0..n).contains(&col) && (0..n).contains(&row) {
            Some(Cell { row: row as usize, col: col as usize })
        } else {
            None
        }
    }

    /// Cell containing a grid-frame point, `None` when outside.
    pub fn local_to_cell(&self, p: Point) -> Option<Cell> {
        let (col, row) = self.local_to_index(p);
        self.cell_at(col, row)
    }

    /// Grid-frame centre of a cell.
    pub fn cell_center(&self, cell: Cell) -> Point {
        let h = self.half() as f64;
        Point::new(
            (cell.col as f64 - h + 0.5) * self.cell_size,
            (cell.row as f64 - h + 0.5) * self.cell_size,
        )
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> {
        let n = self.side_cells;
        (0..n).flat_map(move |row| (0..n).map(move |col| Cell { row, col }))
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { side_cells: 32, cell_size: 0.5 }
    }
}

/// Row/column index. Columns run along the grid's local x axis, rows along y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// World point to the cell of a grid centred on `ego` and aligned with its
/// heading. Points on a cell boundary fall into the higher cell (floor).
pub fn world_to_cell(spec: &GridSpec, point: Point, ego: &Pose2D) -> Option<Cell> {
    spec.local_to_cell(ego.to_local(point))
}

/// Row-major field of `T` over a grid placed at `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D<T> {
    spec: GridSpec,
    origin: Pose2D,
    cells: Vec<T>,
}

impl<T: Clone> Grid2D<T> {
    pub fn filled(spec: GridSpec, origin: Pose2D, value: T) -> Self {
        Self { spec, origin, cells: alloc::vec![value; spec.len()] }
    }
}

impl<T> Grid2D<T> {
    pub fn from_vec(spec: GridSpec, origin: Pose2D, cells: Vec<T>) -> Result<Self> {
        if cells.len() != spec.len() {
            return Err(Error::Shape(alloc::format!(
                "grid of side {} needs {} cells, got {}",
                spec.side_cells,
                spec.len(),
                cells.len()
            )));
        }
        Ok(Self { spec, origin, cells })
    }

    pub fn from_fn(spec: GridSpec, origin: Pose2D, mut f: impl FnMut(Cell) -> T) -> Self {
        let cells = spec.cells().map(&mut f).collect();
        Self { spec, origin, cells }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn origin(&self) -> &Pose2D {
        &self.origin
    }

    pub fn side(&self) -> usize {
        self.spec.side_cells
    }

    pub fn cells(&self) -> &[T] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [T] {
        &mut self.cells
    }

    pub fn into_cells(self) -> Vec<T> {
        self.cells
    }

    pub fn get(&self, cell: Cell) -> Option<&T> {
        if cell.row < self.side() && cell.col < self.side() {
            self.cells.get(cell.row * self.side() + cell.col)
        } else {
            None
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cell, &T)> {
        self.spec.cells().zip(self.cells.iter())
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid2D<U> {
        Grid2D { spec: self.spec, origin: self.origin, cells: self.cells.iter().map(f).collect() }
    }

    /// Cell at a world point, if inside.
    pub fn at_world(&self, p: Point) -> Option<&T> {
        world_to_cell(&self.spec, p, &self.origin).map(|c| &self[c])
    }

    /// World coordinates of a cell centre.
    pub fn cell_center_world(&self, cell: Cell) -> Point {
        self.origin.to_parent(self.spec.cell_center(cell))
    }
}

impl<T> Index<Cell> for Grid2D<T> {
    type Output = T;
    fn index(&self, c: Cell) -> &T {
        assert!(c.row < self.side() && c.col < self.side(), "cell {c:?} out of bounds");
        &self.cells[c.row * self.spec.side_cells + c.col]
    }
}

impl<T> IndexMut<Cell> for Grid2D<T> {
    fn index_mut(&mut self, c: Cell) -> &mut T {
        assert!(c.row < self.side() && c.col < self.side(), "cell {c:?} out of bounds");
        let side = self.spec.side_cells;
        &mut self.cells[c.row * side + c.col]
    }
}

/// Supercover traversal of the segment between two cell centres. Every cell
/// the segment touches is visited once, in order from `from` to `to`; where the
/// segment passes exactly through a cell corner both side cells are included.
pub fn trace_ray(from: Cell, to: Cell) -> Vec<Cell> {
    let (x0, y0) = (from.col as i64, from.row as i64);
    let dx = to.col as i64 - x0;
    let dy = to.row as i64 - y0;
    let (nx, ny) = (dx.abs(), dy.abs());
    let (sx, sy) = (dx.signum(), dy.signum());

    let mut out = Vec::with_capacity((nx + ny + 1) as usize);
    let (mut x, mut y) = (x0, y0);
    out.push(from);
    // Crossing i of the x boundaries happens at parameter (2i+1)/(2nx); compare
    // against y crossings by cross-multiplication to stay exact.
    let (mut ix, mut iy) = (0i64, 0i64);
    let push = |out: &mut Vec<Cell>, x: i64, y: i64| out.push(Cell::new(y as usize, x as usize));
    while ix < nx || iy < ny {
        let cmp = if ix == nx {
            core::cmp::Ordering::Greater
        } else if iy == ny {
            core::cmp::Ordering::Less
        } else {
            ((2 * ix + 1) * ny).cmp(&((2 * iy + 1) * nx))
        };
        match cmp {
            core::cmp::Ordering::Less => {
                x += sx;
                ix += 1;
                push(&mut out, x, y);
            }
            core::cmp::Ordering::Greater => {
                y += sy;
                iy += 1;
                push(&mut out, x, y);
            }
            core::cmp::Ordering::Equal => {
                push(&mut out, x + sx, y);
                push(&mut out, x, y + sy);
                x += sx;
                y += sy;
                ix += 1;
                iy += 1;
                push(&mut out, x, y);
            }
        }
    }
    out
}

/// Walks the cells crossed by the grid-frame segment `a → b`, calling `visit`
/// for each in-bounds cell in order. Returns the cell containing `b` (if it is
/// inside the grid) so callers can treat the end cell differently.
pub fn walk_segment(spec: &GridSpec, a: Point, b: Point, mut visit: impl FnMut(Cell)) -> Option<Cell> {
    // Work in cell units relative to the grid centre; the centre offset is
    // added in integer arithmetic so mirrored segments walk mirrored cells.
    let cs = spec.cell_size;
    let h = spec.half();
    let (ua, va) = (a.x / cs, a.y / cs);
    let (ub, vb) = (b.x / cs, b.y / cs);
    let (du, dv) = (ub - ua, vb - va);

    // A start point on a boundary belongs to the cell the segment enters;
    // an end point on a boundary to the cell it arrives from.
    let start = |p: f64, d: f64| {
        let f = Float::floor(p);
        if p == f && d < 0.0 {
            f as i64 - 1
        } else {
            f as i64
        }
    };
    let end = |p: f64, d: f64| {
        let f = Float::floor(p);
        if p == f && d > 0.0 {
            f as i64 - 1
        } else {
            f as i64
        }
    };
    let (mut iu, mut iv) = (start(ua, du), start(va, dv));
    let (eu, ev) = (end(ub, du), end(vb, dv));

    let t_delta_u = if du != 0.0 { (1.0 / du).abs() } else { f64::INFINITY };
    let t_delta_v = if dv != 0.0 { (1.0 / dv).abs() } else { f64::INFINITY };
    let first_crossing = |p: f64, i: i64, d: f64| {
        if d > 0.0 {
            ((i + 1) as f64 - p) / d
        } else if d < 0.0 {
            (p - i as f64) / -d
        } else {
            f64::INFINITY
        }
    };
    let mut t_max_u = first_crossing(ua, iu, du);
    let mut t_max_v = first_crossing(va, iv, dv);
    let step_u: i64 = if du > 0.0 { 1 } else { -1 };
    let step_v: i64 = if dv > 0.0 { 1 } else { -1 };

    let max_steps = (eu - iu).abs() + (ev - iv).abs();
    for step in 0..=max_steps {
        if let Some(c) = spec.cell_at(iu + h, iv + h) {
            visit(c);
        }
        if (iu, iv) == (eu, ev) || step == max_steps {
            break;
        }
        if t_max_u < t_max_v {
            iu += step_u;
            t_max_u += t_delta_u;
        } else {
            iv += step_v;
            t_max_v += t_delta_v;
        }
    }
    spec.cell_at(eu + h, ev + h)
}

/// `ln(p / (1 - p))`.
pub fn logit(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

/// Inverse of [`logit`].
pub fn sigmoid(l: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-l))
}

/// Adds the log-odds of `p_o` to `cell` and clamps to `[-l_max, l_max]`.
pub fn logodds_update(cell: f64, p_o: f64, l_max: f64) -> Result<f64> {
    if !(p_o > 0.0 && p_o < 1.0) {
        return Err(Error::ProbabilityOutOfRange(p_o));
    }
    Ok((cell + logit(p_o)).clamp(-l_max, l_max))
}

/// Linear map from an occupancy probability to belief masses: `p_o = 0.5`
/// becomes full unknown, the extremes become certain free or occupied.
pub fn prob_to_evidential(p: &ProbabilisticState) -> EvidentialState {
    let b_o = (2.0 * p.p_o - 1.0).max(0.0);
    let b_f = (1.0 - 2.0 * p.p_o).max(0.0);
    EvidentialState { b_f, b_o, u: 1.0 - b_o - b_f }
}

/// Dempster's rule of combination on the frame {free, occupied}. The cross
/// terms are grouped so that swapping the arguments is bit-exact.
pub fn dempster_combine(m1: &EvidentialState, m2: &EvidentialState) -> Result<EvidentialState> {
    let conflict = m1.b_f * m2.b_o + m1.b_o * m2.b_f;
    let norm = 1.0 - conflict;
    if norm <= 0.0 {
        return Err(Error::TotalConflict);
    }
    Ok(EvidentialState {
        b_f: (m1.b_f * m2.b_f + (m1.b_f * m2.u + m1.u * m2.b_f)) / norm,
        b_o: (m1.b_o * m2.b_o + (m1.b_o * m2.u + m1.u * m2.b_o)) / norm,
        u: m1.u * m2.u / norm,
    })
}

/// Nearest-neighbour resampling of `map` into a grid of geometry `spec`
/// centred on and aligned with `ego`. Cells whose centre falls outside the
/// map take `outside`.
pub fn resample<T: Clone>(map: &Grid2D<T>, ego: Pose2D, spec: GridSpec, outside: T) -> Grid2D<T> {
    Grid2D::from_fn(spec, ego, |cell| {
        let world = ego.to_parent(spec.cell_center(cell));
        map.at_world(world).cloned().unwrap_or_else(|| outside.clone())
    })
}

/// Cuts an ego-centred, ego-aligned patch out of an evidential map; cells
/// beyond the map are full unknown.
pub fn extract_patch(map: &Grid2D<EvidentialState>, ego: Pose2D, spec: GridSpec) -> Grid2D<EvidentialState> {
    resample(map, ego, spec, EvidentialState::VACUOUS)
}
