use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Point;

#[inline]
fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Simple closed polygon in world metres.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let p = Self { vertices };
        if p.vertices.len() < 3 || !(p.area() > 0.0) {
            return Err(Error::Config("polygon needs at least 3 vertices and positive area".into()));
        }
        Ok(p)
    }

    /// Axis-aligned rectangle spanning `[x0, x1] × [y0, y1]` (corners in any order).
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let (xa, xb) = (x0.min(x1), x0.max(x1));
        let (ya, yb) = (y0.min(y1), y0.max(y1));
        Self::new(alloc::vec![
            Point::new(xa, ya),
            Point::new(xb, ya),
            Point::new(xb, yb),
            Point::new(xa, yb),
        ])
    }

    /// Axis-aligned L: the union of a horizontal and a vertical bar of width
    /// `thickness` meeting at `corner`. `sx`, `sy` (±1) choose the directions
    /// in which the arms of length `len_x`, `len_y` extend.
    pub fn l_shape(corner: Point, len_x: f64, len_y: f64, thickness: f64, sx: f64, sy: f64) -> Result<Self> {
        let (c, t) = (corner, thickness);
        let pts = [
            (0.0, 0.0),
            (len_x, 0.0),
            (len_x, t),
            (t, t),
            (t, len_y),
            (0.0, len_y),
        ];
        let mut v: Vec<Point> = pts.iter().map(|(x, y)| Point::new(c.x + sx * x, c.y + sy * y)).collect();
        if sx * sy < 0.0 {
            v.reverse();
        }
        Self::new(v)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Shoelace area (absolute value).
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let twice: f64 = (0..n).map(|i| cross(self.vertices[i], self.vertices[(i + 1) % n])).sum();
        (0.5 * twice).abs()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    /// Even-odd point containment.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn translated(&self, d: Point) -> Polygon {
        Polygon { vertices: self.vertices.iter().map(|v| *v + d).collect() }
    }

    /// Exact quarter turn about the world origin.
    pub fn rot90(&self) -> Polygon {
        Polygon { vertices: self.vertices.iter().map(|v| v.rot90()).collect() }
    }

    /// Smallest ray parameter `t > 0` with `origin + t·dir` on the boundary.
    pub fn ray_hit(&self, origin: Point, dir: Point) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (a, b) in self.edges() {
            let e = b - a;
            let denom = cross(dir, e);
            if denom == 0.0 {
                continue;
            }
            let w = a - origin;
            let t = cross(w, e) / denom;
            let s = cross(w, dir) / denom;
            if t > 1e-12 && (0.0..=1.0).contains(&s) && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
        best
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Point::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Point::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }
}

/// Nearest hit over a set of polygons: `(t, index)`.
pub fn nearest_hit<'a>(shapes: impl IntoIterator<Item = &'a Polygon>, origin: Point, dir: Point) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in shapes.into_iter().enumerate() {
        if let Some(t) = p.ray_hit(origin, dir) {
            if best.is_none_or(|(b, _)| t < b) {
                best = Some((t, i));
            }
        }
    }
    best
}
