//! Planar geometry shared by the world model, validator and planner.

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Point = Point2<f64>;

/// Wrap an angle to (-π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Axis-aligned workspace box, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Bounds {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn is_degenerate(&self) -> bool {
        (0..3).any(|i| !(self.max[i] > self.min[i]) || !self.min[i].is_finite() || !self.max[i].is_finite())
    }

    pub fn contains_xy(&self, p: &Point) -> bool {
        p.x >= self.min[0] && p.x <= self.max[0] && p.y >= self.min[1] && p.y <= self.max[1]
    }

    pub fn strictly_contains_xy(&self, p: &Point) -> bool {
        p.x > self.min[0] && p.x < self.max[0] && p.y > self.min[1] && p.y < self.max[1]
    }

    pub fn clamp_xy(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.min[0], self.max[0]), p.y.clamp(self.min[1], self.max[1]))
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }
}

/// Simple polygon (no self-intersections assumed), vertices in either winding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Even-odd point-in-polygon test. Points exactly on an edge count as inside.
    pub fn contains(&self, p: &Point) -> bool {
        if self.vertices.len() < 3 {
            return false;
        }
        if self.edges().any(|(a, b)| point_segment_distance(p, &a, &b) < 1e-12) {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Euclidean distance to the polygon region (zero inside).
    pub fn distance(&self, p: &Point) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.edges()
            .map(|(a, b)| point_segment_distance(p, &a, &b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len().max(1) as f64;
        let sum = self.vertices.iter().fold(Vector2::zeros(), |acc, v| acc + v.coords);
        Point::from(sum / n)
    }

    /// Parameters `t ∈ [0, 1]` at which segment `p→q` crosses an edge of the polygon.
    pub fn segment_crossings(&self, p: &Point, q: &Point) -> Vec<f64> {
        self.edges()
            .filter_map(|(a, b)| segment_intersection(p, q, &a, &b))
            .collect()
    }

    pub fn translated(&self, offset: Vector2<f64>) -> Self {
        Self::new(self.vertices.iter().map(|v| v + offset).collect())
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }
}

pub fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn cross(u: &Vector2<f64>, v: &Vector2<f64>) -> f64 {
    u.x * v.y - u.y * v.x
}

/// Intersection of segments `p→q` and `a→b`; returns the parameter along `p→q`.
/// Collinear overlaps report the first overlapping parameter.
pub fn segment_intersection(p: &Point, q: &Point, a: &Point, b: &Point) -> Option<f64> {
    let r = q - p;
    let s = b - a;
    let denom = cross(&r, &s);
    let qp = a - p;
    if denom.abs() < 1e-15 {
        if cross(&qp, &r).abs() > 1e-12 {
            return None;
        }
        let rr = r.norm_squared();
        if rr == 0.0 {
            return None;
        }
        let t0 = qp.dot(&r) / rr;
        let t1 = t0 + s.dot(&r) / rr;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        if hi < 0.0 || lo > 1.0 {
            return None;
        }
        return Some(lo.max(0.0));
    }
    let t = cross(&qp, &s) / denom;
    let u = cross(&qp, &r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Points sampled evenly on a circle, starting at angle zero.
pub fn circle_points(center: &Point, radius: f64, count: usize) -> Vec<Point> {
    (0..count)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / count as f64;
            Point::new(center.x + radius * a.cos(), center.y + radius * a.sin())
        })
        .collect()
}
