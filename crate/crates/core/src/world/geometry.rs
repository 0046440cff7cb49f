//! Planar geometry: poses, lane polylines and distance queries.
//!
//! Axes follow screen convention: x grows to the east, y grows to the south,
//! and headings are measured from +x towards +y. A positive heading change is
//! therefore a right turn, and a positive lateral offset lies to the right of
//! the direction of travel.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

const TAU: f64 = 2.0 * PI;

/// Wraps an angle into `[-π, π)`. Values already in range are returned untouched.
pub fn normalize_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r >= PI {
        -PI
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose { x, y, heading: normalize_angle(heading) }
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn dist(&self, o: &Pose) -> f64 {
        self.point().dist(o.point())
    }

    /// Bearing of `target` relative to this pose's heading, in `[-π, π)`.
    pub fn bearing_to(&self, target: Point) -> f64 {
        normalize_angle((target.y - self.y).atan2(target.x - self.x) - self.heading)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            x: f64,
            y: f64,
            #[serde(default)]
            heading: f64,
        }
        let r = Raw::deserialize(d)?;
        Ok(Pose::new(r.x, r.y, r.heading))
    }
}

/// One straight piece of a lane centerline, cached for distance queries.
#[derive(Clone, Debug)]
pub(crate) struct Segment {
    pub a: Point,
    pub dir: Point,
    pub len: f64,
    pub lane: usize,
}

impl Segment {
    pub fn new(a: Point, b: Point, lane: usize) -> Self {
        let len = a.dist(b);
        Segment { a, dir: Point::new((b.x - a.x) / len, (b.y - a.y) / len), len, lane }
    }

    /// Unsigned distance from `p` to the closed segment.
    #[inline]
    pub fn distance(&self, p: Point) -> f64 {
        let rx = p.x - self.a.x;
        let ry = p.y - self.a.y;
        let t = (rx * self.dir.x + ry * self.dir.y).clamp(0.0, self.len);
        (rx - t * self.dir.x).hypot(ry - t * self.dir.y)
    }

    /// Which side of the segment line `p` lies on: positive to the right.
    #[inline]
    pub fn side(&self, p: Point) -> f64 {
        let rx = p.x - self.a.x;
        let ry = p.y - self.a.y;
        // right-hand normal of (dx, dy) in screen axes is (-dy, dx)
        -rx * self.dir.y + ry * self.dir.x
    }
}

/// Distance from ray origin `o` along unit direction `d` to the first
/// intersection with a circle, or `None` when the ray misses it.
/// Origins inside the circle report 0.
pub fn ray_circle(o: Point, d: Point, c: Point, r: f64) -> Option<f64> {
    let fx = o.x - c.x;
    let fy = o.y - c.y;
    let c0 = fx * fx + fy * fy - r * r;
    if c0 <= 0.0 {
        return Some(0.0);
    }
    let b = fx * d.x + fy * d.y;
    let disc = b * b - c0;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}
