//! Planar points and vectors. Coordinates follow image convention: x to the
//! right, y downward, integer values at pixel centers.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Twice the signed area of the triangle `(a, b, c)`; positive when the
/// vertices wind clockwise on screen (counter-clockwise in y-up axes).
pub fn signed_area2(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

pub fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * signed_area2(a, b, c)
}

/// Tolerance, in canvas pixels, for counting a point on a triangle edge as
/// inside.
pub const EDGE_TOLERANCE: f64 = 1e-9;

/// Closed point-in-triangle test. Each edge contributes the signed distance
/// of `p` from the edge line; the point is inside when no distance falls
/// below `-EDGE_TOLERANCE`. Works for either winding.
pub fn triangle_contains(tri: [Point2; 3], p: Point2) -> bool {
    let area2 = signed_area2(tri[0], tri[1], tri[2]);
    if area2 == 0.0 {
        return false;
    }
    let orient = area2.signum();
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let edge = b - a;
        let len = edge.norm();
        let dist = orient * edge.cross(p - a) / len;
        if dist < -EDGE_TOLERANCE {
            return false;
        }
    }
    true
}

/// Barycentric weights of `p` with respect to `tri`. `None` for a
/// zero-area triangle.
pub fn barycentric(tri: [Point2; 3], p: Point2) -> Option<[f64; 3]> {
    let area2 = signed_area2(tri[0], tri[1], tri[2]);
    if area2 == 0.0 {
        return None;
    }
    let w0 = signed_area2(p, tri[1], tri[2]) / area2;
    let w1 = signed_area2(tri[0], p, tri[2]) / area2;
    Some([w0, w1, 1.0 - w0 - w1])
}

/// Point with the given barycentric weights.
pub fn from_barycentric(tri: [Point2; 3], w: [f64; 3]) -> Point2 {
    Point2::new(
        w[0] * tri[0].x + w[1] * tri[1].x + w[2] * tri[2].x,
        w[0] * tri[0].y + w[1] * tri[1].y + w[2] * tri[2].y,
    )
}
