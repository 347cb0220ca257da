use serde::{Deserialize, Serialize};

pub use glam::DVec2 as Vec2;

/// 2D cross product (z component).
#[inline]
pub fn det(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Returns `v` scaled down so that its length does not exceed `max`.
#[inline]
pub fn clamp_length(v: Vec2, max: f64) -> Vec2 {
    let len_sq = v.length_squared();
    if len_sq > max * max && len_sq > 0.0 {
        v * (max / len_sq.sqrt())
    } else {
        v
    }
}

/// A static line-segment obstacle, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    /// Closest point on the segment to `p`, with the segment parameter in [0, 1].
    pub fn closest_point(&self, p: Vec2) -> (Vec2, f64) {
        let ab = self.b - self.a;
        let len_sq = ab.length_squared();
        if len_sq == 0.0 {
            return (self.a, 0.0);
        }
        let t = ((p - self.a).dot(ab) / len_sq).clamp(0.0, 1.0);
        (self.a + ab * t, t)
    }
}

/// Axis-aligned rectangle, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min: min.to_array(), max: max.to_array() }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min[0] && p.x <= self.max[0] && p.y >= self.min[1] && p.y <= self.max[1]
    }

    pub fn is_valid(&self) -> bool {
        self.min.iter().chain(&self.max).all(|v| v.is_finite())
            && self.min[0] < self.max[0]
            && self.min[1] < self.max[1]
    }
}
