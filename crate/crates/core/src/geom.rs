//! Minimal planar geometry helpers.

use crate::scalar::Real;

/// Point (or vector) in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Vec2 { x, y }
    }

    pub fn add(self, o: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, c: T) -> Vec2<T> {
        Vec2::new(self.x * c, self.y * c)
    }

    pub fn dot(self, o: Vec2<T>) -> T {
        self.x * o.x + self.y * o.y
    }

    /// Z component of the cross product `self × o`.
    pub fn cross(self, o: Vec2<T>) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec2<T> {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Counter-clockwise perpendicular (left normal).
    pub fn perp(self) -> Vec2<T> {
        Vec2::new(-self.y, self.x)
    }
}

/// Twice the signed area of triangle `(a, b, c)`; positive when CCW.
pub fn signed_area2<T: Real>(a: Vec2<T>, b: Vec2<T>, c: Vec2<T>) -> T {
    b.sub(a).cross(c.sub(a))
}
