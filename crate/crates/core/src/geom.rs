use serde::{Deserialize, Serialize};

/// Planar point in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }

    /// Integer key on a 1e-6 mm grid, used for exact node deduplication.
    pub fn key(&self) -> (i64, i64) {
        (quantize(self.x), quantize(self.y))
    }
}

pub(crate) const NODE_TOLERANCE: f64 = 1e-6;

fn quantize(v: f64) -> i64 {
    (v / NODE_TOLERANCE).round() as i64
}
