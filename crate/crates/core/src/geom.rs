use serde::{Deserialize, Serialize};

/// Inclusive integer pixel box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: i64,
    pub y_min: i64,
    pub x_max: i64,
    pub y_max: i64,
}

impl BBox {
    pub fn new(x_min: i64, y_min: i64, x_max: i64, y_max: i64) -> Self {
        debug_assert!(x_min <= x_max && y_min <= y_max);
        BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn point(x: i64, y: i64) -> Self {
        BBox::new(x, y, x, y)
    }

    pub fn width(&self) -> i64 {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> i64 {
        self.y_max - self.y_min + 1
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn include(&mut self, x: i64, y: i64) {
        self.x_min = self.x_min.min(x);
        self.y_min = self.y_min.min(y);
        self.x_max = self.x_max.max(x);
        self.y_max = self.y_max.max(y);
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) as f64 / 2.0,
            (self.y_min + self.y_max) as f64 / 2.0,
        )
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let b = BBox {
            x_min: self.x_min.max(other.x_min),
            y_min: self.y_min.max(other.y_min),
            x_max: self.x_max.min(other.x_max),
            y_max: self.y_max.min(other.y_max),
        };
        (b.x_min <= b.x_max && b.y_min <= b.y_max).then_some(b)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other).map_or(0, |b| b.area());
        let union = self.area() + other.area() - inter;
        inter as f64 / union as f64
    }

    /// Clips to a `width x height` frame; `None` if nothing remains.
    pub fn clip(&self, width: u32, height: u32) -> Option<BBox> {
        self.intersection(&BBox::new(0, 0, width as i64 - 1, height as i64 - 1))
    }
}
