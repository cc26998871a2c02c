//! Axis-aligned boxes in pixel coordinates.

use serde::{Deserialize, Serialize};

/// A box given by its top-left corner and size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub const fn new(left: f64, top: f64, width: f64, height: f64) -> Self {
        Self {
            left,
            top,
            width,
            height,
        }
    }

    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Self {
        Self::new(cx - width / 2.0, cy - height / 2.0, width, height)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.left + self.width / 2.0, self.top + self.height / 2.0)
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width.max(0.0) * self.height.max(0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.left.is_finite() && self.top.is_finite() && self.width.is_finite() && self.height.is_finite()
    }

    /// Intersection over union; zero when either box is degenerate.
    pub fn iou(&self, other: &BBox) -> f64 {
        let iw = self.right().min(other.right()) - self.left.max(other.left);
        let ih = self.bottom().min(other.bottom()) - self.top.max(other.top);
        if iw <= 0.0 || ih <= 0.0 {
            return 0.0;
        }
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Component-wise linear interpolation; `t = 0` gives `self`.
    pub fn lerp(&self, other: &BBox, t: f64) -> BBox {
        BBox::new(
            self.left + (other.left - self.left) * t,
            self.top + (other.top - self.top) * t,
            self.width + (other.width - self.width) * t,
            self.height + (other.height - self.height) * t,
        )
    }

    /// Box scaled into `[0, 1]` image coordinates: `(x/W, y/H, w/W, h/H)`.
    pub fn normalized(&self, image_width: f64, image_height: f64) -> [f64; 4] {
        [
            self.left / image_width,
            self.top / image_height,
            self.width / image_width,
            self.height / image_height,
        ]
    }
}
