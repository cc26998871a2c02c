//! Plain records shared by the simulator, the tracker and the metrics.

use alloc::vec::Vec;

use crate::geometry::BBox;

/// One row of a MOT-Challenge style file.
///
/// `id` is `-1` for raw detections. The trailing `x, y, z` columns are
/// carried through untouched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRecord {
    pub frame: u32,
    pub id: i64,
    pub bbox: BBox,
    pub conf: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl MotRecord {
    pub fn new(frame: u32, id: i64, bbox: BBox, conf: f64) -> Self {
        Self {
            frame,
            id,
            bbox,
            conf,
            x: -1.0,
            y: -1.0,
            z: -1.0,
        }
    }
}

/// A detection in one frame together with its appearance embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub conf: f64,
    pub embedding: Vec<f64>,
}
