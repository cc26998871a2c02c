use serde::{Deserialize, Serialize};

use crate::classifier::Pooling;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Off,
    /// Only pairs whose predicted and detected boxes reach this IoU are scored.
    Iou(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Emit every box in the frame it belongs to.
    #[default]
    Online,
    /// Hold extended boxes until the track is detected again, then fill the
    /// gap by interpolation; drop them if the track ends first.
    NearOnline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub assoc_threshold: f64,
    pub n_miss: u32,
    pub gate: Gate,
    pub extension: bool,
    pub smoothing: Smoothing,
    pub min_birth_conf: f64,
    pub pooling: Pooling,
    /// Used for motion normalisation when the input does not carry an image size.
    pub image_width: f64,
    pub image_height: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            assoc_threshold: 0.5,
            n_miss: 60,
            gate: Gate::Iou(0.1),
            extension: true,
            smoothing: Smoothing::Online,
            min_birth_conf: 0.0,
            pooling: Pooling::Full,
            image_width: 1920.0,
            image_height: 1080.0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.assoc_threshold > 0.0 && self.assoc_threshold < 1.0) {
            return Err(Error::config("tracker.assoc_threshold", "must be in (0, 1)"));
        }
        if self.n_miss == 0 {
            return Err(Error::config("tracker.n_miss", "must be at least 1"));
        }
        if let Gate::Iou(t) = self.gate {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config("tracker.gate", "IoU gate must be in [0, 1]"));
            }
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(Error::config("tracker.image_width", "image size must be positive"));
        }
        if self.min_birth_conf.is_nan() {
            return Err(Error::config("tracker.min_birth_conf", "must be a number"));
        }
        Ok(())
    }
}
