//! CLEAR-MOT and identity metrics, plus the assignment solver they use.

mod clear;
mod hungarian;
mod identity;
mod report;

pub use clear::{clear_mot, match_frame, ClearMot, FrameMatch};
pub use hungarian::{hungarian, Assignment};
pub use identity::{idf1, IdScores};
pub use report::{evaluate, EvalReport, SequenceReport};

/// Minimum IoU for a ground-truth box and a hypothesis to correspond.
pub const IOU_THRESHOLD: f64 = 0.5;
