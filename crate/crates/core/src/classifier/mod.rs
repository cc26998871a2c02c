//! Track-proposal classifier.
//!
//! Each track carries an LSTM memory whose hidden vector, reshaped into
//! `rows x key_dim`, is matched against an embedded detection (`relu(H x)`).
//! The match of the target track is concatenated with the column-wise max of
//! the matches of every other live track, optionally fused with a motion
//! branch, and classified by a small head into `p(detection belongs to track)`.

mod config;
mod model;

pub use config::{HeadMode, ModelConfig, Profile};
pub use model::{pool_other_tracks, AppearanceMemory, Classifier, MotionState, PairInput, Pooling};
