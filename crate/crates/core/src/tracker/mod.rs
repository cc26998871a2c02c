//! Online tracking: Kalman prediction, gating, greedy association, track
//! lifecycle and smoothing.

pub mod associate;
pub mod config;
pub mod engine;
pub mod kalman;
pub mod smooth;

pub use associate::{greedy_associate, motion_gate};
pub use config::{Gate, Smoothing, TrackerConfig};
pub use engine::{maybe_terminate, BoxEmbedder, OutputRow, Source, Track, Tracker};
pub use kalman::KalmanState;
pub use smooth::{smooth_track, smooth_tracks};
