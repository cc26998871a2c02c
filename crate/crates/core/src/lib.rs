//! Online multi-object tracking with a bilinear recurrent appearance memory
//! and multi-track max pooling.
//!
//! This crate is `no_std` (it needs `alloc`). Everything that touches files,
//! clocks or the command line lives in the `trackpool` companion crate.
//!
//! Layout:
//! - [`nn`]: dense tensors, a small reverse-mode tape, SGD/Adam, gradient checking
//! - [`classifier`]: the track-proposal classifier (appearance memory, pooling, motion branch)
//! - [`training`]: episode generation, augmentation, focal-weighted loss, the training loop
//! - [`tracker`]: Kalman prediction, greedy association, track lifecycle, smoothing
//! - [`metrics`]: Hungarian solver, CLEAR-MOT and identity metrics
//! - [`sim`]: seeded synthetic scenes with confusable appearance clusters
#![no_std]

extern crate alloc;

pub mod classifier;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod nn;
pub mod record;
pub mod sim;
pub mod tracker;
pub mod training;

pub use error::{Error, Result};
pub use geometry::BBox;
