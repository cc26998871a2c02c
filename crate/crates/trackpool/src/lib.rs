//! File formats, configuration, checkpoints and the command-line tool
//! around [`trackpool_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod mot;
pub mod report;
pub mod run;
pub mod seqinfo;

pub use error::{Error, Result};
