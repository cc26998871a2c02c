//! Minimal dense numerics: tensors, parameter storage, two evaluation
//! backends (plain values and a reverse-mode tape), layers, optimizers and a
//! central-difference gradient checker.

mod backend;
pub mod gradcheck;
pub mod kernels;
mod layers;
pub mod optim;
mod params;
mod precise;
mod tape;
mod tensor;

pub use backend::{Backend, Infer};
pub use precise::{Dd, Precise, PreciseValue};
pub use gradcheck::{finite_diff_check, FdOptions, FdReport, Probe};
pub use layers::{Activation, Dense, GateVariant, LstmCell, LstmState};
pub use optim::{sgd_step, Adam};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;
