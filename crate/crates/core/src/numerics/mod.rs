//! Dense tensors, reverse-mode differentiation and the Adam update.

mod adam;
mod gradcheck;
pub mod ops;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::gradient_check;
pub use ops::{conv1d_causal, matmul};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
