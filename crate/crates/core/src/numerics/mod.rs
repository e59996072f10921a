//! Dense tensors and reverse-mode differentiation.

mod params;
mod tape;
mod tensor;

pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{logsumexp, masked_softmax, BackwardRule, Tape, Var};
pub use tensor::Tensor;
