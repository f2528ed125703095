//! Dense `f64` tensors, a reverse-mode tape, gradient checking and the
//! parameter checkpoint format.

pub mod checkpoint;
mod gradcheck;
mod graph;
mod tensor;

pub use gradcheck::{check_gradients, GradCheckReport};
pub use graph::{sigmoid, softmax_in_place, Graph, Primitive, Var, MASK_VALUE};
pub use tensor::{ParamSet, Tensor};

/// Alias used where the recording aspect of [`Graph`] matters.
pub type ComputationRecord = Graph;
