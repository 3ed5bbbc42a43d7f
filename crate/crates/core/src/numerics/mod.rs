//! Dense tensors, reverse-mode differentiation, layers and optimization.

pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod params;
pub mod tensor;

pub use gradcheck::finite_diff_check;
pub use graph::{Gradients, Graph, Var};
pub use params::{AdamW, ParamId, ParamStore, Parameter};
pub use tensor::{argmax, Tensor};
