//! Tensor kernel: dense and sparse products, a differentiation tape, Adam,
//! and the `DTN1` tensor file format.

mod adam;
pub mod dtn;
mod gradcheck;
pub mod loss;
mod sparse;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{finite_diff_grad, relative_error};
pub use sparse::{spmm, CsrMatrix};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::{
    add, apply_activation, concat_cols, hadamard, matmul, sigmoid, tile_rows, Activation, Tensor,
};
