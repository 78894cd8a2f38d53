//! Dense tensors, CSR matrices and a reverse-mode tape over them.

mod gradcheck;
mod sparse;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use sparse::{CsrMatrix, SparseOperator};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
