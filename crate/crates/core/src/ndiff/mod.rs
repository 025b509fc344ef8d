//! Minimal dense numerics with reverse-mode differentiation.

mod adam;
pub mod complex;
mod gradcheck;
pub mod kernels;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use complex::{complex_conjugate, complex_hadamard, complex_unit_normalize, ComplexView};
pub use gradcheck::{finite_diff_check, relative_error, GradCheckOptions, GradCheckReport};
pub use kernels::{cross_entropy, softmax};
pub use tape::{Gradients, LinearMap, Tape, Var};
pub use tensor::{gemm, Tensor};
