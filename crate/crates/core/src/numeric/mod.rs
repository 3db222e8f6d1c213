//! Dense linear algebra, stable softmax, regularized Cholesky and the
//! reverse-mode gradient tape used to differentiate the training objective.

pub mod gradcheck;
mod linalg;
mod matrix;
pub mod tape;

pub(crate) use linalg::factor_lower;
pub use linalg::{log_sum_exp, regularized_cholesky, softmax, Cholesky};
pub use matrix::{dot, norm2, squared_distance, Matrix};
pub use tape::{Gradients, Primitive, Tape, Var};
