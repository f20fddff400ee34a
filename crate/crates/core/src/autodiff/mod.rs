//! Reverse-mode differentiation for the dense/sparse primitives the model
//! needs, plus a finite-difference checker.

mod gradcheck;
mod tape;

pub use gradcheck::{grad_check, GradCheckReport};
pub use tape::{softmax_rows, Gradients, Tape, Var};
