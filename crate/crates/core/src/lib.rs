#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod data;
pub mod error;
pub mod eval;
pub mod harness;
pub mod label;
pub mod labelprop;
pub mod numerics;
pub mod selectors;
pub mod svm;
pub mod tsvm;

pub use error::{Error, Result};
pub use label::Label;
pub use numerics::{KernelSpec, Matrix};
