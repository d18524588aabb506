#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli_io;
pub mod contour;
pub mod error;
pub mod experiments;
pub mod frac_calc;
pub mod linalg;
pub mod mild_solver;
pub mod quadrature;
pub mod scalar_ml;
pub mod sectorial;

pub use error::{Error, Result};
