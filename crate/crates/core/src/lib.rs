// Comparisons are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cahn_hilliard;
pub mod diagnostics;
pub mod error;
pub mod fluid;
pub mod grid;
pub mod io;
pub mod nutrient;
pub mod physics;
pub mod stepper;
