//! Exact rational arithmetic: numbers, intervals, affine maps and finite
//! unions of intervals. Nothing in here rounds.

mod affine;
mod interval;
mod rat;
mod set;

pub use affine::{interval_image, AffineQ};
pub use interval::IntervalQ;
pub use rat::{q, ParseRatError, Rat};
pub use set::{interval_union_measure, ClosedUnion};
