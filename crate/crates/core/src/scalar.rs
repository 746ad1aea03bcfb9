//! Scalar abstraction for the numeric kernels (assignment, reranking,
//! statistics). Everything downstream instantiates these at `f64` via the
//! crate-root aliases.

use num_traits::Float;
use std::fmt::Debug;
use std::iter::Sum;

/// Floating-point scalar usable by the numeric kernels.
pub trait Scalar: Float + Sum + Debug + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + Sum + Debug + Send + Sync + 'static {}
