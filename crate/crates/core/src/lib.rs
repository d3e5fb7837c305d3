//! Part-wise coactive preference elicitation over factored configuration spaces.

pub mod error;
pub mod exact;
pub mod gai;
pub mod inference;
pub mod learner;
pub mod model;
pub mod problems;
pub mod selection;
pub mod simuser;

pub use error::{Error, Result};

/// Tolerance for utility comparisons.
pub const EPSILON: f64 = 1e-9;
