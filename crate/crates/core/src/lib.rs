//! Hankel singular values, Kolmogorov n-widths and optimal Hankel-norm
//! reduction for asymptotically stable LTI systems.

pub mod cli;
pub mod error;
pub mod gramian;
pub mod hankel;
pub mod linalg;
pub mod parametric;
pub mod quadrature;
pub mod reduction;
pub mod system;
pub mod widths;

pub use error::{Error, Result};
pub use linalg::{Matrix, Tolerances};
pub use system::{LtiSystem, ParametricLtiSystem};
