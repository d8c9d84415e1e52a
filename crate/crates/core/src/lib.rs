//! Mutual information, equivocation, and minimum-probability-of-error estimation for
//! discrete-input hypothesis channels, together with lower and upper bounds on these
//! quantities built from Bayesian error statistics.

pub mod bounds;
pub mod cli;
pub mod entropy;
pub mod error;
pub mod flem;
pub mod mc;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod stats;

pub use error::{Error, Result};
