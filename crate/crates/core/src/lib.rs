//! Continuous-time trajectory estimation on SE(3) with a Gaussian-process
//! prior built from a truncated Magnus expansion.

pub mod error;
pub mod experiment;
pub mod linalg;
pub mod magnus;
pub mod prior;
pub mod query;
pub mod se3;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
