//! Distributionally robust bounds on the expected optimum of linear programs with random
//! objectives, given the mean and block-diagonal second moments of the objective.

pub mod appsched;
pub mod assign;
pub mod baselines;
pub mod chull;
pub mod dag;
pub mod error;
pub mod facial;
pub mod moments;
pub mod pert;
pub mod reduced;
pub mod wcdist;

pub use error::{Error, Result};
