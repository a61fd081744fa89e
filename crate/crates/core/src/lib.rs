//! Transformations between discrete- and continuous-time multivariate ARMA
//! models, simulation of Levy-driven continuous-time state spaces, and an
//! estimation pipeline for MCAR models with seasonality and volatility.

pub mod cli;
pub mod core_model;
pub mod error;
pub mod estimate;
pub mod nig_levy;
pub mod numerics;
pub mod output;
pub mod ring;
pub mod simulate;
pub mod transform;

pub use error::{Error, Result};
