//! Conditional quantile regression whose quantile function is the integral of
//! a positive network output, represented as a Chebyshev series in τ.

pub mod cheb;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod losses;
pub mod models;
pub mod nnet;
pub mod rng;

pub use error::{Error, Result};
