//! Copula mixed models for bivariate meta-analysis of diagnostic test
//! accuracy studies: maximum likelihood via Gauss-Legendre quadrature,
//! composite likelihood with Godambe standard errors, SROC synthesis, and a
//! simulation engine.

pub mod composite;
pub mod copulas;
pub mod error;
pub mod likelihood;
pub mod numerics;
mod optim;
pub mod simulation;
pub mod synthesis;

pub use error::{Error, Result};
