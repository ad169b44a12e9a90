//! Special functions, univariate distributions, links, and quadrature rules.

pub mod dist;
pub mod link;
pub mod quad;

pub use dist::{
    beta_cdf, beta_ln_pdf, beta_quantile, betabinomial_logpmf, binomial_logpmf, normal_cdf,
    normal_pdf, normal_quantile,
};
pub use link::{Link, MarginFamily, MarginSpec};
pub use quad::{gauss_legendre, QuadratureRule};
