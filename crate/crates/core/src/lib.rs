//! Breakdown analysis for AR(1) estimators under additive outliers.
//!
//! The crate studies what a regression estimator does to a family of
//! stationary AR(1) processes once a fraction of the observations is hit by
//! additive outliers of magnitude `zeta`.  The image of the estimator over the
//! family (its "badness set") starts as an interval; as the contamination
//! fraction grows the interval can collapse to a few isolated points, and the
//! smallest fraction at which every compact subfamily collapses is the
//! estimator's breakdown point.
//!
//! Modules:
//! - [`specfun`]: scalar distribution functions the estimator equations need
//!   (normal, noncentral chi-square, ratio of correlated normals).
//! - [`model`]: AR(1) simulation, outlier contamination, and the two
//!   finite-sample regression estimators used in the worked examples.
//! - [`estimators`]: exact asymptotic functionals for OLS, least median of
//!   squares (LMS), and deepest regression (DR), plus their finite-sample
//!   counterparts.
//! - [`breakdown`]: interval sets, badness-set construction, and the
//!   asymptotic / finite-sample breakdown-point searches.
//! - [`cli`]: the `ar1-breakdown` command line front end (badness sweeps,
//!   breakdown searches, Monte Carlo simulation, CSV/SVG output).

// Guards written as !(x > 0.0) also reject NaN; x <= 0.0 would let it through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod breakdown;
pub mod cli;
pub mod estimators;
pub mod exec;
pub mod model;
pub mod specfun;

mod error;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
