//! Smart Bayes classification toolkit.
//!
//! Naive Bayes adds marginal log density ratios with unit weights; logistic
//! regression weights the raw features. Smart Bayes fits a logistic layer on
//! the marginal log density ratios themselves, each estimated by a penalized
//! logistic cubic spline with the smoothing parameter picked by GCV.
//!
//! Modules, bottom up:
//!
//! - [`dataset`]: CSV ingestion, preprocessing rules, splits and error rates.
//! - [`spline`]: B-spline basis, curvature penalty, penalized IRLS, GCV.
//! - [`ratio`]: marginal log-ratio models and exponential-family factors.
//! - [`classify`]: logistic regression, Naive Bayes and Smart Bayes.
//! - [`simulate`]: multivariate Gaussian / t samplers and the simulation driver.
//! - [`bench`]: learning-curve harness, CSV/SVG emission.
//! - [`cli`]: the `smartbayes` command line.

pub mod bench;
pub mod classify;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod ratio;
pub mod simulate;
pub mod spline;

mod real_string;

pub use error::{Error, Result};
