//! Univariate penalized logistic splines.
//!
//! `η(x)`, the log odds of Class 1 given a single feature, is modeled as a
//! cubic B-spline and fitted by minimizing the binomial negative
//! log-likelihood plus `λ ∫ η''(u)² du`. The smoothing parameter is chosen by
//! generalized cross-validation over a log-spaced grid.

mod audit;
mod basis;
mod fit;
mod gcv;
mod penalty;

pub use audit::{check_gradient, GradientAudit, GradientCheck};
pub use basis::{build_basis, LocalBasis, SplineBasis, DEGREE};
pub use fit::{fit_penalized_logistic, predict_eta, PenalizedSplineFit};
pub use gcv::{gcv_score, lambda_path, select_lambda, LambdaPath};
pub use penalty::{curvature_penalty, PenaltyMatrix};

pub(crate) use fit::{log1p_exp, sigmoid};

use crate::error::{Error, Result};

/// Default number of interior knots.
pub const DEFAULT_INTERIOR_KNOTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the infinity norm of the penalized score.
    pub score_tolerance: f64,
    /// Ascending smoothing parameters tried by [`select_lambda`].
    pub lambda_grid: Vec<f64>,
    /// Relative diagonal loading of the Newton system.
    pub ridge_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            score_tolerance: 1e-8,
            lambda_grid: log_grid(1e-6, 1e6, 25),
            ridge_floor: 1e-10,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(Error::InvalidParameter("lambda grid is empty".into()));
        }
        if !self.lambda_grid.windows(2).all(|w| w[0] < w[1]) || self.lambda_grid[0] <= 0.0 {
            return Err(Error::InvalidParameter("lambda grid must be positive and ascending".into()));
        }
        if self.score_tolerance <= 0.0 || self.ridge_floor < 0.0 {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid() {
        let g = FitOptions::default().lambda_grid;
        assert_eq!(g.len(), 25);
        assert!((g[0] - 1e-6).abs() < 1e-20);
        assert!((g[24] - 1e6).abs() < 1e-6);
        assert!((g[12] - 1.0).abs() < 1e-12);
        assert!(FitOptions::default().validate().is_ok());
        let bad = FitOptions {
            lambda_grid: vec![1.0, 0.5],
            ..FitOptions::default()
        };
        assert!(bad.validate().is_err());
    }
}
