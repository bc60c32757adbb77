//! Marginal log-density ratios `z_k(x) = log g_1k(x) − log g_0k(x)`.
//!
//! The nonparametric estimator fits the log odds `η̂(x)` of Class 1 with a
//! penalized spline and subtracts the log prior odds, since
//! `η(x) = log r + d(x)` when `r` is the prior odds `π₁/π₀`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::distinct_count;
use crate::error::{Error, Result};
use crate::spline::{build_basis, curvature_penalty, select_lambda, FitOptions, PenalizedSplineFit, DEFAULT_INTERIOR_KNOTS};

/// Below this many distinct values a feature gets a constant ratio.
pub const MIN_DISTINCT_FOR_SPLINE: usize = 6;

/// Floor on Gaussian variances.
pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorOdds {
    #[serde(with = "crate::real_string")]
    pub r_hat: f64,
    pub n1: usize,
    pub n0: usize,
}

impl PriorOdds {
    /// `log r̂`, as `ln n1 − ln n0` so that swapping the classes negates it
    /// exactly.
    pub fn log(&self) -> f64 {
        (self.n1 as f64).ln() - (self.n0 as f64).ln()
    }
}

/// `r̂ = n1 / n0`.
pub fn estimate_prior_odds(y: &[u8]) -> Result<PriorOdds> {
    let n1 = y.iter().filter(|&&v| v == 1).count();
    let n0 = y.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::SingleClass(usize::from(n1 > 0) + usize::from(n0 > 0)));
    }
    Ok(PriorOdds {
        r_hat: n1 as f64 / n0 as f64,
        n1,
        n0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioKind {
    Spline,
    Gaussian,
    Constant,
}

impl FromStr for RatioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spline" => Ok(Self::Spline),
            "gaussian" => Ok(Self::Gaussian),
            "constant" => Ok(Self::Constant),
            other => Err(Error::InvalidParameter(format!("unknown ratio kind `{other}`"))),
        }
    }
}

impl fmt::Display for RatioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Spline => "spline",
            Self::Gaussian => "gaussian",
            Self::Constant => "constant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RatioEstimator {
    Spline {
        fit: PenalizedSplineFit,
    },
    /// Equal-variance Gaussian marginals with pooled variance `sigma2`.
    Gaussian {
        #[serde(with = "crate::real_string")]
        mu0: f64,
        #[serde(with = "crate::real_string")]
        mu1: f64,
        #[serde(with = "crate::real_string")]
        sigma2: f64,
    },
    Constant,
}

/// The estimated log-density ratio of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalRatioModel {
    pub feature_index: usize,
    pub prior_odds: PriorOdds,
    pub estimator: RatioEstimator,
    /// Why a spline request ended up constant, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

impl MarginalRatioModel {
    pub fn kind(&self) -> RatioKind {
        match self.estimator {
            RatioEstimator::Spline { .. } => RatioKind::Spline,
            RatioEstimator::Gaussian { .. } => RatioKind::Gaussian,
            RatioEstimator::Constant => RatioKind::Constant,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.estimator {
            RatioEstimator::Spline { fit } => fit.eta(x) - self.prior_odds.log(),
            RatioEstimator::Gaussian { mu0, mu1, sigma2 } => {
                (mu1 - mu0) / sigma2 * x - (mu1 * mu1 - mu0 * mu0) / (2.0 * sigma2)
            }
            RatioEstimator::Constant => 0.0,
        }
    }

    pub fn spline_fit(&self) -> Option<&PenalizedSplineFit> {
        match &self.estimator {
            RatioEstimator::Spline { fit } => Some(fit),
            _ => None,
        }
    }
}

pub fn eval_log_ratio(model: &MarginalRatioModel, x_new: &[f64]) -> Vec<f64> {
    x_new.iter().map(|&x| model.eval(x)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioOptions {
    pub spline: FitOptions,
    pub interior_knots: usize,
}

impl Default for RatioOptions {
    fn default() -> Self {
        Self {
            spline: FitOptions::default(),
            interior_knots: DEFAULT_INTERIOR_KNOTS,
        }
    }
}

/// Class means and the pooled maximum-likelihood variance (divisor `n`).
pub fn pooled_gaussian(x: &[f64], y: &[u8]) -> (f64, f64, f64) {
    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for (&v, &c) in x.iter().zip(y) {
        sums[usize::from(c)] += v;
        counts[usize::from(c)] += 1;
    }
    let means = [sums[0] / counts[0] as f64, sums[1] / counts[1] as f64];
    let ss: f64 = x.iter().zip(y).map(|(&v, &c)| (v - means[usize::from(c)]).powi(2)).sum();
    (means[0], means[1], (ss / x.len() as f64).max(VARIANCE_FLOOR))
}

/// Fits the ratio of one feature. Spline requests fall back to a constant
/// ratio on scarce data or failed fits, never to a parametric model.
pub fn fit_marginal_ratio(
    x: &[f64],
    y: &[u8],
    feature_index: usize,
    kind: RatioKind,
    opts: &RatioOptions,
) -> Result<MarginalRatioModel> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let prior_odds = estimate_prior_odds(y)?;
    let model = |estimator, fallback| MarginalRatioModel {
        feature_index,
        prior_odds,
        estimator,
        fallback,
    };
    match kind {
        RatioKind::Constant => Ok(model(RatioEstimator::Constant, None)),
        RatioKind::Gaussian => {
            let (mu0, mu1, sigma2) = pooled_gaussian(x, y);
            Ok(model(RatioEstimator::Gaussian { mu0, mu1, sigma2 }, None))
        }
        RatioKind::Spline => {
            let distinct = distinct_count(x);
            if distinct < MIN_DISTINCT_FOR_SPLINE {
                let reason = format!("{distinct} distinct values");
                return Ok(model(RatioEstimator::Constant, Some(reason)));
            }
            let knots = opts.interior_knots.min(distinct - 4);
            let fitted = build_basis(x, knots).and_then(|basis| {
                let penalty = curvature_penalty(&basis);
                select_lambda(x, y, &basis, &penalty, &opts.spline)
            });
            match fitted {
                Ok(fit) => Ok(model(RatioEstimator::Spline { fit }, None)),
                Err(e) => {
                    log::warn!("feature {feature_index}: spline fit failed ({e}), using a constant ratio");
                    Ok(model(RatioEstimator::Constant, Some(e.to_string())))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyParams {
    Gaussian { mu0: f64, mu1: f64, sigma2: f64 },
    Bernoulli { mu0: f64, mu1: f64 },
    Poisson { mu0: f64, mu1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Bernoulli,
    Poisson,
}

/// An exact log-density ratio `z(x) = γx + δ` between two members of one
/// exponential family sharing their dispersion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFamilyRatio {
    pub family: Family,
    pub gamma: f64,
    pub delta: f64,
}

impl ExponentialFamilyRatio {
    pub fn z(&self, x: f64) -> f64 {
        self.gamma * x + self.delta
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn gamma_factor(params: FamilyParams) -> Result<ExponentialFamilyRatio> {
    let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
    match params {
        FamilyParams::Gaussian { mu0, mu1, sigma2 } => {
            if !(sigma2 > 0.0) || !mu0.is_finite() || !mu1.is_finite() {
                return bad("gaussian ratio needs finite means and a positive variance");
            }
            Ok(ExponentialFamilyRatio {
                family: Family::Gaussian,
                gamma: (mu1 - mu0) / sigma2,
                delta: -(mu1 * mu1 - mu0 * mu0) / (2.0 * sigma2),
            })
        }
        FamilyParams::Bernoulli { mu0, mu1 } => {
            let open = |p: f64| p > 0.0 && p < 1.0;
            if !open(mu0) || !open(mu1) {
                return bad("bernoulli means must lie in (0, 1)");
            }
            Ok(ExponentialFamilyRatio {
                family: Family::Bernoulli,
                gamma: logit(mu1) - logit(mu0),
                delta: (-mu1).ln_1p() - (-mu0).ln_1p(),
            })
        }
        FamilyParams::Poisson { mu0, mu1 } => {
            if !(mu0 > 0.0 && mu1 > 0.0) || !mu0.is_finite() || !mu1.is_finite() {
                return bad("poisson means must be positive");
            }
            Ok(ExponentialFamilyRatio {
                family: Family::Poisson,
                gamma: mu1.ln() - mu0.ln(),
                delta: mu0 - mu1,
            })
        }
    }
}
