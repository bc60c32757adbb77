//! Logistic regression on estimated marginal log-density ratios.
//!
//! With unit coefficients and intercept `log r̂` the score is exactly Naive
//! Bayes with the estimated marginals; fitting the logistic layer lets
//! correlated or miscalibrated features be reweighted.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic::{fit_logistic, LogisticModel, LogisticOptions};
use super::PredictionResult;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ratio::{estimate_prior_odds, fit_marginal_ratio, MarginalRatioModel, RatioKind, RatioOptions};
use crate::spline::{check_gradient, GradientAudit};

#[derive(Debug, Clone, PartialEq)]
pub struct SmartBayesOptions {
    pub kind: RatioKind,
    /// Keep unit coefficients and intercept `log r̂` instead of fitting them.
    pub frozen: bool,
    pub ratio: RatioOptions,
    pub logistic: LogisticOptions,
}

impl Default for SmartBayesOptions {
    fn default() -> Self {
        Self {
            kind: RatioKind::Spline,
            frozen: false,
            ratio: RatioOptions::default(),
            logistic: LogisticOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmartBayesModel {
    /// One ratio model per input column.
    pub ratio_models: Vec<MarginalRatioModel>,
    /// Input columns with a non-constant ratio, in order; these are the
    /// columns of the logistic layer.
    pub active: Vec<usize>,
    pub logistic: LogisticModel,
    pub frozen: bool,
}

impl SmartBayesModel {
    /// The `z` features of the active columns.
    pub fn z_design(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.ratio_models.len() {
            return Err(Error::DimensionMismatch {
                expected: self.ratio_models.len(),
                found: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), self.active.len(), |i, k| {
            let j = self.active[k];
            self.ratio_models[j].eval(x[(i, j)])
        }))
    }

    pub fn scores(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.logistic.scores(&self.z_design(x)?)
    }

    /// `exp(α_k)` for each active column: the multiplicative change in the
    /// odds of Class 1 per unit increase of that column's `z`.
    pub fn odds_ratio_per_unit_z(&self) -> Vec<(usize, f64)> {
        self.active
            .iter()
            .zip(&self.logistic.coefficients)
            .map(|(&j, a)| (j, a.exp()))
            .collect()
    }

    /// Spline requests that fell back to a constant ratio.
    pub fn fallback_count(&self) -> usize {
        self.ratio_models.iter().filter(|m| m.fallback.is_some()).count()
    }

    /// Whether the fit degraded: a capped logistic layer or a fallback.
    pub fn flagged(&self) -> bool {
        self.logistic.separated || self.fallback_count() > 0
    }

    /// Finite-difference checks of every spline ratio against its training
    /// column.
    pub fn gradient_audit(&self, train: &Dataset) -> Result<GradientAudit> {
        let mut audit = GradientAudit::default();
        for m in &self.ratio_models {
            if let Some(fit) = m.spline_fit() {
                audit.record(&check_gradient(fit, &train.column(m.feature_index), train.labels())?);
            }
        }
        Ok(audit)
    }
}

pub fn fit_smart_bayes(ds: &Dataset, opts: &SmartBayesOptions) -> Result<SmartBayesModel> {
    let y = ds.labels();
    let prior = estimate_prior_odds(y)?;
    let ratio_models = (0..ds.p())
        .into_par_iter()
        .map(|k| fit_marginal_ratio(&ds.column(k), y, k, opts.kind, &opts.ratio))
        .collect::<Result<Vec<_>>>()?;
    let active: Vec<usize> = ratio_models
        .iter()
        .filter(|m| m.kind() != RatioKind::Constant)
        .map(|m| m.feature_index)
        .collect();
    if active.is_empty() {
        return Err(Error::NoInformativeFeatures);
    }
    let mut model = SmartBayesModel {
        ratio_models,
        active,
        logistic: LogisticModel {
            intercept: prior.log(),
            coefficients: Vec::new(),
            aliased: Vec::new(),
            converged: true,
            separated: false,
            iterations: 0,
        },
        frozen: opts.frozen,
    };
    if opts.frozen {
        model.logistic.coefficients = vec![1.0; model.active.len()];
    } else {
        let z = model.z_design(ds.features())?;
        model.logistic = fit_logistic(&z, y, &opts.logistic)?;
    }
    Ok(model)
}

pub fn predict_smart_bayes(model: &SmartBayesModel, x_new: &DMatrix<f64>) -> Result<PredictionResult> {
    Ok(PredictionResult::from_scores(model.scores(x_new)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::logistic::deviance;
    use crate::classify::naive_bayes::{fit_naive_bayes, VarianceMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Two classes, unit variances, correlation `rho` between the two
    /// features and class-1 mean `(shift, shift)`.
    fn correlated(n_per_class: usize, rho: f64, shift: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for class in [0u8, 1] {
            for _ in 0..n_per_class {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                let m = shift * f64::from(class);
                rows.push(vec![m + a, m + rho * a + (1.0 - rho * rho).sqrt() * b]);
                labels.push(class);
            }
        }
        Dataset::from_rows(&rows, labels).unwrap()
    }

    fn opts(kind: RatioKind, frozen: bool) -> SmartBayesOptions {
        SmartBayesOptions {
            kind,
            frozen,
            ..SmartBayesOptions::default()
        }
    }

    #[test]
    fn frozen_gaussian_is_pooled_naive_bayes() {
        let ds = correlated(150, 0.3, 1.0, 1);
        let sb = fit_smart_bayes(&ds, &opts(RatioKind::Gaussian, true)).unwrap();
        let nb = fit_naive_bayes(&ds, VarianceMode::Pooled).unwrap();
        let a = sb.scores(ds.features()).unwrap();
        let b = nb.scores(ds.features()).unwrap();
        let worst = a.iter().zip(&b).fold(0.0f64, |m, (s, t)| m.max((s - t).abs()));
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn strong_correlation_moves_coefficients_off_one() {
        let ds = correlated(400, 0.9, 1.0, 5);
        let sb = fit_smart_bayes(&ds, &opts(RatioKind::Spline, false)).unwrap();
        let coefs = &sb.logistic.coefficients;
        assert_eq!(coefs.len(), 2);
        assert!(coefs.iter().any(|c| (c - 1.0).abs() > 0.2), "{coefs:?}");
    }

    #[test]
    fn unfrozen_never_has_larger_training_deviance() {
        for seed in 0..4 {
            let ds = correlated(120, 0.6, 0.8, 40 + seed);
            let a = fit_smart_bayes(&ds, &opts(RatioKind::Spline, false)).unwrap();
            let b = fit_smart_bayes(&ds, &opts(RatioKind::Spline, true)).unwrap();
            let da = deviance(&a.scores(ds.features()).unwrap(), ds.labels());
            let db = deviance(&b.scores(ds.features()).unwrap(), ds.labels());
            assert!(da <= db + 1e-8, "{da} > {db}");
        }
    }

    #[test]
    fn constant_columns_are_dropped() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![3.0, f64::from(i % 2) + rng.random::<f64>(), 1.0]).collect();
        let labels: Vec<u8> = (0..200).map(|i| (i % 2) as u8).collect();
        let ds = Dataset::from_rows(&rows, labels).unwrap();
        let sb = fit_smart_bayes(&ds, &opts(RatioKind::Spline, false)).unwrap();
        assert_eq!(sb.active, vec![1]);
        let mut probe = ds.features().clone();
        probe.column_mut(0).fill(-100.0);
        probe.column_mut(2).fill(55.0);
        assert_eq!(sb.scores(&probe).unwrap(), sb.scores(ds.features()).unwrap());

        let flat = Dataset::from_rows(&vec![vec![1.0, 2.0]; 10], (0..10).map(|i| (i % 2) as u8).collect()).unwrap();
        assert!(matches!(
            fit_smart_bayes(&flat, &opts(RatioKind::Spline, false)),
            Err(Error::NoInformativeFeatures)
        ));
    }

    #[test]
    fn single_positive_feature_is_monotone() {
        let ds = correlated(200, 0.0, 1.5, 12).select_columns(&[0]).unwrap();
        let sb = fit_smart_bayes(&ds, &opts(RatioKind::Gaussian, false)).unwrap();
        assert!(sb.logistic.coefficients[0] > 0.0);
        let grid = DMatrix::from_fn(400, 1, |i, _| -5.0 + 0.025 * i as f64);
        let pred = predict_smart_bayes(&sb, &grid).unwrap().predicted;
        assert!(pred.windows(2).all(|w| w[0] <= w[1]));
        let z = sb.z_design(&grid).unwrap();
        assert!(z.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn converged_spline_fits_pass_audit() {
        let ds = correlated(300, 0.4, 1.0, 77);
        let sb = fit_smart_bayes(&ds, &opts(RatioKind::Spline, false)).unwrap();
        let audit = sb.gradient_audit(&ds).unwrap();
        assert_eq!(audit.fits, 2);
        assert!(audit.max_score_norm <= 1e-8 && audit.max_rel_err <= 1e-4, "{audit:?}");
        assert!(sb.odds_ratio_per_unit_z().iter().all(|(_, r)| *r > 0.0));
    }
}
