//! Gaussian Naive Bayes: log prior odds plus a sum of per-feature log
//! density ratios between class-conditional normals.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::PredictionResult;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ratio::{estimate_prior_odds, pooled_gaussian, PriorOdds, VARIANCE_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMode {
    /// A separate maximum-likelihood variance per class.
    #[default]
    Unpooled,
    /// One within-class variance shared by both classes.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMarginal {
    #[serde(with = "crate::real_string")]
    pub mu0: f64,
    #[serde(with = "crate::real_string")]
    pub mu1: f64,
    #[serde(with = "crate::real_string")]
    pub var0: f64,
    #[serde(with = "crate::real_string")]
    pub var1: f64,
}

impl GaussianMarginal {
    /// `log N(x; mu1, var1) − log N(x; mu0, var0)`.
    pub fn log_ratio(&self, x: f64) -> f64 {
        let d1 = x - self.mu1;
        let d0 = x - self.mu0;
        if self.var0 == self.var1 {
            (d0 * d0 - d1 * d1) / (2.0 * self.var1)
        } else {
            // Grouped so that swapping the classes negates the result exactly.
            let half_log = 0.5 * (self.var0.ln() - self.var1.ln());
            half_log + (d0 * d0 / (2.0 * self.var0) - d1 * d1 / (2.0 * self.var1))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub prior_odds: PriorOdds,
    #[serde(with = "crate::real_string")]
    pub log_prior_odds: f64,
    pub variance: VarianceMode,
    pub marginals: Vec<GaussianMarginal>,
}

impl NaiveBayesModel {
    /// The per-feature summands of the score for one observation.
    pub fn feature_terms(&self, row: &[f64]) -> Vec<f64> {
        self.marginals.iter().zip(row).map(|(m, &x)| m.log_ratio(x)).collect()
    }

    pub fn scores(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.marginals.len() {
            return Err(Error::DimensionMismatch {
                expected: self.marginals.len(),
                found: x.ncols(),
            });
        }
        Ok((0..x.nrows())
            .map(|i| {
                self.marginals
                    .iter()
                    .enumerate()
                    .fold(self.log_prior_odds, |s, (k, m)| s + m.log_ratio(x[(i, k)]))
            })
            .collect())
    }
}

fn class_moments(x: &[f64], y: &[u8], class: u8) -> (f64, f64) {
    let values: Vec<f64> = x.iter().zip(y).filter(|(_, &c)| c == class).map(|(&v, _)| v).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.max(VARIANCE_FLOOR))
}

/// Per-class maximum-likelihood Gaussian parameters for every feature.
pub fn fit_naive_bayes(ds: &Dataset, variance: VarianceMode) -> Result<NaiveBayesModel> {
    let y = ds.labels();
    let prior_odds = estimate_prior_odds(y)?;
    let marginals = (0..ds.p())
        .map(|k| {
            let x = ds.column(k);
            match variance {
                VarianceMode::Unpooled => {
                    let (mu0, var0) = class_moments(&x, y, 0);
                    let (mu1, var1) = class_moments(&x, y, 1);
                    GaussianMarginal { mu0, mu1, var0, var1 }
                }
                VarianceMode::Pooled => {
                    let (mu0, mu1, sigma2) = pooled_gaussian(&x, y);
                    GaussianMarginal {
                        mu0,
                        mu1,
                        var0: sigma2,
                        var1: sigma2,
                    }
                }
            }
        })
        .collect();
    Ok(NaiveBayesModel {
        prior_odds,
        log_prior_odds: prior_odds.log(),
        variance,
        marginals,
    })
}

pub fn predict_naive_bayes(model: &NaiveBayesModel, x_new: &DMatrix<f64>) -> Result<PredictionResult> {
    Ok(PredictionResult::from_scores(model.scores(x_new)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(rows: &[Vec<f64>], labels: &[u8]) -> Dataset {
        Dataset::from_rows(rows, labels.to_vec()).unwrap()
    }

    #[test]
    fn hand_computed_parameters() {
        // Class 0: x = 1, 3 (mean 2, var 1); class 1: x = 4, 8 (mean 6, var 4).
        let d = ds(&[vec![1.0], vec![4.0], vec![3.0], vec![8.0]], &[0, 1, 0, 1]);
        let m = fit_naive_bayes(&d, VarianceMode::Unpooled).unwrap();
        assert_eq!(m.marginals[0], GaussianMarginal { mu0: 2.0, mu1: 6.0, var0: 1.0, var1: 4.0 });
        assert_eq!(m.log_prior_odds, 0.0);
        let pooled = fit_naive_bayes(&d, VarianceMode::Pooled).unwrap();
        assert_eq!(pooled.marginals[0].var0, 2.5);
        assert_eq!(pooled.marginals[0].var1, 2.5);
        // log N(5; 6, 4) − log N(5; 2, 1) = −ln 2 − 1/8 + 9/2.
        let expected = -(2f64.ln()) - 0.125 + 4.5;
        assert!((m.marginals[0].log_ratio(5.0) - expected).abs() < 1e-14);
    }

    #[test]
    fn boundary_at_midpoint() {
        let m = NaiveBayesModel {
            prior_odds: estimate_prior_odds(&[0, 1]).unwrap(),
            log_prior_odds: 0.0,
            variance: VarianceMode::Pooled,
            marginals: vec![GaussianMarginal { mu0: 0.0, mu1: 2.0, var0: 1.0, var1: 1.0 }],
        };
        let x = DMatrix::from_column_slice(3, 1, &[0.999, 1.0, 1.001]);
        let r = predict_naive_bayes(&m, &x).unwrap();
        assert_eq!(r.scores[1], 0.0);
        assert_eq!(r.predicted, vec![0, 1, 1]);
        let at_means = DMatrix::from_column_slice(1, 1, &[2.0]);
        assert_eq!(predict_naive_bayes(&m, &at_means).unwrap().predicted, vec![1]);
    }

    #[test]
    fn identical_class_samples_contribute_nothing() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i / 2) * 0.3, f64::from(i)]).collect();
        let labels: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let m = fit_naive_bayes(&ds(&rows, &labels), VarianceMode::Unpooled).unwrap();
        for r in &rows {
            assert!(m.feature_terms(r)[0].abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn swap_and_decomposition(
            data in prop::collection::vec((prop::collection::vec(-20.0f64..20.0, 3), any::<bool>()), 6..40),
            probe in prop::collection::vec(-30.0f64..30.0, 3),
            pooled in any::<bool>(),
        ) {
            let rows: Vec<Vec<f64>> = data.iter().map(|d| d.0.clone()).collect();
            let mut labels: Vec<u8> = data.iter().map(|d| u8::from(d.1)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let mode = if pooled { VarianceMode::Pooled } else { VarianceMode::Unpooled };
            let a = fit_naive_bayes(&ds(&rows, &labels), mode).unwrap();
            let flipped: Vec<u8> = labels.iter().map(|v| 1 - v).collect();
            let b = fit_naive_bayes(&ds(&rows, &flipped), mode).unwrap();
            let x = DMatrix::from_row_slice(1, 3, &probe);
            let sa = a.scores(&x).unwrap()[0];
            prop_assert_eq!(sa, -b.scores(&x).unwrap()[0]);
            prop_assert!(a.marginals.iter().all(|m| m.var0 >= VARIANCE_FLOOR && m.var1 >= VARIANCE_FLOOR));

            let terms = a.feature_terms(&probe);
            for k in 0..3 {
                let mut reduced = a.clone();
                let m = reduced.marginals[k];
                reduced.marginals[k] = GaussianMarginal { mu0: m.mu0, mu1: m.mu0, var0: m.var0, var1: m.var0 };
                let diff = sa - reduced.scores(&x).unwrap()[0];
                prop_assert!((diff - terms[k]).abs() <= 1e-12 * (1.0 + sa.abs() + terms.iter().map(|t| t.abs()).sum::<f64>()));
            }
        }
    }
}
