//! Learning-curve harness, curve files and plots.

mod curve_io;
mod harness;
mod plot;

use std::collections::BTreeMap;

pub use curve_io::{curve_csv, emit_curve_csv, flags_csv, parse_curve_csv, CURVE_HEADER};
pub use harness::{default_training_sizes, load_dataset, run_benchmark, run_benchmark_on, BenchConfig, DataSource};
pub use plot::{emit_svg_plot, render_svg, y_axis_max};

use crate::classify::{ClassifierKind, FittedModel, Model, ModelOptions};
use crate::dataset::{misclassification_rate, Dataset};
use crate::error::{Error, Result};
use crate::ratio::estimate_prior_odds;
use crate::spline::GradientAudit;

/// One cell of a learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub dataset: String,
    pub classifier: ClassifierKind,
    pub train_size: usize,
    pub mean_error: f64,
    pub sd_error: f64,
    pub replications: usize,
    /// Split redraws needed because a training set held one class.
    pub redraws: usize,
    /// Replications whose fit was degraded: separation cap, constant
    /// ratios, or a failed fit replaced by the prior-odds rule.
    pub flagged: usize,
}

/// Rows sorted by classifier, then training size.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub rows: Vec<CurveRow>,
}

impl LearningCurve {
    pub fn new(mut rows: Vec<CurveRow>) -> Self {
        rows.sort_by_key(|r| (r.classifier, r.train_size));
        Self { rows }
    }

    pub fn row(&self, classifier: ClassifierKind, train_size: usize) -> Option<&CurveRow> {
        self.rows
            .iter()
            .find(|r| r.classifier == classifier && r.train_size == train_size)
    }

    pub fn classifiers(&self) -> Vec<ClassifierKind> {
        let mut kinds: Vec<ClassifierKind> = self.rows.iter().map(|r| r.classifier).collect();
        kinds.dedup();
        kinds
    }
}

/// Test errors of one replication.
#[derive(Debug, Clone, Default)]
pub(crate) struct CellOutcome {
    /// `(classifier, test error, flagged)`; empty when the replication was
    /// abandoned after too many degenerate splits.
    pub results: Vec<(ClassifierKind, f64, bool)>,
    pub redraws: usize,
    pub audit: GradientAudit,
}

impl CellOutcome {
    pub fn abandoned(redraws: usize) -> Self {
        Self {
            redraws,
            ..Self::default()
        }
    }
}

/// Fits every classifier on `train` and scores it on `test`. A failed fit
/// falls back to predicting by the training prior odds and is flagged.
pub(crate) fn evaluate_split(
    train: &Dataset,
    test: &Dataset,
    classifiers: &[ClassifierKind],
    opts: &ModelOptions,
    audit: bool,
) -> Result<CellOutcome> {
    let mut outcome = CellOutcome::default();
    for &kind in classifiers {
        let (predicted, flagged) = match FittedModel::fit(kind, train, opts) {
            Ok(fitted) => {
                if let (true, Model::SmartBayes(sb)) = (audit, &fitted.model) {
                    outcome.audit.merge(&sb.gradient_audit(train)?);
                }
                (fitted.model.predict(test.features())?.predicted, fitted.model.flagged())
            }
            Err(e) => {
                log::debug!("{kind} fit failed ({e}); predicting by prior odds");
                let class = u8::from(estimate_prior_odds(train.labels())?.log() >= 0.0);
                (vec![class; test.n()], true)
            }
        };
        outcome
            .results
            .push((kind, misclassification_rate(&predicted, test.labels())?, flagged));
    }
    Ok(outcome)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and sample standard deviation per (size, classifier), in the order
/// the outcomes are given.
pub(crate) fn aggregate(
    dataset: &str,
    classifiers: &[ClassifierKind],
    outcomes: Vec<(usize, CellOutcome)>,
) -> Result<LearningCurve> {
    let mut by_size: BTreeMap<usize, Vec<CellOutcome>> = BTreeMap::new();
    for (m, o) in outcomes {
        by_size.entry(m).or_default().push(o);
    }
    let mut rows = Vec::new();
    for (m, cells) in by_size {
        let redraws = cells.iter().map(|c| c.redraws).sum();
        for &kind in classifiers {
            let mut errors = Vec::new();
            let mut flagged = 0;
            for (_, e, f) in cells.iter().flat_map(|c| c.results.iter()).filter(|r| r.0 == kind) {
                errors.push(*e);
                flagged += usize::from(*f);
            }
            if errors.is_empty() {
                return Err(Error::Config(format!(
                    "every replication at training size {m} had a single-class training set"
                )));
            }
            let (mean_error, sd_error) = mean_sd(&errors);
            rows.push(CurveRow {
                dataset: dataset.to_string(),
                classifier: kind,
                train_size: m,
                mean_error,
                sd_error,
                replications: errors.len(),
                redraws,
                flagged,
            });
        }
    }
    Ok(LearningCurve::new(rows))
}

pub(crate) fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(errors: &[(ClassifierKind, f64)], redraws: usize) -> CellOutcome {
        CellOutcome {
            results: errors.iter().map(|&(k, e)| (k, e, false)).collect(),
            redraws,
            audit: GradientAudit::default(),
        }
    }

    #[test]
    fn single_replication_has_zero_sd() {
        let kinds = [ClassifierKind::Logistic];
        let curve = aggregate("d", &kinds, vec![(10, outcome(&[(ClassifierKind::Logistic, 0.25)], 2))]).unwrap();
        let row = &curve.rows[0];
        assert_eq!((row.mean_error, row.sd_error, row.replications, row.redraws), (0.25, 0.0, 1, 2));
    }

    #[test]
    fn aggregation_matches_hand_values() {
        let kinds = [ClassifierKind::SmartBayes, ClassifierKind::NaiveBayes];
        let cells = vec![
            (20, outcome(&[(kinds[0], 0.1), (kinds[1], 0.3)], 0)),
            (10, outcome(&[(kinds[0], 0.2), (kinds[1], 0.4)], 1)),
            (20, outcome(&[(kinds[0], 0.3), (kinds[1], 0.5)], 0)),
            (20, CellOutcome::abandoned(101)),
        ];
        let curve = aggregate("d", &kinds, cells).unwrap();
        let order: Vec<(ClassifierKind, usize)> = curve.rows.iter().map(|r| (r.classifier, r.train_size)).collect();
        assert_eq!(
            order,
            vec![(kinds[1], 10), (kinds[1], 20), (kinds[0], 10), (kinds[0], 20)]
        );
        let sb20 = curve.row(kinds[0], 20).unwrap();
        assert!((sb20.mean_error - 0.2).abs() < 1e-15);
        assert!((sb20.sd_error - 0.02f64.sqrt()).abs() < 1e-15);
        assert_eq!((sb20.replications, sb20.redraws), (2, 101));

        let all_gone = aggregate("d", &kinds, vec![(5, CellOutcome::abandoned(3))]);
        assert!(all_gone.is_err());
    }
}
