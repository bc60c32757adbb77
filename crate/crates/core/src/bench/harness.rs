//! Learning curves on a fixed dataset: `m` random training rows, the rest
//! for testing.

use std::path::PathBuf;

use rayon::prelude::*;

use super::{aggregate, evaluate_split, thread_pool, CellOutcome, LearningCurve};
use crate::classify::{ClassifierKind, ModelOptions};
use crate::dataset::{load_csv, preprocess, split, Dataset, LabelMap, LabelMode, Loaded, PreprocessRule, SplitMode, SplitSpec};
use crate::error::{Error, Result};
use crate::simulate::{derived_seed, replication_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct DataSource {
    pub path: PathBuf,
    pub label_column: String,
    pub label_map: Option<LabelMap>,
    pub preprocess: PreprocessRule,
}

/// Loads a CSV and applies the preprocessing rule. Rules that derive labels
/// from a response column read that column as a feature first; the declared
/// label column is then dropped if it is a different column.
pub fn load_dataset(source: &DataSource) -> Result<Loaded> {
    match source.preprocess.response_column() {
        Some(response) => {
            let loaded = load_csv(&source.path, response, &LabelMode::Response)?;
            let mut ds = preprocess(&loaded.dataset, &source.preprocess)?;
            if source.label_column != response {
                if let Some(k) = ds.column_index(&source.label_column) {
                    let keep: Vec<usize> = (0..ds.p()).filter(|&j| j != k).collect();
                    ds = ds.select_columns(&keep)?;
                }
            }
            if !ds.has_both_classes() {
                return Err(Error::SingleClass(1));
            }
            Ok(Loaded {
                dataset: ds,
                report: loaded.report,
            })
        }
        None => {
            let loaded = load_csv(
                &source.path,
                &source.label_column,
                &LabelMode::Binary(source.label_map.clone()),
            )?;
            Ok(Loaded {
                dataset: preprocess(&loaded.dataset, &source.preprocess)?,
                report: loaded.report,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub dataset_name: String,
    /// `None` uses [`default_training_sizes`].
    pub training_sizes: Option<Vec<usize>>,
    pub replications: usize,
    pub master_seed: u64,
    pub classifiers: Vec<ClassifierKind>,
    pub model_options: ModelOptions,
    pub threads: Option<usize>,
    pub max_redraws: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dataset_name: "dataset".into(),
            training_sizes: None,
            replications: 200,
            master_seed: 0,
            classifiers: ClassifierKind::ALL.to_vec(),
            model_options: ModelOptions::default(),
            threads: None,
            max_redraws: 100,
        }
    }
}

/// Eight geometrically spaced sizes from `2(p + 2)` to 70% of `n`.
pub fn default_training_sizes(n: usize, p: usize) -> Result<Vec<usize>> {
    let lo = 2 * (p + 2);
    let hi = n * 7 / 10;
    if hi < lo || hi >= n {
        return Err(Error::Config(format!(
            "{n} rows are too few for a size ladder starting at {lo}"
        )));
    }
    let ratio = hi as f64 / lo as f64;
    let mut sizes: Vec<usize> = (0..8)
        .map(|i| (lo as f64 * ratio.powf(i as f64 / 7.0)).round() as usize)
        .collect();
    sizes.dedup();
    Ok(sizes)
}

fn bench_cell(ds: &Dataset, cfg: &BenchConfig, m: usize, rep: usize) -> Result<CellOutcome> {
    let seed = replication_seed(cfg.master_seed, m, rep);
    for attempt in 0..=cfg.max_redraws {
        let spec = SplitSpec {
            train_size: m,
            seed: derived_seed(seed, attempt as u64),
            mode: SplitMode::RandomMRestTest,
        };
        match split(ds, &spec) {
            Ok((train, test)) => {
                let mut outcome = evaluate_split(&train, &test, &cfg.classifiers, &cfg.model_options, false)?;
                outcome.redraws = attempt;
                return Ok(outcome);
            }
            Err(Error::DegenerateSplit) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(CellOutcome::abandoned(cfg.max_redraws + 1))
}

pub fn run_benchmark_on(ds: &Dataset, cfg: &BenchConfig) -> Result<LearningCurve> {
    if cfg.replications == 0 || cfg.classifiers.is_empty() {
        return Err(Error::Config("need at least one replication and one classifier".into()));
    }
    let sizes = match &cfg.training_sizes {
        Some(s) => s.clone(),
        None => default_training_sizes(ds.n(), ds.p())?,
    };
    if sizes.is_empty() {
        return Err(Error::Config("no training sizes".into()));
    }
    if let Some(&bad) = sizes.iter().find(|&&m| m == 0 || m >= ds.n()) {
        return Err(Error::Config(format!(
            "training size {bad} must lie in 1..{} for this dataset",
            ds.n()
        )));
    }
    let cells: Vec<(usize, usize)> = sizes
        .iter()
        .flat_map(|&m| (0..cfg.replications).map(move |r| (m, r)))
        .collect();
    let outcomes = thread_pool(cfg.threads)?.install(|| {
        cells
            .par_iter()
            .map(|&(m, rep)| bench_cell(ds, cfg, m, rep))
            .collect::<Result<Vec<_>>>()
    })?;
    let sized = cells.iter().map(|c| c.0).zip(outcomes).collect();
    aggregate(&cfg.dataset_name, &cfg.classifiers, sized)
}

pub fn run_benchmark(source: &DataSource, cfg: &BenchConfig) -> Result<LearningCurve> {
    let loaded = load_dataset(source)?;
    if loaded.report.dropped_rows > 0 {
        log::info!("dropped {} incomplete row(s)", loaded.report.dropped_rows);
    }
    run_benchmark_on(&loaded.dataset, cfg)
}
