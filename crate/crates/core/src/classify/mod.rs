//! Naive Bayes, logistic regression and Smart Bayes behind one interface,
//! plus the JSON model file.

mod logistic;
mod naive_bayes;
mod persist;
mod smart_bayes;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use logistic::{deviance, fit_logistic, predict_logistic, LogisticModel, LogisticOptions};
pub use naive_bayes::{fit_naive_bayes, predict_naive_bayes, GaussianMarginal, NaiveBayesModel, VarianceMode};
pub use persist::{load_model, model_from_json, model_to_json, save_model, SCHEMA_VERSION};
pub use smart_bayes::{fit_smart_bayes, predict_smart_bayes, SmartBayesModel, SmartBayesOptions};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Labels and log-odds scores; a score of exactly zero goes to Class 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub predicted: Vec<u8>,
    pub scores: Vec<f64>,
}

impl PredictionResult {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        Self {
            predicted: scores.iter().map(|&s| u8::from(s >= 0.0)).collect(),
            scores,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "nb")]
    NaiveBayes,
    #[serde(rename = "lr")]
    Logistic,
    #[serde(rename = "sb")]
    SmartBayes,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [Self::NaiveBayes, Self::Logistic, Self::SmartBayes];

    /// Upper-case label used in curve files.
    pub fn label(self) -> &'static str {
        match self {
            Self::NaiveBayes => "NB",
            Self::Logistic => "LR",
            Self::SmartBayes => "SB",
        }
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nb" => Ok(Self::NaiveBayes),
            "lr" => Ok(Self::Logistic),
            "sb" => Ok(Self::SmartBayes),
            other => Err(Error::InvalidParameter(format!("unknown classifier `{other}` (expected nb, lr or sb)"))),
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Settings for every classifier, so one value can drive a benchmark.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelOptions {
    pub nb_variance: VarianceMode,
    pub logistic: LogisticOptions,
    pub smart: SmartBayesOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    NaiveBayes(NaiveBayesModel),
    Logistic(LogisticModel),
    SmartBayes(SmartBayesModel),
}

impl Model {
    pub fn fit(kind: ClassifierKind, ds: &Dataset, opts: &ModelOptions) -> Result<Self> {
        Ok(match kind {
            ClassifierKind::NaiveBayes => Self::NaiveBayes(fit_naive_bayes(ds, opts.nb_variance)?),
            ClassifierKind::Logistic => Self::Logistic(fit_logistic(ds.features(), ds.labels(), &opts.logistic)?),
            ClassifierKind::SmartBayes => Self::SmartBayes(fit_smart_bayes(ds, &opts.smart)?),
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::NaiveBayes(_) => ClassifierKind::NaiveBayes,
            Self::Logistic(_) => ClassifierKind::Logistic,
            Self::SmartBayes(_) => ClassifierKind::SmartBayes,
        }
    }

    pub fn scores(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        match self {
            Self::NaiveBayes(m) => m.scores(x),
            Self::Logistic(m) => m.scores(x),
            Self::SmartBayes(m) => m.scores(x),
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<PredictionResult> {
        Ok(PredictionResult::from_scores(self.scores(x)?))
    }

    /// Separation cap hit or ratio fallback.
    pub fn flagged(&self) -> bool {
        match self {
            Self::NaiveBayes(_) => false,
            Self::Logistic(m) => m.separated,
            Self::SmartBayes(m) => m.flagged(),
        }
    }
}

/// A model together with the names of the columns it reads, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub columns: Vec<String>,
    pub model: Model,
}

impl FittedModel {
    pub fn fit(kind: ClassifierKind, ds: &Dataset, opts: &ModelOptions) -> Result<Self> {
        Ok(Self {
            columns: ds.column_names().to_vec(),
            model: Model::fit(kind, ds, opts)?,
        })
    }
}
