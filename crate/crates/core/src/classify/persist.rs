//! Versioned JSON model files. Reals are written as decimal strings that
//! parse back to the same bits.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::logistic::LogisticModel;
use super::naive_bayes::{GaussianMarginal, NaiveBayesModel, VarianceMode};
use super::smart_bayes::SmartBayesModel;
use super::{FittedModel, Model};
use crate::error::{Error, Result};
use crate::ratio::{estimate_prior_odds, MarginalRatioModel, PriorOdds};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u64,
    columns: Vec<String>,
    prior_odds: PriorOdds,
    #[serde(flatten)]
    body: Body,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind")]
enum Body {
    #[serde(rename = "nb")]
    NaiveBayes {
        variance: VarianceMode,
        #[serde(with = "crate::real_string")]
        log_prior_odds: f64,
        features: Vec<GaussianMarginal>,
    },
    #[serde(rename = "lr")]
    Logistic { logistic: LogisticModel },
    #[serde(rename = "sb")]
    SmartBayes {
        frozen: bool,
        active: Vec<usize>,
        features: Vec<MarginalRatioModel>,
        logistic: LogisticModel,
        /// `exp(weight)` per active column, for reading only; ignored on load.
        #[serde(default, skip_deserializing)]
        odds_ratio_per_unit_z: Vec<OddsRatio>,
    },
}

#[derive(Serialize, Deserialize, Default)]
struct OddsRatio {
    column: String,
    #[serde(with = "crate::real_string")]
    value: f64,
}

/// Logistic models do not keep the class counts; they are stored only as
/// context, so a balanced placeholder is used when they are unknown.
fn placeholder_odds() -> PriorOdds {
    estimate_prior_odds(&[0, 1]).expect("both classes")
}

pub fn model_to_json(fitted: &FittedModel) -> Result<String> {
    let (prior_odds, body) = match &fitted.model {
        Model::NaiveBayes(m) => (
            m.prior_odds,
            Body::NaiveBayes {
                variance: m.variance,
                log_prior_odds: m.log_prior_odds,
                features: m.marginals.clone(),
            },
        ),
        Model::Logistic(m) => (placeholder_odds(), Body::Logistic { logistic: m.clone() }),
        Model::SmartBayes(m) => (
            m.ratio_models.first().map_or_else(placeholder_odds, |r| r.prior_odds),
            Body::SmartBayes {
                frozen: m.frozen,
                active: m.active.clone(),
                features: m.ratio_models.clone(),
                logistic: m.logistic.clone(),
                odds_ratio_per_unit_z: m
                    .odds_ratio_per_unit_z()
                    .into_iter()
                    .map(|(j, value)| OddsRatio {
                        column: fitted.columns.get(j).cloned().unwrap_or_default(),
                        value,
                    })
                    .collect(),
            },
        ),
    };
    let file = ModelFile {
        schema_version: SCHEMA_VERSION,
        columns: fitted.columns.clone(),
        prior_odds,
        body,
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::MalformedModel(e.to_string()))
}

pub fn model_from_json(text: &str) -> Result<FittedModel> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::MalformedModel(e.to_string()))?;
    let version = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::MalformedModel("missing schema_version".into()))?;
    if version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: version,
            expected: SCHEMA_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::MalformedModel(e.to_string()))?;
    let width = file.columns.len();
    let model = match file.body {
        Body::NaiveBayes {
            variance,
            log_prior_odds,
            features,
        } => Model::NaiveBayes(NaiveBayesModel {
            prior_odds: file.prior_odds,
            log_prior_odds,
            variance,
            marginals: features,
        }),
        Body::Logistic { logistic } => Model::Logistic(logistic),
        Body::SmartBayes {
            frozen,
            active,
            features,
            logistic,
            ..
        } => {
            if active.len() != logistic.coefficients.len() || active.iter().any(|&j| j >= features.len()) {
                return Err(Error::MalformedModel("active columns disagree with the logistic block".into()));
            }
            Model::SmartBayes(SmartBayesModel {
                ratio_models: features,
                active,
                logistic,
                frozen,
            })
        }
    };
    let expected = match &model {
        Model::NaiveBayes(m) => m.marginals.len(),
        Model::Logistic(m) => m.coefficients.len(),
        Model::SmartBayes(m) => m.ratio_models.len(),
    };
    if expected != width {
        return Err(Error::MalformedModel(format!("{width} column names for a {expected}-column model")));
    }
    Ok(FittedModel {
        columns: file.columns,
        model,
    })
}

pub fn save_model(fitted: &FittedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = model_to_json(fitted)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FittedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
