//! Unpenalized logistic regression by IRLS.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::PredictionResult;
use crate::error::{Error, Result};
use crate::spline::{log1p_exp, sigmoid};

const MAX_HALVINGS: usize = 50;

/// Newton steps larger than this, relative to the coefficients, block
/// convergence.
const STEP_TOLERANCE: f64 = 1e-3;

/// A column whose residual, after projection on the intercept and the
/// earlier kept columns, is below this fraction of its centered norm is
/// treated as aliased.
const ALIAS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticOptions {
    pub max_iterations: usize,
    pub score_tolerance: f64,
    /// Largest allowed magnitude of any coefficient on the standardized
    /// scale. Crossing it is taken as separation.
    pub cap: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            score_tolerance: 1e-8,
            cap: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    #[serde(with = "crate::real_string")]
    pub intercept: f64,
    /// One entry per input column; aliased columns hold zero.
    #[serde(with = "crate::real_string::vec")]
    pub coefficients: Vec<f64>,
    /// Input columns dropped as linear combinations of earlier ones.
    #[serde(default)]
    pub aliased: Vec<usize>,
    pub converged: bool,
    /// The coefficients were capped after diverging.
    #[serde(default)]
    pub separated: bool,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn scores(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                found: x.ncols(),
            });
        }
        Ok((0..x.nrows())
            .map(|i| {
                self.coefficients
                    .iter()
                    .enumerate()
                    .fold(self.intercept, |s, (j, c)| s + c * x[(i, j)])
            })
            .collect())
    }

    pub fn probabilities(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.scores(x)?.into_iter().map(sigmoid).collect())
    }
}

pub fn predict_logistic(model: &LogisticModel, x_new: &DMatrix<f64>) -> Result<PredictionResult> {
    Ok(PredictionResult::from_scores(model.scores(x_new)?))
}

/// Binomial deviance `2 Σ [log(1 + e^s) − y s]` of log-odds scores.
pub fn deviance(scores: &[f64], y: &[u8]) -> f64 {
    2.0 * scores
        .iter()
        .zip(y)
        .map(|(&s, &v)| log1p_exp(s) - f64::from(v) * s)
        .sum::<f64>()
}

/// Standardized design: intercept column plus the kept columns, centered
/// and scaled to unit population standard deviation.
struct Design {
    matrix: DMatrix<f64>,
    kept: Vec<usize>,
    aliased: Vec<usize>,
    means: Vec<f64>,
    scales: Vec<f64>,
}

fn standardized_design(x: &DMatrix<f64>) -> Design {
    let n = x.nrows();
    let mut columns: Vec<DVector<f64>> = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let (mut kept, mut aliased, mut means, mut scales) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let mean = col.mean();
        let centered = col.add_scalar(-mean);
        let norm = centered.norm();
        let scale = norm / (n as f64).sqrt();
        let mut residual = centered.clone();
        // Centered columns are already orthogonal to the intercept.
        for q in &basis {
            let proj = q.dot(&residual);
            residual.axpy(-proj, q, 1.0);
        }
        let max_abs = col.amax().max(1e-300);
        if norm <= ALIAS_TOLERANCE * max_abs * (n as f64).sqrt() || residual.norm() <= ALIAS_TOLERANCE * norm {
            aliased.push(j);
            continue;
        }
        basis.push(&residual / residual.norm());
        columns.push(centered / scale);
        kept.push(j);
        means.push(mean);
        scales.push(scale);
    }
    let mut matrix = DMatrix::from_element(n, kept.len() + 1, 1.0);
    for (k, c) in columns.iter().enumerate() {
        matrix.set_column(k + 1, c);
    }
    Design {
        matrix,
        kept,
        aliased,
        means,
        scales,
    }
}

fn neg_log_likelihood(eta: &DVector<f64>, y: &DVector<f64>) -> f64 {
    eta.iter().zip(y.iter()).map(|(&e, &v)| log1p_exp(e) - v * e).sum()
}

/// Maximum likelihood by Newton iterations with step halving, run on a
/// standardized design. Divergence past the cap stops the fit, flags it and
/// rescales the standardized coefficients so the largest sits on the cap.
pub fn fit_logistic(x: &DMatrix<f64>, y: &[u8], opts: &LogisticOptions) -> Result<LogisticModel> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    if x.ncols() == 0 {
        return Err(Error::InvalidParameter("logistic regression needs at least one column".into()));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::NonBinaryLabels(bad.to_string()));
    }
    let n1 = y.iter().filter(|&&v| v == 1).count();
    if n1 == 0 || n1 == y.len() {
        return Err(Error::SingleClass(1));
    }

    let design = standardized_design(x);
    let d = &design.matrix;
    let yv = DVector::from_iterator(y.len(), y.iter().map(|&v| f64::from(v)));
    let dim = d.ncols();

    let mut theta = DVector::zeros(dim);
    theta[0] = (n1 as f64 / (y.len() - n1) as f64).ln();
    let mut eta = d * &theta;
    let mut objective = neg_log_likelihood(&eta, &yv);
    let mut converged = false;
    let mut separated = false;
    let mut iterations = 0;

    loop {
        let p = eta.map(sigmoid);
        let score = d.tr_mul(&(&yv - &p));
        let mut weighted = d.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= p[i] * (1.0 - p[i]);
        }
        let info = d.tr_mul(&weighted);
        let step = solve_spd(&info, &score)?;
        // Under separation the score vanishes while Newton keeps taking
        // unit-sized steps, so a small score alone is not convergence.
        if score.amax() <= opts.score_tolerance && step.amax() <= STEP_TOLERANCE * (1.0 + theta.amax()) {
            converged = true;
            break;
        }
        if iterations == opts.max_iterations {
            break;
        }
        iterations += 1;

        let slack = 1e-13 * (1.0 + objective.abs());
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let candidate = &theta + &step * t;
            let candidate_eta = d * &candidate;
            let value = neg_log_likelihood(&candidate_eta, &yv);
            if value <= objective + slack {
                theta = candidate;
                eta = candidate_eta;
                objective = value.min(objective);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let largest = theta.amax();
        if largest > opts.cap {
            theta *= opts.cap / largest;
            separated = true;
            break;
        }
    }

    let mut coefficients = vec![0.0; x.ncols()];
    let mut intercept = theta[0];
    for (k, &j) in design.kept.iter().enumerate() {
        let slope = theta[k + 1] / design.scales[k];
        coefficients[j] = slope;
        intercept -= slope * design.means[k];
    }
    if !design.aliased.is_empty() {
        log::debug!("dropped aliased columns {:?}", design.aliased);
    }
    Ok(LogisticModel {
        intercept,
        coefficients,
        aliased: design.aliased,
        converged,
        separated,
        iterations,
    })
}

/// Cholesky solve with escalating diagonal loading for near-singular
/// information matrices.
fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    let top = a.diagonal().amax().max(1.0);
    let mut load = 1e-10 * top;
    while load <= 1e-2 * top {
        let mut m = a.clone();
        for j in 0..m.nrows() {
            m[(j, j)] += load;
        }
        if let Some(ch) = m.cholesky() {
            return Ok(ch.solve(b));
        }
        load *= 10.0;
    }
    Err(Error::SingularSystem)
}
