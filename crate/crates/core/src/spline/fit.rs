//! Penalized logistic spline fit by Newton / IRLS with step halving.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::{LocalBasis, SplineBasis};
use super::penalty::PenaltyMatrix;
use super::FitOptions;
use crate::error::{Error, Result};

const MAX_HALVINGS: usize = 50;

/// `log(1 + exp(t))` without overflow.
pub(crate) fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// One univariate fit of the log odds `η(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenalizedSplineFit {
    pub basis: SplineBasis,
    /// B-spline coefficients.
    #[serde(with = "crate::real_string::vec")]
    pub coefficients: Vec<f64>,
    /// The same fit in the orthonormal eigenbasis of the penalty, where the
    /// Newton iterations run and the score is measured.
    #[serde(with = "crate::real_string::vec")]
    pub working_coefficients: Vec<f64>,
    #[serde(with = "crate::real_string")]
    pub lambda: f64,
    #[serde(with = "crate::real_string")]
    pub edf: f64,
    #[serde(with = "crate::real_string")]
    pub deviance: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Infinity norm of the penalized score at the returned coefficients.
    #[serde(with = "crate::real_string")]
    pub score_norm: f64,
}

impl PenalizedSplineFit {
    /// `η̂` at each point: the basis expansion inside the training range,
    /// and linear continuation with the boundary slope outside it.
    pub fn predict(&self, x_new: &[f64]) -> Vec<f64> {
        x_new.iter().map(|&x| self.eta(x)).collect()
    }

    pub fn eta(&self, x: f64) -> f64 {
        let (lo, hi) = self.basis.boundary();
        let c = &self.coefficients;
        if x < lo || x > hi {
            let edge = if x < lo { lo } else { hi };
            let [value, slope] = self.basis.unit_derivatives::<2>(self.basis.to_unit(edge));
            let dx = x - edge;
            value.dot(c) + dx * slope.dot(c) / self.basis.range()
        } else {
            self.basis.local(x).dot(c)
        }
    }
}

pub fn predict_eta(fit: &PenalizedSplineFit, x_new: &[f64]) -> Vec<f64> {
    fit.predict(x_new)
}

/// The penalized negative log-likelihood
/// `Σ [log(1 + e^η_i) − y_i η_i] + λ cᵀPc` over a fixed design.
///
/// With `P = U diag(d) Uᵀ` the problem is solved for `β = Uᵀc`, where the
/// penalty is `λ Σ d_j β_j²`. In B-spline coordinates, `2λPc` at λ = 1e6
/// carries rounding noise far above any useful score tolerance.
pub(crate) struct Problem {
    rows: Vec<LocalBasis>,
    y: Vec<f64>,
    rotation: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    dim: usize,
}

pub(crate) struct Solution {
    pub coefficients: Vec<f64>,
    pub working: Vec<f64>,
    pub edf: f64,
    pub deviance: f64,
    pub converged: bool,
    pub iterations: usize,
    pub score_norm: f64,
}

impl Problem {
    pub fn new(basis: &SplineBasis, penalty: &PenaltyMatrix, x: &[f64], y: &[u8]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        let ones = y.iter().filter(|&&v| v == 1).count();
        if ones == 0 || ones == y.len() {
            return Err(Error::SingleClass(1));
        }
        let dim = basis.dimension();
        if penalty.matrix().nrows() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: penalty.matrix().nrows(),
            });
        }
        let (rotation, eigenvalues) = penalty.eigen();
        Ok(Self {
            rows: x.iter().map(|&xi| basis.local(xi)).collect(),
            y: y.iter().map(|&v| f64::from(v)).collect(),
            rotation,
            eigenvalues,
            dim,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn to_spline(&self, beta: &[f64]) -> Vec<f64> {
        (&self.rotation * DVector::from_column_slice(beta)).as_slice().to_vec()
    }

    pub fn to_working(&self, c: &[f64]) -> Vec<f64> {
        (self.rotation.transpose() * DVector::from_column_slice(c)).as_slice().to_vec()
    }

    fn neg_log_likelihood_spline(&self, c: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.y)
            .map(|(r, &y)| {
                let eta = r.dot(c);
                log1p_exp(eta) - y * eta
            })
            .sum()
    }

    fn penalty(&self, beta: &[f64]) -> f64 {
        self.eigenvalues.iter().zip(beta).map(|(d, b)| d * b * b).sum()
    }

    /// Objective as a function of the working coefficients.
    pub fn objective(&self, beta: &[f64], lambda: f64) -> f64 {
        self.neg_log_likelihood_spline(&self.to_spline(beta)) + lambda * self.penalty(beta)
    }

    /// Gradient of the objective in working coordinates and the
    /// unpenalized information `UᵀXᵀWXU`.
    fn gradient_and_information(&self, beta: &[f64], lambda: f64) -> (DVector<f64>, DMatrix<f64>) {
        let c = self.to_spline(beta);
        let mut g = DVector::zeros(self.dim);
        let mut info = DMatrix::zeros(self.dim, self.dim);
        for (r, &y) in self.rows.iter().zip(&self.y) {
            let mu = sigmoid(r.dot(&c));
            let w = mu * (1.0 - mu);
            for (a, va) in r.values.iter().enumerate() {
                g[r.first + a] += (mu - y) * va;
                for (b, vb) in r.values.iter().enumerate() {
                    info[(r.first + a, r.first + b)] += w * va * vb;
                }
            }
        }
        let ut = self.rotation.transpose();
        let mut g = &ut * g;
        for j in 0..self.dim {
            g[j] += 2.0 * lambda * self.eigenvalues[j] * beta[j];
        }
        let info = &ut * info * &self.rotation;
        (g, info)
    }

    pub fn gradient(&self, beta: &[f64], lambda: f64) -> Vec<f64> {
        self.gradient_and_information(beta, lambda).0.as_slice().to_vec()
    }

    fn system(&self, info: &DMatrix<f64>, lambda: f64, ridge: f64) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let mut h = info.clone();
        let load = ridge * (1.0 + info.diagonal().amax());
        for j in 0..self.dim {
            h[(j, j)] += 2.0 * lambda * self.eigenvalues[j] + load;
        }
        h.cholesky().ok_or(Error::SingularSystem)
    }

    /// Newton iterations from the working coefficients `start`; each
    /// accepted step does not increase the objective beyond rounding.
    pub fn solve(&self, lambda: f64, start: &[f64], opts: &FitOptions) -> Result<Solution> {
        let mut beta = start.to_vec();
        let mut f = self.objective(&beta, lambda);
        let mut iterations = 0;
        let mut converged = false;
        let (mut g, mut info);
        loop {
            (g, info) = self.gradient_and_information(&beta, lambda);
            if g.amax() <= opts.score_tolerance {
                converged = true;
                break;
            }
            if iterations >= opts.max_iterations {
                break;
            }
            let step = self.system(&info, lambda, opts.ridge_floor)?.solve(&(-&g));
            let slack = 1e-13 * (1.0 + f.abs());
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
                let fc = self.objective(&cand, lambda);
                if fc.is_finite() && fc <= f + slack {
                    accepted = Some((cand, fc));
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some((cand, fc)) => {
                    beta = cand;
                    f = fc;
                    iterations += 1;
                }
                None => break,
            }
        }
        let chol = self.system(&info, lambda, opts.ridge_floor)?;
        let edf = chol.solve(&info).trace();
        let coefficients = self.to_spline(&beta);
        let deviance = 2.0 * self.neg_log_likelihood_spline(&coefficients);
        Ok(Solution {
            coefficients,
            working: beta,
            edf,
            deviance,
            converged,
            iterations,
            score_norm: g.amax(),
        })
    }

    /// Working coefficients of the constant `logit(mean y)`.
    pub fn constant_start(&self) -> Vec<f64> {
        let mean = self.y.iter().sum::<f64>() / self.n() as f64;
        self.to_working(&vec![(mean / (1.0 - mean)).ln(); self.dim])
    }

    #[cfg(test)]
    pub fn fitted(&self, c: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.dot(c)).collect()
    }
}

/// Minimizes `−Σ y_i η(x_i) + Σ log(1 + e^η(x_i)) + λ cᵀPc` over the spline
/// coefficients `c`.
///
/// A fit that hits `max_iterations` is returned with `converged == false`.
pub fn fit_penalized_logistic(
    x: &[f64],
    y: &[u8],
    basis: &SplineBasis,
    penalty: &PenaltyMatrix,
    lambda: f64,
    opts: &FitOptions,
) -> Result<PenalizedSplineFit> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let problem = Problem::new(basis, penalty, x, y)?;
    let sol = problem.solve(lambda, &problem.constant_start(), opts)?;
    Ok(into_fit(basis, lambda, sol))
}

pub(crate) fn into_fit(basis: &SplineBasis, lambda: f64, sol: Solution) -> PenalizedSplineFit {
    PenalizedSplineFit {
        basis: basis.clone(),
        coefficients: sol.coefficients,
        working_coefficients: sol.working,
        lambda,
        edf: sol.edf,
        deviance: sol.deviance,
        converged: sol.converged,
        iterations: sol.iterations,
        score_norm: sol.score_norm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::{build_basis, curvature_penalty};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn two_gaussians(per_class: usize, seed: u64) -> (Vec<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for class in [0u8, 1] {
            for _ in 0..per_class {
                let e: f64 = StandardNormal.sample(&mut rng);
                x.push(e + f64::from(class));
                y.push(class);
            }
        }
        (x, y)
    }

    #[test]
    fn duplicated_x_across_classes_gives_constant() {
        // Every x appears once with y = 1 and twice with y = 0, so the
        // unpenalized optimum is already the constant logit(1/3).
        let base: Vec<f64> = (0..60).map(|i| (f64::from(i) * 0.7).sin() * 3.0).collect();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for &v in &base {
            x.extend([v, v, v]);
            y.extend([1, 0, 0]);
        }
        let basis = build_basis(&x, 10).unwrap();
        let pen = curvature_penalty(&basis);
        let target = (1.0f64 / 2.0).ln();
        for lambda in [1e-6, 1e-2, 1.0, 1e3, 1e6] {
            let fit = fit_penalized_logistic(&x, &y, &basis, &pen, lambda, &FitOptions::default()).unwrap();
            assert!(fit.converged);
            let grid: Vec<f64> = (0..50).map(|i| -3.0 + 6.0 * f64::from(i) / 49.0).collect();
            let dev = fit.predict(&grid).iter().map(|e| (e - target).abs()).fold(0.0, f64::max);
            assert!(dev <= 1e-3, "lambda {lambda}: deviation {dev}");
        }
    }

    #[test]
    fn huge_lambda_is_linear() {
        let (x, y) = two_gaussians(300, 11);
        let basis = build_basis(&x, 10).unwrap();
        let pen = curvature_penalty(&basis);
        let fit = fit_penalized_logistic(&x, &y, &basis, &pen, 1e6, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let (lo, hi) = basis.boundary();
        let grid: Vec<f64> = (0..50).map(|i| lo + (hi - lo) * f64::from(i) / 49.0).collect();
        let eta = fit.predict(&grid);
        assert!(max_line_deviation(&grid, &eta) <= 1e-4);
    }

    pub(crate) fn max_line_deviation(x: &[f64], f: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let mf = f.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(f).map(|(a, b)| (a - mx) * (b - mf)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let slope = sxy / sxx;
        x.iter()
            .zip(f)
            .map(|(a, b)| (b - (mf + slope * (a - mx))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn objective_never_increases_along_iterations() {
        let (x, y) = two_gaussians(200, 3);
        let basis = build_basis(&x, 10).unwrap();
        let pen = curvature_penalty(&basis);
        let problem = Problem::new(&basis, &pen, &x, &y).unwrap();
        let mut c = problem.constant_start();
        let mut f = problem.objective(&c, 0.01);
        // Drive one iteration at a time.
        for _ in 0..15 {
            let opts = FitOptions {
                max_iterations: 1,
                ..FitOptions::default()
            };
            let sol = problem.solve(0.01, &c, &opts).unwrap();
            let f_new = problem.objective(&sol.working, 0.01);
            assert!(f_new <= f + 1e-12 * f.abs());
            c = sol.working;
            f = f_new;
        }
    }

    #[test]
    fn predictions_and_extrapolation() {
        let (x, y) = two_gaussians(150, 5);
        let basis = build_basis(&x, 10).unwrap();
        let pen = curvature_penalty(&basis);
        let fit = fit_penalized_logistic(&x, &y, &basis, &pen, 0.1, &FitOptions::default()).unwrap();
        let problem = Problem::new(&basis, &pen, &x, &y).unwrap();
        assert_eq!(fit.predict(&x), problem.fitted(&fit.coefficients));
        let dense = basis.design_matrix(&x) * DVector::from_column_slice(&fit.coefficients);
        for (a, b) in fit.predict(&x).iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-12);
        }

        let (lo, hi) = basis.boundary();
        let [_, slope] = basis.unit_derivatives::<2>(1.0);
        let d_hi = slope.dot(&fit.coefficients) / basis.range();
        let delta = 2.5;
        assert!((fit.eta(hi + delta) - (fit.eta(hi) + delta * d_hi)).abs() < 1e-12);
        assert!((fit.eta(hi + 1e-9) - fit.eta(hi)).abs() <= 1e-6);
        assert!((fit.eta(lo - 1e-9) - fit.eta(lo)).abs() <= 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let basis = build_basis(&x, 4).unwrap();
        let pen = curvature_penalty(&basis);
        let opts = FitOptions::default();
        assert!(fit_penalized_logistic(&x, &[1; 20], &basis, &pen, 1.0, &opts).is_err());
        let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        assert!(fit_penalized_logistic(&x, &y[..10], &basis, &pen, 1.0, &opts).is_err());
        assert!(fit_penalized_logistic(&x, &y, &basis, &pen, 0.0, &opts).is_err());
    }

    #[test]
    fn separated_data_is_flagged_not_fatal() {
        let x: Vec<f64> = (0..40).map(f64::from).collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let basis = build_basis(&x, 6).unwrap();
        let pen = curvature_penalty(&basis);
        let opts = FitOptions {
            max_iterations: 30,
            ..FitOptions::default()
        };
        // The affine direction is unpenalized, so the slope may grow until
        // the score underflows the tolerance; either outcome is returned.
        let fit = fit_penalized_logistic(&x, &y, &basis, &pen, 1.0, &opts).unwrap();
        assert!(fit.converged || fit.iterations == 30);
        assert!(fit.coefficients.iter().all(|c| c.is_finite()));
        assert!(fit.eta(39.0) > 0.0 && fit.eta(0.0) < 0.0);
    }
}
