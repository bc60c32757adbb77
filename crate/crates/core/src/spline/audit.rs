//! Finite-difference verification of returned spline fits.

use nalgebra::DVector;

use super::fit::{log1p_exp, PenalizedSplineFit, Problem};
use super::penalty::curvature_penalty;
use crate::error::Result;

/// Outcome of checking one fit against central differences of its objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub converged: bool,
    /// Analytic score infinity norm at the fit.
    pub score_norm: f64,
    /// `max_j |fd_j − g_j| / max(‖g‖∞, 1)` at the fitted coefficients.
    pub rel_err_at_fit: f64,
    /// Same, at a perturbed point where the gradient is far from zero.
    pub rel_err_perturbed: f64,
}

impl GradientCheck {
    pub fn max_rel_err(&self) -> f64 {
        self.rel_err_at_fit.max(self.rel_err_perturbed)
    }
}

/// Compares the analytic penalized score against central differences of an
/// objective rebuilt from dense basis rows and a fresh penalty
/// eigendecomposition, in the same eigenbasis coordinates the solver uses.
pub fn check_gradient(fit: &PenalizedSplineFit, x: &[f64], y: &[u8]) -> Result<GradientCheck> {
    let penalty = curvature_penalty(&fit.basis);
    let problem = Problem::new(&fit.basis, &penalty, x, y)?;
    let (rotation, eigenvalues) = penalty.eigen();
    let rows: Vec<DVector<f64>> = x
        .iter()
        .map(|&xi| rotation.tr_mul(&DVector::from_vec(fit.basis.evaluate(xi))))
        .collect();
    let objective = |beta: &[f64]| -> f64 {
        let b = DVector::from_column_slice(beta);
        let nll: f64 = rows
            .iter()
            .zip(y)
            .map(|(r, &yi)| {
                let eta = r.dot(&b);
                log1p_exp(eta) - f64::from(yi) * eta
            })
            .sum();
        let pen: f64 = eigenvalues.iter().zip(beta).map(|(d, b)| d * b * b).sum();
        nll + fit.lambda * pen
    };
    let compare = |beta: &[f64]| -> f64 {
        let g = problem.gradient(beta, fit.lambda);
        let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for j in 0..beta.len() {
            let h = 1e-5 * beta[j].abs().max(1.0);
            let mut plus = beta.to_vec();
            let mut minus = beta.to_vec();
            plus[j] += h;
            minus[j] -= h;
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
            worst = worst.max((fd - g[j]).abs() / scale);
        }
        worst
    };
    let beta = &fit.working_coefficients;
    let perturbed: Vec<f64> = beta
        .iter()
        .enumerate()
        .map(|(j, v)| v + if j % 2 == 0 { 0.3 } else { -0.2 })
        .collect();
    Ok(GradientCheck {
        converged: fit.converged,
        score_norm: problem.gradient(beta, fit.lambda).iter().fold(0.0f64, |m, v| m.max(v.abs())),
        rel_err_at_fit: compare(beta),
        rel_err_perturbed: compare(&perturbed),
    })
}

/// Running summary over many [`GradientCheck`]s.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradientAudit {
    pub fits: usize,
    pub converged: usize,
    /// Worst score norm among converged fits.
    pub max_score_norm: f64,
    /// Worst finite-difference disagreement among converged fits.
    pub max_rel_err: f64,
}

impl GradientAudit {
    pub fn record(&mut self, check: &GradientCheck) {
        self.fits += 1;
        if check.converged {
            self.converged += 1;
            self.max_score_norm = self.max_score_norm.max(check.score_norm);
            self.max_rel_err = self.max_rel_err.max(check.max_rel_err());
        }
    }

    pub fn merge(&mut self, other: &GradientAudit) {
        self.fits += other.fits;
        self.converged += other.converged;
        self.max_score_norm = self.max_score_norm.max(other.max_score_norm);
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
    }
}
