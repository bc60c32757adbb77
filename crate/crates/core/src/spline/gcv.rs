use super::basis::SplineBasis;
use super::fit::{into_fit, PenalizedSplineFit, Problem};
use super::penalty::PenaltyMatrix;
use super::FitOptions;
use crate::error::{Error, Result};

/// Deviance-based GCV, `n·D / (n − edf)²`; infinite once `edf ≥ n`.
pub fn gcv_score(fit: &PenalizedSplineFit, n: usize) -> f64 {
    let n = n as f64;
    if fit.edf >= n {
        return f64::INFINITY;
    }
    n * fit.deviance / (n - fit.edf).powi(2)
}

/// Fits along the whole grid, aligned with the ascending `opts.lambda_grid`.
#[derive(Debug, Clone)]
pub struct LambdaPath {
    pub lambdas: Vec<f64>,
    pub fits: Vec<Option<PenalizedSplineFit>>,
    pub gcv: Vec<f64>,
}

impl LambdaPath {
    /// Grid index with minimal GCV; ties go to the larger λ.
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, score) in self.gcv.iter().enumerate() {
            if self.fits[i].is_none() || score.is_nan() {
                continue;
            }
            match best {
                Some(b) if *score > self.gcv[b] => {}
                _ => best = Some(i),
            }
        }
        best
    }
}

/// Fits every grid value from the largest λ down, warm-starting each fit at
/// the previous solution.
pub fn lambda_path(
    x: &[f64],
    y: &[u8],
    basis: &SplineBasis,
    penalty: &PenaltyMatrix,
    opts: &FitOptions,
) -> Result<LambdaPath> {
    opts.validate()?;
    let problem = Problem::new(basis, penalty, x, y)?;
    let n = problem.n();
    let count = opts.lambda_grid.len();
    let mut fits = vec![None; count];
    let mut gcv = vec![f64::INFINITY; count];
    let mut start = problem.constant_start();
    for i in (0..count).rev() {
        let lambda = opts.lambda_grid[i];
        match problem.solve(lambda, &start, opts) {
            Ok(sol) => {
                let fit = into_fit(basis, lambda, sol);
                start.clone_from(&fit.working_coefficients);
                gcv[i] = gcv_score(&fit, n);
                fits[i] = Some(fit);
            }
            Err(e) => log::debug!("lambda {lambda}: {e}"),
        }
    }
    Ok(LambdaPath {
        lambdas: opts.lambda_grid.clone(),
        fits,
        gcv,
    })
}

/// The GCV-optimal fit over `opts.lambda_grid`.
pub fn select_lambda(
    x: &[f64],
    y: &[u8],
    basis: &SplineBasis,
    penalty: &PenaltyMatrix,
    opts: &FitOptions,
) -> Result<PenalizedSplineFit> {
    let mut path = lambda_path(x, y, basis, penalty, opts)?;
    let best = path.best_index().ok_or(Error::AllFitsFailed)?;
    Ok(path.fits[best].take().expect("best index has a fit"))
}
