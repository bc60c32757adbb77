//! Multivariate normal and t samplers and the two-class simulation driver.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bench::{aggregate, evaluate_split, thread_pool, CellOutcome, LearningCurve};
use crate::classify::{ClassifierKind, ModelOptions};
use crate::dataset::{split, Dataset, SplitMode, SplitSpec};
use crate::error::{Error, Result};
use crate::spline::GradientAudit;

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` at training size `m`. Each cell depends only on
/// its own coordinates, so adding sizes or replications leaves existing
/// cells unchanged.
pub fn replication_seed(master: u64, m: usize, rep: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ m as u64) ^ rep as u64)
}

/// A further seed for stream `stream` of one replication (sampling, splits,
/// redraws).
pub fn derived_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvParams {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Degrees of freedom of a multivariate t; `None` for a normal.
    pub df: Option<f64>,
}

impl MvParams {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>, df: Option<f64>) -> Result<Self> {
        let p = mean.len();
        if p == 0 || covariance.shape() != (p, p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: covariance.nrows(),
            });
        }
        let scale = covariance.amax().max(f64::MIN_POSITIVE);
        if (&covariance - covariance.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidParameter("covariance is not symmetric".into()));
        }
        if let Some(d) = df {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidParameter(format!("degrees of freedom must be positive, got {d}")));
            }
        }
        Ok(Self { mean, covariance, df })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Cholesky factor, adding `1e-10·trace/p` to the diagonal and growing it
    /// tenfold up to `1e-8·trace/p` when the plain factorization fails.
    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        if let Some(ch) = self.covariance.clone().cholesky() {
            return Ok(ch);
        }
        let p = self.dim() as f64;
        let base = (self.covariance.trace() / p).max(f64::MIN_POSITIVE);
        for factor in [1e-10, 1e-9, 1e-8] {
            let mut c = self.covariance.clone();
            for j in 0..self.dim() {
                c[(j, j)] += factor * base;
            }
            if let Some(ch) = c.cholesky() {
                return Ok(ch);
            }
        }
        Err(Error::CholeskyFailed)
    }
}

/// `count` rows drawn as `μ + Lε`, divided by `sqrt(W/df)` with one
/// chi-square `W` per row for the t family.
pub fn sample_mv(params: &MvParams, count: usize, seed: u64) -> Result<DMatrix<f64>> {
    let l = params.cholesky()?.l();
    let p = params.dim();
    let chi = params
        .df
        .map(|d| ChiSquared::new(d).map(|c| (c, d)))
        .transpose()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(count, p);
    let mut eps = DVector::zeros(p);
    for i in 0..count {
        for e in eps.iter_mut() {
            *e = StandardNormal.sample(&mut rng);
        }
        let mut row = &l * &eps;
        if let Some((c, d)) = &chi {
            let w: f64 = c.sample(&mut rng);
            row /= (w / d).sqrt();
        }
        row += &params.mean;
        out.set_row(i, &row.transpose());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    pub class0: MvParams,
    pub class1: MvParams,
    /// Draws per class; the training set is half of the `2m` pooled rows.
    pub training_sizes: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    pub classifiers: Vec<ClassifierKind>,
    pub model_options: ModelOptions,
    /// Worker threads; `None` uses the global pool size.
    pub threads: Option<usize>,
    /// Split redraws allowed per replication before it is given up.
    pub max_redraws: usize,
}

impl SimulationPlan {
    pub fn new(class0: MvParams, class1: MvParams, training_sizes: Vec<usize>, replications: usize, master_seed: u64) -> Self {
        Self {
            class0,
            class1,
            training_sizes,
            replications,
            master_seed,
            classifiers: ClassifierKind::ALL.to_vec(),
            model_options: ModelOptions::default(),
            threads: None,
            max_redraws: 100,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 || self.training_sizes.is_empty() || self.classifiers.is_empty() {
            return Err(Error::Config("a plan needs sizes, replications and classifiers".into()));
        }
        if self.training_sizes.contains(&0) {
            return Err(Error::Config("training sizes must be positive".into()));
        }
        if self.class0.dim() != self.class1.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.class0.dim(),
                found: self.class1.dim(),
            });
        }
        Ok(())
    }
}

fn simulate_cell(plan: &SimulationPlan, m: usize, rep: usize, audit: bool) -> Result<CellOutcome> {
    let seed = replication_seed(plan.master_seed, m, rep);
    let x0 = sample_mv(&plan.class0, m, derived_seed(seed, 0))?;
    let x1 = sample_mv(&plan.class1, m, derived_seed(seed, 1))?;
    let features = DMatrix::from_fn(2 * m, x0.ncols(), |i, j| if i < m { x0[(i, j)] } else { x1[(i - m, j)] });
    let labels = (0..2 * m).map(|i| u8::from(i >= m)).collect();
    let names = (0..x0.ncols()).map(|j| format!("x{j}")).collect();
    let pooled = Dataset::new(features, labels, names)?;
    for attempt in 0..=plan.max_redraws {
        let spec = SplitSpec {
            train_size: m,
            seed: derived_seed(seed, 2 + attempt as u64),
            mode: SplitMode::HalfHalf,
        };
        match split(&pooled, &spec) {
            Ok((train, test)) => {
                let mut outcome = evaluate_split(&train, &test, &plan.classifiers, &plan.model_options, audit)?;
                outcome.redraws = attempt;
                return Ok(outcome);
            }
            Err(Error::DegenerateSplit) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(CellOutcome::abandoned(plan.max_redraws + 1))
}

fn run(plan: &SimulationPlan, audit: bool) -> Result<(LearningCurve, GradientAudit)> {
    plan.validate()?;
    let cells: Vec<(usize, usize)> = plan
        .training_sizes
        .iter()
        .flat_map(|&m| (0..plan.replications).map(move |r| (m, r)))
        .collect();
    let outcomes = thread_pool(plan.threads)?.install(|| {
        cells
            .par_iter()
            .map(|&(m, rep)| simulate_cell(plan, m, rep, audit))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut total = GradientAudit::default();
    for o in &outcomes {
        total.merge(&o.audit);
    }
    let sized: Vec<(usize, CellOutcome)> = cells.iter().map(|c| c.0).zip(outcomes).collect();
    Ok((aggregate("simulation", &plan.classifiers, sized)?, total))
}

/// Draws `m` rows per class for every size and replication, splits them in
/// half, trains every classifier on one half and records the error on the
/// other.
pub fn run_simulation(plan: &SimulationPlan) -> Result<LearningCurve> {
    Ok(run(plan, false)?.0)
}

/// [`run_simulation`] plus finite-difference checks of every Smart Bayes
/// spline fit.
pub fn run_simulation_audited(plan: &SimulationPlan) -> Result<(LearningCurve, GradientAudit)> {
    run(plan, true)
}

fn class_params(ds: &Dataset, class: u8) -> Result<MvParams> {
    let rows: Vec<usize> = (0..ds.n()).filter(|&i| ds.labels()[i] == class).collect();
    if rows.len() < 2 {
        return Err(Error::Empty(format!("class {class} has {} row(s); need at least 2", rows.len())));
    }
    let x = ds.features().select_rows(&rows);
    let n = rows.len() as f64;
    let mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let mut centered = x.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let mut cov = centered.tr_mul(&centered) / (n - 1.0);
    // Exact symmetry regardless of summation order.
    cov = (&cov + cov.transpose()) * 0.5;
    MvParams::new(mean, cov, None)
}

/// Per-class sample means and covariances (divisor `n − 1`) of a labeled
/// dataset.
pub fn empirical_class_params(ds: &Dataset) -> Result<(MvParams, MvParams)> {
    Ok((class_params(ds, 0)?, class_params(ds, 1)?))
}

/// A reproducible pair of class distributions in `p` dimensions with
/// different covariance structures and a modest mean shift.
///
/// Each covariance is `A Aᵀ / p + I/2` for a matrix `A` of standard normals,
/// with the coordinates of class 1 additionally rescaled by per-coordinate
/// factors in `[0.5, 2]`, so the marginal variances differ between classes.
pub fn wishart_like_params(p: usize, seed: u64) -> Result<(MvParams, MvParams)> {
    if p == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows: usize, cols: usize| DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
    let base = |a: DMatrix<f64>| {
        let mut c = &a * a.transpose() / p as f64;
        for j in 0..p {
            c[(j, j)] += 0.5;
        }
        (&c + c.transpose()) * 0.5
    };
    let cov0 = base(draw(p, p));
    let cov1_raw = base(draw(p, p));
    let shift: DMatrix<f64> = draw(p, 1);
    let factors: DMatrix<f64> = draw(p, 1);
    let scale: Vec<f64> = factors.iter().map(|f: &f64| 2f64.powf(f.tanh())).collect();
    let cov1 = DMatrix::from_fn(p, p, |i, j| cov1_raw[(i, j)] * scale[i] * scale[j]);
    let mean1 = DVector::from_iterator(p, shift.iter().map(|s| 0.5 * s));
    Ok((
        MvParams::new(DVector::zeros(p), cov0, None)?,
        MvParams::new(mean1, cov1, None)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::ClassifierKind;

    fn standard(p: usize, df: Option<f64>) -> MvParams {
        MvParams::new(DVector::zeros(p), DMatrix::identity(p, p), df).unwrap()
    }

    fn sample_cov(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = x.nrows() as f64;
        let mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
        let mut c = x.clone();
        for (j, mut col) in c.column_iter_mut().enumerate() {
            col.add_scalar_mut(-mean[j]);
        }
        (mean, c.tr_mul(&c) / (n - 1.0))
    }

    #[test]
    fn gaussian_moments() {
        let x = sample_mv(&standard(3, None), 20_000, 7).unwrap();
        let (mean, cov) = sample_cov(&x);
        assert!(mean.amax() <= 0.05, "{mean}");
        assert!((cov - DMatrix::identity(3, 3)).amax() <= 0.1);
        for j in 0..3 {
            let col = x.column(j);
            let sd = col.variance().sqrt();
            let skew = col.iter().map(|v| ((v - mean[j]) / sd).powi(3)).sum::<f64>() / x.nrows() as f64;
            assert!(skew.abs() <= 0.1, "skew {skew}");
        }
    }

    #[test]
    fn t_covariance_inflation() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let params = MvParams::new(DVector::from_vec(vec![1.0, -1.0]), sigma.clone(), Some(30.0)).unwrap();
        let (_, cov) = sample_cov(&sample_mv(&params, 40_000, 3).unwrap());
        let target = sigma * (30.0 / 28.0);
        for j in 0..2 {
            assert!((cov[(j, j)] / target[(j, j)] - 1.0).abs() <= 0.1);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = standard(4, Some(5.0));
        assert_eq!(sample_mv(&p, 50, 9).unwrap(), sample_mv(&p, 50, 9).unwrap());
        assert_ne!(sample_mv(&p, 50, 9).unwrap(), sample_mv(&p, 50, 10).unwrap());
    }

    #[test]
    fn singular_covariance_is_jittered() {
        let v = DVector::from_vec(vec![1.0, 2.0, 0.0]);
        let cov = &v * v.transpose();
        let params = MvParams::new(DVector::zeros(3), cov, None).unwrap();
        assert!(sample_mv(&params, 10, 1).is_ok());
        let negative = MvParams::new(DVector::zeros(2), DMatrix::from_diagonal_element(2, 2, -1.0), None).unwrap();
        assert!(matches!(negative.cholesky(), Err(Error::CholeskyFailed)));
        assert!(MvParams::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]), None).is_err());
    }

    #[test]
    fn empirical_params_by_hand() {
        let ds = Dataset::from_rows(&[vec![0.0, 0.0], vec![5.0, 1.0], vec![2.0, 2.0], vec![7.0, 3.0]], vec![0, 1, 0, 1]).unwrap();
        let (p0, p1) = empirical_class_params(&ds).unwrap();
        assert_eq!(p0.mean.as_slice(), &[1.0, 1.0]);
        assert_eq!(p0.covariance, DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]));
        assert_eq!(p1.mean.as_slice(), &[6.0, 2.0]);
        assert!(sample_mv(&p0, 5, 1).is_ok());
        let lonely = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![0, 1, 1]).unwrap();
        assert!(empirical_class_params(&lonely).is_err());
    }

    #[test]
    fn seeds_depend_only_on_cell() {
        assert_eq!(replication_seed(1, 100, 3), replication_seed(1, 100, 3));
        assert_ne!(replication_seed(1, 100, 3), replication_seed(1, 100, 4));
        assert_ne!(replication_seed(1, 100, 3), replication_seed(1, 200, 3));
        assert_ne!(replication_seed(1, 100, 3), replication_seed(2, 100, 3));
    }

    fn small_plan(c0: MvParams, c1: MvParams, sizes: Vec<usize>, reps: usize) -> SimulationPlan {
        SimulationPlan::new(c0, c1, sizes, reps, 2024)
    }

    #[test]
    fn identical_classes_sit_at_chance() {
        let plan = small_plan(standard(2, None), standard(2, None), vec![100], 12);
        let curve = run_simulation(&plan).unwrap();
        for row in &curve.rows {
            assert!((0.4..=0.6).contains(&row.mean_error), "{row:?}");
        }
    }

    #[test]
    fn deterministic_across_threads_and_nesting() {
        let (c0, c1) = wishart_like_params(3, 5).unwrap();
        let mut plan = small_plan(c0, c1, vec![30, 60], 4);
        plan.threads = Some(1);
        let a = run_simulation(&plan).unwrap();
        plan.threads = Some(4);
        let b = run_simulation(&plan).unwrap();
        assert_eq!(a, b);
        plan.training_sizes = vec![30];
        let c = run_simulation(&plan).unwrap();
        let at30: Vec<_> = a.rows.iter().filter(|r| r.train_size == 30).cloned().collect();
        assert_eq!(c.rows, at30);
        for row in &a.rows {
            assert!((0.0..=1.0).contains(&row.mean_error) && row.sd_error >= 0.0);
        }
    }

    #[test]
    fn audited_run_reports_spline_checks() {
        let plan = SimulationPlan {
            classifiers: vec![ClassifierKind::SmartBayes],
            ..small_plan(
                MvParams::new(DVector::zeros(1), DMatrix::identity(1, 1), None).unwrap(),
                MvParams::new(DVector::from_element(1, 2.0), DMatrix::identity(1, 1), None).unwrap(),
                vec![80],
                3,
            )
        };
        let (curve, audit) = run_simulation_audited(&plan).unwrap();
        assert_eq!(curve.rows.len(), 1);
        assert_eq!(audit.fits, 3);
        assert!(audit.max_score_norm <= 1e-8 && audit.max_rel_err <= 1e-4, "{audit:?}");
    }

    #[test]
    fn wishart_like_is_reproducible_and_valid() {
        let (a0, a1) = wishart_like_params(8, 1).unwrap();
        let (b0, b1) = wishart_like_params(8, 1).unwrap();
        assert_eq!((a0.clone(), a1.clone()), (b0, b1));
        assert!(a0.covariance.clone().cholesky().is_some());
        assert!(a1.covariance.clone().cholesky().is_some());
        assert_ne!(a0.covariance, a1.covariance);
    }
}
