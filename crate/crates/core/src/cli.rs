//! Command-line front end. Results go to files, diagnostics to stderr.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or runtime error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{emit_curve_csv, emit_svg_plot, flags_csv, parse_curve_csv, run_benchmark, BenchConfig, DataSource, LearningCurve};
use crate::classify::{load_model, save_model, ClassifierKind, FittedModel, ModelOptions};
use crate::dataset::{load_features, LabelMap, PreprocessRule};
use crate::error::{Error, Result};
use crate::ratio::{eval_log_ratio, fit_marginal_ratio, RatioKind, RatioOptions};
use crate::simulate::{derived_seed, empirical_class_params, run_simulation, wishart_like_params, MvParams, SimulationPlan};

#[derive(Debug, Parser)]
#[command(name = "smartbayes", version, about = "Naive Bayes, logistic regression and Smart Bayes classifiers with learning-curve tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learning curves on a CSV dataset.
    Bench(BenchArgs),
    /// Learning curves on simulated two-class data.
    Simulate(SimulateArgs),
    /// Fit one classifier and save it as JSON.
    Fit(FitArgs),
    /// Score a CSV with a saved model.
    Predict(PredictArgs),
    /// Tabulate the estimated log-density ratio of one feature.
    Ratio(RatioArgs),
    /// Draw a curve CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct LabelArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the label column.
    #[arg(long = "label-col")]
    label_col: String,
    /// Label values for Class 0 and Class 1, as NEG:POS.
    #[arg(long = "label-map")]
    label_map: Option<LabelMap>,
    /// none, drop-noncontinuous[:N], quartile-filter:COL or median-binarize:COL.
    #[arg(long, default_value = "none")]
    preprocess: PreprocessRule,
}

impl LabelArgs {
    fn source(&self) -> DataSource {
        DataSource {
            path: self.data.clone(),
            label_column: self.label_col.clone(),
            label_map: self.label_map.clone(),
            preprocess: self.preprocess.clone(),
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Comma-separated training sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Replications per training size.
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Curve CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Optional SVG plot output.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Optional CSV of degraded-fit counts per cell.
    #[arg(long)]
    flags: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    data: LabelArgs,
    /// Comma-separated subset of nb, lr, sb.
    #[arg(long, value_delimiter = ',', default_value = "nb,lr,sb")]
    classifiers: Vec<ClassifierKind>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dist {
    Gaussian,
    T,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    dist: Dist,
    /// Degrees of freedom of the t distribution.
    #[arg(long, default_value_t = 5.0)]
    df: f64,
    /// Dimension; with --params-from, the leading columns kept.
    #[arg(long)]
    p: Option<usize>,
    /// CSV whose per-class means and covariances define the classes.
    #[arg(long = "params-from", requires = "label_col")]
    params_from: Option<PathBuf>,
    /// Label column of the --params-from file.
    #[arg(long = "label-col")]
    label_col: Option<String>,
    #[arg(long = "label-map")]
    label_map: Option<LabelMap>,
    #[arg(long, value_delimiter = ',', default_value = "nb,lr,sb")]
    classifiers: Vec<ClassifierKind>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: LabelArgs,
    /// nb, lr or sb.
    #[arg(long)]
    model: ClassifierKind,
    /// Marginal ratio estimator for sb.
    #[arg(long, default_value = "spline")]
    ratio: RatioKind,
    /// Keep unit weights in sb instead of fitting them.
    #[arg(long)]
    frozen: bool,
    /// Model JSON output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// CSV output with columns row,score,predicted.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Grid {
    min: f64,
    max: f64,
    steps: usize,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || format!("expected MIN:MAX:STEPS, got `{s}`");
        if parts.len() != 3 {
            return Err(bad());
        }
        let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(min.is_finite() && max.is_finite()) || max < min || steps == 0 {
            return Err(bad());
        }
        Ok(Self { min, max, steps })
    }
}

impl Grid {
    /// `steps` evenly spaced points from `min` to `max`.
    fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        (0..self.steps)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Args)]
struct RatioArgs {
    #[command(flatten)]
    data: LabelArgs,
    /// Feature column to analyze.
    #[arg(long)]
    feature: String,
    /// Evaluation grid as MIN:MAX:STEPS (STEPS points).
    #[arg(long, allow_hyphen_values = true)]
    grid: Grid,
    /// CSV output with columns x,z_spline,z_gaussian.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Curve CSV written by `bench` or `simulate`.
    #[arg(long = "in")]
    input: PathBuf,
    /// SVG output.
    #[arg(long)]
    out: PathBuf,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_outputs(curve: &LearningCurve, run: &RunArgs) -> Result<()> {
    emit_curve_csv(curve, &run.out)?;
    if let Some(svg) = &run.svg {
        emit_svg_plot(curve, svg)?;
    }
    if let Some(flags) = &run.flags {
        write_file(flags, &flags_csv(curve))?;
    }
    let flagged: usize = curve.rows.iter().map(|r| r.flagged).sum();
    if flagged > 0 {
        log::warn!("{flagged} replication fit(s) were degraded (separation cap or constant ratios)");
    }
    Ok(())
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().replace(',', "_"))
}

fn bench(args: &BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        dataset_name: dataset_name(&args.data.data),
        training_sizes: args.run.sizes.clone(),
        replications: args.run.reps.unwrap_or(200),
        master_seed: args.run.seed,
        classifiers: args.classifiers.clone(),
        threads: args.run.threads,
        ..BenchConfig::default()
    };
    let curve = run_benchmark(&args.data.source(), &cfg)?;
    write_outputs(&curve, &args.run)
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let df = match args.dist {
        Dist::Gaussian => None,
        Dist::T => Some(args.df),
    };
    let (c0, c1) = match &args.params_from {
        Some(path) => {
            let source = DataSource {
                path: path.clone(),
                label_column: args.label_col.clone().unwrap_or_default(),
                label_map: args.label_map.clone(),
                preprocess: PreprocessRule::None,
            };
            let mut ds = crate::bench::load_dataset(&source)?.dataset;
            if let Some(p) = args.p {
                if p == 0 || p > ds.p() {
                    return Err(Error::Config(format!("--p {p} must lie in 1..={}", ds.p())));
                }
                ds = ds.select_columns(&(0..p).collect::<Vec<_>>())?;
            }
            empirical_class_params(&ds)?
        }
        None => wishart_like_params(args.p.unwrap_or(8), derived_seed(args.run.seed, u64::MAX))?,
    };
    let with_df = |m: MvParams| MvParams::new(m.mean, m.covariance, df);
    let mut plan = SimulationPlan::new(
        with_df(c0)?,
        with_df(c1)?,
        args.run.sizes.clone().unwrap_or_else(|| (1..=10).map(|k| 30 * k).collect()),
        args.run.reps.unwrap_or(100),
        args.run.seed,
    );
    plan.classifiers = args.classifiers.clone();
    plan.threads = args.run.threads;
    let curve = run_simulation(&plan)?;
    write_outputs(&curve, &args.run)
}

fn fit(args: &FitArgs) -> Result<()> {
    let ds = crate::bench::load_dataset(&args.data.source())?.dataset;
    let mut opts = ModelOptions::default();
    opts.smart.kind = args.ratio;
    opts.smart.frozen = args.frozen;
    let fitted = FittedModel::fit(args.model, &ds, &opts)?;
    save_model(&fitted, &args.out)
}

fn predict(args: &PredictArgs) -> Result<()> {
    let fitted = load_model(&args.model)?;
    let (x, rows) = load_features(&args.data, &fitted.columns)?;
    let result = fitted.model.predict(&x)?;
    let mut out = String::from("row,score,predicted\n");
    for ((row, score), label) in rows.iter().zip(&result.scores).zip(&result.predicted) {
        writeln!(out, "{row},{score},{label}").expect("writing to a string");
    }
    write_file(&args.out, &out)
}

fn ratio(args: &RatioArgs) -> Result<()> {
    let ds = crate::bench::load_dataset(&args.data.source())?.dataset;
    let k = ds
        .column_index(&args.feature)
        .ok_or_else(|| Error::MissingColumn(args.feature.clone()))?;
    let x = ds.column(k);
    let opts = RatioOptions::default();
    let spline = fit_marginal_ratio(&x, ds.labels(), k, RatioKind::Spline, &opts)?;
    let gaussian = fit_marginal_ratio(&x, ds.labels(), k, RatioKind::Gaussian, &opts)?;
    if let Some(reason) = &spline.fallback {
        log::warn!("feature `{}` uses a constant ratio: {reason}", args.feature);
    }
    let grid = args.grid.points();
    let zs = eval_log_ratio(&spline, &grid);
    let zg = eval_log_ratio(&gaussian, &grid);
    let mut out = String::from("x,z_spline,z_gaussian\n");
    for ((x, a), b) in grid.iter().zip(&zs).zip(&zg) {
        writeln!(out, "{x},{a},{b}").expect("writing to a string");
    }
    write_file(&args.out, &out)
}

fn plot(args: &PlotArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input).map_err(|e| Error::io(&args.input, e))?;
    emit_svg_plot(&parse_curve_csv(&text)?, &args.out)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Bench(a) => bench(a),
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Ratio(a) => ratio(a),
        Command::Plot(a) => plot(a),
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
