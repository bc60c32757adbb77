//! Data model, CSV ingestion, preprocessing rules, train/test splitting and
//! misclassification metrics.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Feature matrix with binary labels. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Vec<u8>,
    column_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<u8>, column_names: Vec<String>) -> Result<Self> {
        let (n, p) = features.shape();
        if n == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if p == 0 {
            return Err(Error::Empty("dataset has no feature columns".into()));
        }
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: labels.len(),
            });
        }
        if column_names.len() != p {
            return Err(Error::LengthMismatch {
                left: p,
                right: column_names.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::NonBinaryLabels(bad.to_string()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            labels,
            column_names,
        })
    }

    /// Builds a dataset from row vectors, naming columns `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::RaggedRow {
                line: r as u64 + 1,
                expected: p,
                found: rows[r].len(),
            });
        }
        let features = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        let names = (0..p).map(|j| format!("x{j}")).collect();
        Self::new(features, labels, names)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.features.column(k).iter().copied().collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// `(n0, n1)`: number of Class-0 and Class-1 rows.
    pub fn class_counts(&self) -> (usize, usize) {
        let n1 = self.labels.iter().filter(|&&l| l == 1).count();
        (self.n() - n1, n1)
    }

    pub fn has_both_classes(&self) -> bool {
        let (n0, n1) = self.class_counts();
        n0 > 0 && n1 > 0
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let features = self.features.select_rows(rows);
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        Self::new(features, labels, self.column_names.clone())
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let features = self.features.select_columns(cols);
        let names = cols.iter().map(|&j| self.column_names[j].clone()).collect();
        Self::new(features, self.labels.clone(), names)
    }

    /// Same features with labels replaced.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        Self::new(self.features.clone(), labels, self.column_names.clone())
    }
}

/// Maps the two raw label strings of a CSV to Class 0 and Class 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub negative: String,
    pub positive: String,
}

impl FromStr for LabelMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some((neg, pos)) if !neg.is_empty() && !pos.is_empty() && neg != pos => Ok(Self {
                negative: neg.to_string(),
                positive: pos.to_string(),
            }),
            _ => Err(Error::Config(format!(
                "label map must look like NEG:POS with two different values, got `{s}`"
            ))),
        }
    }
}

/// How the label column of a CSV is interpreted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelMode {
    /// Literal 0/1 labels, or two declared raw values.
    Binary(Option<LabelMap>),
    /// A numeric response kept as a feature column; labels are provisional
    /// zeros until a response-based [`PreprocessRule`] derives them.
    Response,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub dropped_rows: usize,
    /// Columns with no numeric cell at all (categorical text), removed whole.
    pub dropped_columns: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub report: LoadReport,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "?" | "NA" | "na" | "N/A" | "NaN" | "nan" | "null")
}

fn parse_real(cell: &str) -> Option<f64> {
    if is_missing(cell) {
        return None;
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<(u64, Vec<String>)>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::RaggedRow {
                line,
                expected: header.len(),
                found: rec.len(),
            });
        }
        records.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok((header, records))
}

/// Reads a labeled CSV.
///
/// Columns without a single numeric cell are treated as categorical and
/// removed. Any remaining row with a missing or unparseable cell is dropped
/// and counted in the report.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, mode: &LabelMode) -> Result<Loaded> {
    let path = path.as_ref();
    let (header, records) = read_records(path)?;
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;

    let mut report = LoadReport::default();
    let mut feature_cols = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if j == label_idx && !matches!(mode, LabelMode::Response) {
            continue;
        }
        if records.iter().any(|(_, r)| parse_real(&r[j]).is_some()) {
            feature_cols.push(j);
        } else {
            report.dropped_columns.push(name.clone());
        }
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (_, rec) in &records {
        let label = match mode {
            LabelMode::Response => parse_real(&rec[label_idx]).map(|_| 0u8),
            LabelMode::Binary(map) => parse_label(&rec[label_idx], map.as_ref())?,
        };
        let values: Option<Vec<f64>> = feature_cols.iter().map(|&j| parse_real(&rec[j])).collect();
        match (label, values) {
            (Some(l), Some(v)) => {
                rows.push(v);
                labels.push(l);
            }
            _ => report.dropped_rows += 1,
        }
    }

    if rows.is_empty() {
        return Err(Error::Empty(format!("no complete rows in {}", path.display())));
    }
    if let LabelMode::Binary(_) = mode {
        let distinct: BTreeSet<u8> = labels.iter().copied().collect();
        if distinct.len() < 2 {
            return Err(Error::SingleClass(distinct.len()));
        }
    }
    let features = DMatrix::from_fn(rows.len(), feature_cols.len(), |i, j| rows[i][j]);
    let names = feature_cols.iter().map(|&j| header[j].clone()).collect();
    Ok(Loaded {
        dataset: Dataset::new(features, labels, names)?,
        report,
    })
}

fn parse_label(cell: &str, map: Option<&LabelMap>) -> Result<Option<u8>> {
    if is_missing(cell) {
        return Ok(None);
    }
    match map {
        Some(m) if cell == m.negative => Ok(Some(0)),
        Some(m) if cell == m.positive => Ok(Some(1)),
        Some(_) => Err(Error::NonBinaryLabels(cell.to_string())),
        None => match cell.parse::<f64>() {
            Ok(v) if v == 0.0 => Ok(Some(0)),
            Ok(v) if v == 1.0 => Ok(Some(1)),
            _ => Err(Error::NonBinaryLabels(cell.to_string())),
        },
    }
}

/// Reads the named feature columns of a CSV (label column optional).
///
/// Returns the matrix and the 0-based data-row index of each kept row.
pub fn load_features(path: impl AsRef<Path>, columns: &[String]) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let path = path.as_ref();
    let (header, records) = read_records(path)?;
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| Error::MissingColumn(c.clone()))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut kept = Vec::new();
    for (i, (_, rec)) in records.iter().enumerate() {
        let values: Option<Vec<f64>> = idx.iter().map(|&j| parse_real(&rec[j])).collect();
        if let Some(v) = values {
            rows.push(v);
            kept.push(i);
        }
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!("no complete rows in {}", path.display())));
    }
    let m = DMatrix::from_fn(rows.len(), idx.len(), |i, j| rows[i][j]);
    Ok((m, kept))
}

/// Sample quantile by linear interpolation between order statistics
/// (R's type 7). `sorted` must be ascending and nonempty.
pub fn quantile_type7(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub const DEFAULT_CONTINUITY_THRESHOLD: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PreprocessRule {
    None,
    /// Remove columns with fewer than `threshold` distinct values.
    DropNoncontinuous { threshold: usize },
    /// Keep rows whose response is strictly below Q1 (Class 0) or strictly
    /// above Q3 (Class 1); the response column leaves the features.
    QuartileFilter { response: String },
    /// Class 1 when the response is strictly above its median.
    MedianBinarize { response: String },
}

impl PreprocessRule {
    /// The response column a rule derives labels from, if any.
    pub fn response_column(&self) -> Option<&str> {
        match self {
            PreprocessRule::QuartileFilter { response } | PreprocessRule::MedianBinarize { response } => {
                Some(response)
            }
            _ => None,
        }
    }
}

impl FromStr for PreprocessRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let need = |a: Option<&str>| {
            a.filter(|c| !c.is_empty())
                .map(str::to_string)
                .ok_or_else(|| Error::Config(format!("`{head}` needs a column, e.g. {head}:COL")))
        };
        match head {
            "none" if arg.is_none() => Ok(PreprocessRule::None),
            "drop-noncontinuous" => {
                let threshold = match arg {
                    None => DEFAULT_CONTINUITY_THRESHOLD,
                    Some(t) => t
                        .parse()
                        .map_err(|_| Error::Config(format!("bad threshold `{t}`")))?,
                };
                Ok(PreprocessRule::DropNoncontinuous { threshold })
            }
            "quartile-filter" => Ok(PreprocessRule::QuartileFilter { response: need(arg)? }),
            "median-binarize" => Ok(PreprocessRule::MedianBinarize { response: need(arg)? }),
            _ => Err(Error::Config(format!("unknown preprocessing rule `{s}`"))),
        }
    }
}

impl fmt::Display for PreprocessRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreprocessRule::None => write!(f, "none"),
            PreprocessRule::DropNoncontinuous { threshold } => write!(f, "drop-noncontinuous:{threshold}"),
            PreprocessRule::QuartileFilter { response } => write!(f, "quartile-filter:{response}"),
            PreprocessRule::MedianBinarize { response } => write!(f, "median-binarize:{response}"),
        }
    }
}

pub fn preprocess(ds: &Dataset, rule: &PreprocessRule) -> Result<Dataset> {
    match rule {
        PreprocessRule::None => Ok(ds.clone()),
        PreprocessRule::DropNoncontinuous { threshold } => {
            let keep: Vec<usize> = (0..ds.p())
                .filter(|&k| distinct_count(&ds.column(k)) >= *threshold)
                .collect();
            if keep.is_empty() {
                return Err(Error::Empty(format!(
                    "no column has at least {threshold} distinct values"
                )));
            }
            ds.select_columns(&keep)
        }
        PreprocessRule::QuartileFilter { response } => {
            let (resp, rest) = split_response(ds, response)?;
            let sorted = sorted_copy(&resp);
            let q1 = quantile_type7(&sorted, 0.25);
            let q3 = quantile_type7(&sorted, 0.75);
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for (i, &r) in resp.iter().enumerate() {
                if r < q1 {
                    rows.push(i);
                    labels.push(0);
                } else if r > q3 {
                    rows.push(i);
                    labels.push(1);
                }
            }
            if rows.is_empty() {
                return Err(Error::Empty("quartile filter kept no rows".into()));
            }
            rest.select_rows(&rows)?.with_labels(labels)
        }
        PreprocessRule::MedianBinarize { response } => {
            let (resp, rest) = split_response(ds, response)?;
            let median = quantile_type7(&sorted_copy(&resp), 0.5);
            let labels = resp.iter().map(|&r| u8::from(r > median)).collect();
            rest.with_labels(labels)
        }
    }
}

fn split_response(ds: &Dataset, response: &str) -> Result<(Vec<f64>, Dataset)> {
    let k = ds
        .column_index(response)
        .ok_or_else(|| Error::MissingColumn(response.to_string()))?;
    let keep: Vec<usize> = (0..ds.p()).filter(|&j| j != k).collect();
    if keep.is_empty() {
        return Err(Error::Empty("no features left besides the response".into()));
    }
    Ok((ds.column(k), ds.select_columns(&keep)?))
}

pub fn distinct_count(values: &[f64]) -> usize {
    let sorted = sorted_copy(values);
    sorted.windows(2).filter(|w| w[0] != w[1]).count() + usize::from(!sorted.is_empty())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// `train_size` random rows for training, the rest for testing.
    RandomMRestTest,
    /// A random half of the rows for training; the row count must be even.
    HalfHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_size: usize,
    pub seed: u64,
    pub mode: SplitMode,
}

/// Train/test row indices, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    let m = match spec.mode {
        SplitMode::RandomMRestTest => {
            if spec.train_size == 0 || spec.train_size >= n {
                return Err(Error::InvalidSplit(format!(
                    "train size {} must lie in 1..{n}",
                    spec.train_size
                )));
            }
            spec.train_size
        }
        SplitMode::HalfHalf => {
            if n < 2 || !n.is_multiple_of(2) {
                return Err(Error::InvalidSplit(format!("half/half split needs an even row count, got {n}")));
            }
            n / 2
        }
    };
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut train = perm[..m].to_vec();
    let mut test = perm[m..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Partitions `ds`. Fails with [`Error::DegenerateSplit`] when the training
/// part holds only one class.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let idx = split_indices(ds.n(), spec)?;
    let train = ds.select_rows(&idx.train)?;
    if !train.has_both_classes() {
        return Err(Error::DegenerateSplit);
    }
    Ok((train, ds.select_rows(&idx.test)?))
}

pub fn misclassification_rate(predicted: &[u8], truth: &[u8]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    let wrong = predicted.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / predicted.len() as f64)
}
