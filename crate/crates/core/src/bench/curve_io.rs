use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CurveRow, LearningCurve};
use crate::classify::ClassifierKind;
use crate::error::{Error, Result};

pub const CURVE_HEADER: &str = "dataset,classifier,train_size,mean_error,sd_error,replications,redraws";

/// The curve as CSV text: fixed header, rows sorted by classifier then
/// training size, reals with six decimals.
pub fn curve_csv(curve: &LearningCurve) -> String {
    let sorted = LearningCurve::new(curve.rows.clone());
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in &sorted.rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{},{}",
            r.dataset, r.classifier, r.train_size, r.mean_error, r.sd_error, r.replications, r.redraws
        )
        .expect("writing to a string");
    }
    out
}

pub fn emit_curve_csv(curve: &LearningCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, curve_csv(curve)).map_err(|e| Error::io(path, e))
}

/// Degraded-fit tallies per cell, kept out of the curve file so its columns
/// stay fixed.
pub fn flags_csv(curve: &LearningCurve) -> String {
    let sorted = LearningCurve::new(curve.rows.clone());
    let mut out = String::from("dataset,classifier,train_size,flagged\n");
    for r in &sorted.rows {
        writeln!(out, "{},{},{},{}", r.dataset, r.classifier, r.train_size, r.flagged).expect("writing to a string");
    }
    out
}

pub fn parse_curve_csv(text: &str) -> Result<LearningCurve> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CURVE_HEADER {
        return Err(Error::Config(format!("unexpected curve header `{}`", header.join(","))));
    }
    let bad = |what: &str, v: &str| Error::Config(format!("bad {what} `{v}` in curve file"));
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        rows.push(CurveRow {
            dataset: field(0).to_string(),
            classifier: field(1).parse::<ClassifierKind>()?,
            train_size: field(2).parse().map_err(|_| bad("train_size", field(2)))?,
            mean_error: field(3).parse().map_err(|_| bad("mean_error", field(3)))?,
            sd_error: field(4).parse().map_err(|_| bad("sd_error", field(4)))?,
            replications: field(5).parse().map_err(|_| bad("replications", field(5)))?,
            redraws: field(6).parse().map_err(|_| bad("redraws", field(6)))?,
            flagged: 0,
        });
    }
    Ok(LearningCurve::new(rows))
}
