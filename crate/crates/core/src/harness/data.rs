//! CSV ingestion, train-statistics normalization and the two split protocols.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Dataset, Normalization};

/// A parsed file plus the number of rows skipped for missing or
/// non-numeric fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub dataset: Dataset,
    pub dropped: usize,
}

/// Reads `target` and `features` (all other columns when empty) from a
/// headed CSV, keeping row order.
pub fn ingest_csv(path: &Path, target: &str, features: &[String]) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let t = find(target)?;
    let names: Vec<String> = if features.is_empty() {
        header.iter().filter(|h| h.as_str() != target).cloned().collect()
    } else {
        features.to_vec()
    };
    if names.is_empty() {
        return Err(Error::InvalidDataset("no feature columns".into()));
    }
    let cols = names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut dropped = 0;
    for record in reader.records() {
        let record = record?;
        let parse = |i: usize| record.get(i).and_then(|s| s.parse::<f64>().ok()).filter(|v| v.is_finite());
        let row: Option<Vec<f64>> = cols.iter().map(|&i| parse(i)).collect();
        match (row, parse(t)) {
            (Some(row), Some(v)) => {
                rows.push(row);
                y.push(v);
            }
            _ => dropped += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::NoUsableRows(path.to_path_buf()));
    }
    let dataset = Dataset::with_names(rows, y, names, target.to_string())?;
    Ok(Ingested { dataset, dropped })
}

/// Writes features then the target under the dataset's column names.
/// Values use the shortest round-trip representation.
pub fn write_csv(data: &Dataset, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = data.feature_names.clone();
    header.push(data.target_name.clone());
    w.write_record(&header)?;
    for (row, y) in data.rows().zip(data.targets()) {
        w.write_record(row.iter().chain([y]).map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Min-max scales every column of `data` using statistics from `train`
/// only. Test rows outside the training range are not clamped.
pub fn normalize(data: &Dataset, train: &[usize]) -> Result<Dataset> {
    if train.is_empty() {
        return Err(Error::DegenerateSplit("normalization needs at least one training row".into()));
    }
    if let Some(&k) = train.iter().find(|&&k| k >= data.len()) {
        return Err(Error::InvalidDataset(format!("training row {k} out of range")));
    }
    let n = data.dim();
    let norm = Normalization {
        features: (0..n).map(|i| range(train.iter().map(|&k| data.feature(k, i)))).collect(),
        target: range(train.iter().map(|&k| data.targets()[k])),
    };
    let x = data.rows().flat_map(|row| norm.scale_features(row)).collect();
    let y = data.targets().iter().map(|&v| Normalization::scale(v, norm.target)).collect();
    Ok(Dataset::from_parts(n, x, y, data, Some(norm)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitKind {
    /// Odd 1-based positions train, even positions test.
    OddEven,
    /// The first `floor(fraction * N)` rows train, the rest test.
    HeadTail,
}

impl SplitKind {
    /// Name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            SplitKind::OddEven => "interpolation",
            SplitKind::HeadTail => "extrapolation",
        }
    }
}

pub const DEFAULT_FRACTION: f64 = 0.97;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub fraction: f64,
}

impl SplitSpec {
    pub fn odd_even() -> Self {
        SplitSpec { kind: SplitKind::OddEven, fraction: DEFAULT_FRACTION }
    }

    pub fn head_tail(fraction: f64) -> Self {
        SplitSpec { kind: SplitKind::HeadTail, fraction }
    }
}

/// Zero-based `(train, test)` row indices for `n` rows.
pub fn split(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::DegenerateSplit(format!("{n} row(s) cannot be split")));
    }
    match spec.kind {
        SplitKind::OddEven => Ok(((0..n).step_by(2).collect(), (1..n).step_by(2).collect())),
        SplitKind::HeadTail => {
            if !(spec.fraction > 0.0 && spec.fraction < 1.0) {
                return Err(Error::DegenerateSplit(format!(
                    "fraction {} must lie strictly between 0 and 1",
                    spec.fraction
                )));
            }
            let head = ((spec.fraction * n as f64).floor() as usize).clamp(1, n - 1);
            Ok(((0..head).collect(), (head..n).collect()))
        }
    }
}
