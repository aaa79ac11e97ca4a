//! Benchmark configuration, the per-(dataset, split) jobs and report output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::data::{ingest_csv, normalize, split, SplitKind, SplitSpec, DEFAULT_FRACTION};
use super::metrics::{compute_metrics, run_baselines, Metrics};
use crate::error::{Error, Result};
use crate::fractional::VPinning;
use crate::model_io::format_real;
use crate::oracle::DEFAULT_BIG_M;
use crate::par::Execution;
use crate::poly::Dataset;
use crate::tscrr::{fit_tscrr, RecoveryScope, Refinement, TscrrConfig};

fn default_target() -> String {
    "y".into()
}
fn default_degree() -> u32 {
    2
}
fn default_splits() -> Vec<SplitKind> {
    vec![SplitKind::OddEven, SplitKind::HeadTail]
}
fn default_fraction() -> f64 {
    DEFAULT_FRACTION
}

/// One `[dataset.NAME]` section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    #[serde(default = "default_target")]
    pub target: String,
    /// Empty means every column except the target.
    #[serde(default)]
    pub features: Vec<String>,
    #[serde(default = "default_degree")]
    pub degree: u32,
    pub lm: usize,
    /// Rows to exclude from each training split.
    #[serde(default)]
    pub anomalies: Option<usize>,
    /// Explicit kept-row count; overrides `anomalies`.
    #[serde(default)]
    pub lb: Option<usize>,
    #[serde(default = "default_splits")]
    pub splits: Vec<SplitKind>,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default)]
    pub big_m: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub refine: Option<Refinement>,
    #[serde(default)]
    pub scope: Option<RecoveryScope>,
}

impl DatasetConfig {
    fn tscrr(&self, train_len: usize) -> Result<TscrrConfig> {
        let l_b = match (self.lb, self.anomalies) {
            (Some(lb), _) => lb,
            (None, Some(a)) => train_len.checked_sub(a).filter(|&v| v >= 1).ok_or_else(|| {
                Error::Config(format!("{a} anomalies leave no kept rows out of {train_len}"))
            })?,
            (None, None) => train_len,
        };
        let mut cfg = TscrrConfig::new(self.degree, self.lm, l_b);
        cfg.big_m = self.big_m.unwrap_or(DEFAULT_BIG_M);
        cfg.rho = self.rho;
        cfg.refinement = self.refine.unwrap_or_default();
        cfg.scope = self.scope.unwrap_or_default();
        cfg.pinning = VPinning::Consistent;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    #[serde(default)]
    pub dataset: BTreeMap<String, DatasetConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl BenchConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: BenchConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// One metrics line: a model on one split of one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub model: String,
    pub split: String,
    pub r2: Option<f64>,
    pub mse: f64,
    pub sse: f64,
    pub gamma: Option<f64>,
    pub lower_bound: Option<f64>,
    pub gap: Option<f64>,
    pub anomaly_count: Option<usize>,
}

impl ReportRow {
    fn new(dataset: &str, model: &str, kind: SplitKind, m: &Metrics) -> Self {
        ReportRow {
            dataset: dataset.to_string(),
            model: model.to_string(),
            split: kind.label().to_string(),
            r2: m.r2,
            mse: m.mse,
            sse: m.sse,
            gamma: None,
            lower_bound: None,
            gap: None,
            anomaly_count: None,
        }
    }
}

/// Per-job detail for the JSON summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobSummary {
    pub dataset: String,
    pub split: String,
    pub train_count: usize,
    pub test_count: usize,
    pub dropped_rows: usize,
    pub terms: Vec<String>,
    /// Zero-based rows of the input file.
    pub anomalies: Vec<usize>,
    pub exactness_certified: bool,
    pub integrality_gap: f64,
    pub refinement_swaps: usize,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub dataset: String,
    pub split: Option<String>,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<ReportRow>,
    pub jobs: Vec<JobSummary>,
    pub failures: Vec<Failure>,
}

pub const CSV_HEADER: &str = "dataset,model,split,r2,mse,sse,gamma,lower_bound,gap,anomaly_count";

fn opt_real(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

impl BenchReport {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(CSV_HEADER.split(','))?;
        for r in &self.rows {
            w.write_record([
                r.dataset.clone(),
                r.model.clone(),
                r.split.clone(),
                opt_real(r.r2),
                format_real(r.mse),
                format_real(r.sse),
                opt_real(r.gamma),
                opt_real(r.lower_bound),
                opt_real(r.gap),
                r.anomaly_count.map(|c| c.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, mut out: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        Ok(())
    }
}

struct JobOutput {
    rows: Vec<ReportRow>,
    summary: JobSummary,
}

fn run_job(name: &str, cfg: &DatasetConfig, data: &Dataset, dropped: usize, kind: SplitKind) -> Result<JobOutput> {
    let spec = SplitSpec { kind, fraction: cfg.fraction };
    let (train_idx, test_idx) = split(data.len(), &spec)?;
    let scaled = normalize(data, &train_idx)?;
    let (train, test) = (scaled.subset(&train_idx), scaled.subset(&test_idx));

    let mut rows: Vec<ReportRow> = run_baselines(&train, &test, cfg.degree)?
        .into_iter()
        .map(|(which, m)| ReportRow::new(name, which.label(), kind, &m))
        .collect();

    let tcfg = cfg.tscrr(train.len())?;
    let res = fit_tscrr(&train, &tcfg)?;
    let pred = test.rows().map(|x| res.model.predict(x)).collect::<Result<Vec<f64>>>()?;
    let m = compute_metrics(test.targets(), &pred)?;
    let mut row = ReportRow::new(name, "tscrr", kind, &m);
    row.gamma = Some(res.recovery_gamma());
    row.lower_bound = Some(res.lower_bound());
    row.gap = Some(res.gap());
    row.anomaly_count = Some(res.model.anomalies.len());
    rows.push(row);

    let exact = &res.fit.relaxation.exactness;
    let summary = JobSummary {
        dataset: name.to_string(),
        split: kind.label().to_string(),
        train_count: train.len(),
        test_count: test.len(),
        dropped_rows: dropped,
        terms: res.model.terms(),
        anomalies: res.model.anomalies.iter().map(|&k| train_idx[k]).collect(),
        exactness_certified: exact.certified,
        integrality_gap: exact.integrality_gap,
        refinement_swaps: res.fit.refinement_swaps,
        rho: res.fit.rho,
    };
    Ok(JobOutput { rows, summary })
}

/// Runs every configured (dataset, split) job. A failing dataset or split is
/// recorded in the report and the rest continue.
pub fn run_benchmark(config: &BenchConfig, exec: Execution) -> Result<BenchReport> {
    if config.dataset.is_empty() {
        return Err(Error::Config("the configuration lists no datasets".into()));
    }
    let mut report = BenchReport::default();
    let mut loaded = Vec::new();
    for (name, cfg) in &config.dataset {
        match ingest_csv(&config.resolve(&cfg.path), &cfg.target, &cfg.features) {
            Ok(ing) => loaded.push((name.as_str(), cfg, ing)),
            Err(e) => report.failures.push(Failure { dataset: name.clone(), split: None, error: e.to_string() }),
        }
    }
    let jobs: Vec<_> = loaded
        .iter()
        .flat_map(|(name, cfg, ing)| cfg.splits.iter().map(move |&kind| (*name, *cfg, ing, kind)))
        .collect();
    let outputs = exec.map(&jobs, |&(name, cfg, ing, kind)| run_job(name, cfg, &ing.dataset, ing.dropped, kind));
    for (&(name, _, _, kind), out) in jobs.iter().zip(outputs) {
        match out {
            Ok(out) => {
                report.rows.extend(out.rows);
                report.jobs.push(out.summary);
            }
            Err(e) => report.failures.push(Failure {
                dataset: name.to_string(),
                split: Some(kind.label().to_string()),
                error: e.to_string(),
            }),
        }
    }
    report.rows.sort_by(|a, b| (&a.dataset, &a.model, &a.split).cmp(&(&b.dataset, &b.model, &b.split)));
    report.jobs.sort_by(|a, b| (&a.dataset, &a.split).cmp(&(&b.dataset, &b.split)));
    report.failures.sort_by(|a, b| (&a.dataset, &a.split).cmp(&(&b.dataset, &b.split)));
    Ok(report)
}

/// Runs the benchmark described by `config_path` and writes `metrics.csv`
/// and `summary.json` into `out_dir`.
pub fn run_benchmark_to(config_path: &Path, out_dir: &Path, exec: Execution) -> Result<BenchReport> {
    let config = BenchConfig::from_path(config_path)?;
    let report = run_benchmark(&config, exec)?;
    std::fs::create_dir_all(out_dir)?;
    report.write_csv(std::fs::File::create(out_dir.join("metrics.csv"))?)?;
    report.write_json(std::fs::File::create(out_dir.join("summary.json"))?)?;
    Ok(report)
}
