//! `tscrr`: command-line access to every stage of the sparse minimax
//! regression pipeline.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tscrr_core::fractional::{FpModel, VPinning};
use tscrr_core::harness::{ingest_csv, normalize, run_benchmark_to};
use tscrr_core::lp::write_mps;
use tscrr_core::model_io::{format_real as real, write_model};
use tscrr_core::oracle::{solve_milp_with, OracleOptions, DEFAULT_BIG_M, DEFAULT_NODE_BUDGET};
use tscrr_core::poly::{enumerate_basis, Dataset};
use tscrr_core::relaxation::{relaxation_lp, solve_linear_relaxation_with, RelaxationOptions};
use tscrr_core::tscrr::{build_instance, fit_tscrr, RecoveryMode, RecoveryScope, Refinement, TscrrConfig};
use tscrr_core::verify::run_suite;
use tscrr_core::{Error, ErrorKind, Execution};

const TOL_ENV: &str = "TSCRR_TOL";

#[derive(Parser)]
#[command(name = "tscrr", version, about = "Sparse minimax polynomial regression with anomaly filtering")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Seed for randomized suites.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Worker threads; 1 runs everything sequentially. Defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Print the size and exponent vectors of the degree-d monomial basis.
    Enumerate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: u32,
    },
    /// Fit a sparse model to a CSV file.
    Fit {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, value_enum, default_value_t = ScopeArg::KeptOnly)]
        recovery_scope: ScopeArg,
        #[arg(long, value_enum, default_value_t = RefineArg::Exchange)]
        refine: RefineArg,
        /// Recover with the relaxed selection values instead of rounding.
        #[arg(long)]
        fractional: bool,
        /// Write the fitted model here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the cutting-plane trace here as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Solve the selection problem exactly.
    Oracle {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        node_budget: u64,
    },
    /// Solve the convex relaxation and report the bound and exactness.
    Relax {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Export the relaxation LP (before cuts) in MPS format.
        #[arg(long)]
        mps: Option<PathBuf>,
    },
    /// Run the randomized property suite.
    Verify,
    /// Run a benchmark configuration and write metrics.csv and summary.json.
    Bench {
        config: PathBuf,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ProblemArgs {
    /// Input CSV with a header row.
    data: PathBuf,
    #[arg(long, default_value = "y")]
    target: String,
    /// Comma-separated feature columns; all non-target columns by default.
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
    #[arg(long, default_value_t = 2)]
    degree: u32,
    /// Number of monomials to select.
    #[arg(long)]
    lm: usize,
    /// Number of rows to keep; defaults to all rows.
    #[arg(long, conflicts_with = "anomalies")]
    lb: Option<usize>,
    /// Number of rows to exclude.
    #[arg(long)]
    anomalies: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BIG_M)]
    big_m: f64,
    /// Use the columns as given instead of min-max scaling them.
    #[arg(long)]
    raw: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    KeptOnly,
    AllPoints,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefineArg {
    None,
    Exchange,
}

type CliResult<T> = Result<T, Error>;

fn integrality_tol() -> CliResult<f64> {
    match std::env::var(TOL_ENV) {
        Err(_) => Ok(RelaxationOptions::default().integrality_tol),
        Ok(v) => v
            .parse::<f64>()
            .ok()
            .filter(|t| *t > 0.0 && t.is_finite())
            .ok_or_else(|| Error::Config(format!("{TOL_ENV} must be a positive number, got `{v}`"))),
    }
}

impl ProblemArgs {
    fn load(&self) -> CliResult<Dataset> {
        let ing = ingest_csv(&self.data, &self.target, &self.features)?;
        if ing.dropped > 0 {
            eprintln!("warning: dropped {} row(s) with missing or non-numeric fields", ing.dropped);
        }
        if self.raw {
            return Ok(ing.dataset);
        }
        let all: Vec<usize> = (0..ing.dataset.len()).collect();
        normalize(&ing.dataset, &all)
    }

    fn config(&self, rows: usize, exec: Execution) -> CliResult<TscrrConfig> {
        let l_b = match (self.lb, self.anomalies) {
            (Some(lb), _) => lb,
            (None, Some(a)) => rows
                .checked_sub(a)
                .filter(|&v| v >= 1)
                .ok_or_else(|| Error::Config(format!("cannot exclude {a} of {rows} rows")))?,
            (None, None) => rows,
        };
        let mut cfg = TscrrConfig::new(self.degree, self.lm, l_b);
        cfg.big_m = self.big_m;
        cfg.integrality_tol = integrality_tol()?;
        cfg.execution = exec;
        Ok(cfg)
    }
}

/// A result printable in all three formats.
trait Report: Serialize {
    fn text(&self) -> String;
    fn csv(&self) -> String;
}

fn emit(format: Format, r: &impl Report) -> CliResult<()> {
    let body = match format {
        Format::Json => serde_json::to_string_pretty(r)? + "\n",
        Format::Csv => r.csv(),
        Format::Text => r.text(),
    };
    let mut out = std::io::stdout().lock();
    out.write_all(body.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

fn reals(v: &[f64]) -> String {
    v.iter().map(|&x| real(x)).collect::<Vec<_>>().join(", ")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn key_values(pairs: &[(&str, String)]) -> String {
    let mut s = String::from("key,value\n");
    for (k, v) in pairs {
        let _ = writeln!(s, "{k},{}", csv_field(v));
    }
    s
}

#[derive(Serialize)]
struct EnumerateOut {
    n: usize,
    d: u32,
    size: usize,
    monomials: Vec<Vec<u32>>,
    names: Vec<String>,
}

impl Report for EnumerateOut {
    fn text(&self) -> String {
        let mut s = format!("{}\n", self.size);
        for (e, name) in self.monomials.iter().zip(&self.names) {
            let _ = writeln!(s, "{} {}", e.iter().map(u32::to_string).collect::<Vec<_>>().join(" "), name);
        }
        s
    }

    fn csv(&self) -> String {
        let mut s = String::from("index,monomial,exponents\n");
        for (j, (e, name)) in self.monomials.iter().zip(&self.names).enumerate() {
            let exps = e.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
            let _ = writeln!(s, "{j},{name},{exps}");
        }
        s
    }
}

#[derive(Serialize)]
struct FitOut {
    terms: Vec<String>,
    coefficients: Vec<f64>,
    anomalies: Vec<usize>,
    gamma: f64,
    lower_bound: f64,
    gap: f64,
    certified: bool,
    integrality_gap: f64,
    refinement_swaps: usize,
    rho: f64,
}

impl Report for FitOut {
    fn text(&self) -> String {
        format!(
            "terms: {}\ncoefficients: {}\nanomalies: {}\ngamma: {}\nlower bound: {}\ngap: {}\n\
             certified: {}\nintegrality gap: {}\nrefinement swaps: {}\nrho: {}\n",
            join(&self.terms),
            reals(&self.coefficients),
            join(&self.anomalies),
            real(self.gamma),
            real(self.lower_bound),
            real(self.gap),
            self.certified,
            real(self.integrality_gap),
            self.refinement_swaps,
            real(self.rho)
        )
    }

    fn csv(&self) -> String {
        let mut s = String::from("kind,name,value\n");
        for (t, c) in self.terms.iter().zip(&self.coefficients) {
            let _ = writeln!(s, "term,{t},{}", real(*c));
        }
        for a in &self.anomalies {
            let _ = writeln!(s, "anomaly,{a},");
        }
        for (k, v) in [("gamma", self.gamma), ("lower_bound", self.lower_bound), ("gap", self.gap)] {
            let _ = writeln!(s, "stat,{k},{}", real(v));
        }
        s
    }
}

#[derive(Serialize)]
struct OracleOut {
    terms: Vec<String>,
    coefficients: Vec<f64>,
    anomalies: Vec<usize>,
    gamma: f64,
    nodes: u64,
}

impl Report for OracleOut {
    fn text(&self) -> String {
        format!(
            "terms: {}\ncoefficients: {}\nanomalies: {}\ngamma: {}\nnodes: {}\n",
            join(&self.terms),
            reals(&self.coefficients),
            join(&self.anomalies),
            real(self.gamma),
            self.nodes
        )
    }

    fn csv(&self) -> String {
        key_values(&[
            ("terms", self.terms.join(" ")),
            ("coefficients", reals(&self.coefficients).replace(", ", " ")),
            ("anomalies", join(&self.anomalies).replace(", ", " ")),
            ("gamma", real(self.gamma)),
            ("nodes", self.nodes.to_string()),
        ])
    }
}

#[derive(Serialize)]
struct RelaxOut {
    lower_bound: f64,
    rho: f64,
    v_hat: f64,
    cuts: usize,
    quad_residual: f64,
    literal_residual: f64,
    integrality_gap: f64,
    certified: bool,
}

impl Report for RelaxOut {
    fn text(&self) -> String {
        format!(
            "lower bound: {}\nrho: {}\nv_hat: {}\ncuts: {}\nquadratic residual: {:e}\n\
             literal exactness residual: {}\nintegrality gap: {}\ncertified: {}\n",
            real(self.lower_bound),
            real(self.rho),
            real(self.v_hat),
            self.cuts,
            self.quad_residual,
            real(self.literal_residual),
            real(self.integrality_gap),
            self.certified
        )
    }

    fn csv(&self) -> String {
        key_values(&[
            ("lower_bound", real(self.lower_bound)),
            ("rho", real(self.rho)),
            ("v_hat", real(self.v_hat)),
            ("cuts", self.cuts.to_string()),
            ("quad_residual", real(self.quad_residual)),
            ("literal_residual", real(self.literal_residual)),
            ("integrality_gap", real(self.integrality_gap)),
            ("certified", self.certified.to_string()),
        ])
    }
}

#[derive(Serialize)]
struct VerifyOut {
    seed: u64,
    passed: bool,
    properties: Vec<tscrr_core::verify::PropertyResult>,
}

impl Report for VerifyOut {
    fn text(&self) -> String {
        let mut s = String::new();
        for p in &self.properties {
            let tag = if p.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{tag} {} ({} cases): {}", p.name, p.cases, p.detail);
        }
        s
    }

    fn csv(&self) -> String {
        let mut s = String::from("property,passed,cases,detail\n");
        for p in &self.properties {
            let _ = writeln!(s, "{},{},{},{}", p.name, p.passed, p.cases, csv_field(&p.detail));
        }
        s
    }
}

#[derive(Serialize)]
struct BenchOut {
    out_dir: String,
    rows: usize,
    failures: Vec<tscrr_core::harness::Failure>,
}

impl Report for BenchOut {
    fn text(&self) -> String {
        let mut s = format!("wrote {} metric rows to {}\n", self.rows, self.out_dir);
        for f in &self.failures {
            let _ = writeln!(s, "failed: {} {}: {}", f.dataset, f.split.as_deref().unwrap_or("(load)"), f.error);
        }
        s
    }

    fn csv(&self) -> String {
        key_values(&[
            ("out_dir", self.out_dir.clone()),
            ("rows", self.rows.to_string()),
            ("failures", self.failures.len().to_string()),
        ])
    }
}

fn write_to(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> CliResult<()>) -> CliResult<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> CliResult<bool> {
    let exec = if cli.jobs == Some(1) { Execution::Sequential } else { Execution::Parallel };
    if let Some(n) = cli.jobs.filter(|&n| n > 1) {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Enumerate { n, d } => {
            let basis = enumerate_basis(n, d)?;
            emit(
                cli.format,
                &EnumerateOut {
                    n,
                    d,
                    size: basis.len(),
                    monomials: basis.iter().map(|a| a.exponents().to_vec()).collect(),
                    names: basis.iter().map(ToString::to_string).collect(),
                },
            )?;
        }
        Command::Fit { problem, rho, recovery_scope, refine, fractional, out, trace } => {
            let data = problem.load()?;
            let mut cfg = problem.config(data.len(), exec)?;
            cfg.rho = rho;
            cfg.scope = match recovery_scope {
                ScopeArg::KeptOnly => RecoveryScope::KeptOnly,
                ScopeArg::AllPoints => RecoveryScope::AllPoints,
            };
            cfg.refinement = match refine {
                RefineArg::None => Refinement::None,
                RefineArg::Exchange => Refinement::Exchange,
            };
            if fractional {
                cfg.mode = RecoveryMode::Fractional;
            }
            let res = fit_tscrr(&data, &cfg)?;
            if let Some(path) = out {
                write_to(&path, |w| write_model(&res.model, w))?;
            }
            if let Some(path) = trace {
                write_to(&path, |w| res.fit.relaxation.write_trace_csv(w))?;
            }
            let exact = &res.fit.relaxation.exactness;
            emit(
                cli.format,
                &FitOut {
                    terms: res.model.terms(),
                    coefficients: res.model.coefficients.clone(),
                    anomalies: res.model.anomalies.clone(),
                    gamma: res.recovery_gamma(),
                    lower_bound: res.lower_bound(),
                    gap: res.gap(),
                    certified: exact.certified,
                    integrality_gap: exact.integrality_gap,
                    refinement_swaps: res.fit.refinement_swaps,
                    rho: res.fit.rho,
                },
            )?;
        }
        Command::Oracle { problem, node_budget } => {
            let data = problem.load()?;
            let cfg = problem.config(data.len(), exec)?;
            let (inst, basis) = build_instance(&data, &cfg)?;
            let opts = OracleOptions { budget: node_budget, execution: exec, ..Default::default() };
            let sol = solve_milp_with(&inst, &opts)?;
            let support = sol.support();
            emit(
                cli.format,
                &OracleOut {
                    terms: support.iter().map(|&j| basis.get(j).to_string()).collect(),
                    coefficients: support.iter().map(|&j| sol.c[j]).collect(),
                    anomalies: sol.anomalies(),
                    gamma: sol.gamma,
                    nodes: sol.nodes,
                },
            )?;
        }
        Command::Relax { problem, rho, trace, mps } => {
            let data = problem.load()?;
            let cfg = problem.config(data.len(), exec)?;
            let (inst, _) = build_instance(&data, &cfg)?;
            let model = FpModel::new(inst, rho, VPinning::Consistent)?;
            if let Some(path) = mps {
                write_to(&path, |w| write_mps(&relaxation_lp(&model), "RELAX", w))?;
            }
            let opts = RelaxationOptions { integrality_tol: cfg.integrality_tol, ..Default::default() };
            let sol = solve_linear_relaxation_with(&model, &opts)?;
            if let Some(path) = trace {
                write_to(&path, |w| sol.write_trace_csv(w))?;
            }
            emit(
                cli.format,
                &RelaxOut {
                    lower_bound: sol.objective,
                    rho: model.rho,
                    v_hat: model.v_const,
                    cuts: sol.cuts,
                    quad_residual: sol.quad_residual,
                    literal_residual: sol.exactness.literal_residual,
                    integrality_gap: sol.exactness.integrality_gap,
                    certified: sol.exactness.certified,
                },
            )?;
        }
        Command::Verify => {
            let properties = run_suite(cli.seed, exec)?;
            let passed = properties.iter().all(|p| p.passed);
            emit(cli.format, &VerifyOut { seed: cli.seed, passed, properties })?;
            return Ok(passed);
        }
        Command::Bench { config, out } => {
            let report = run_benchmark_to(&config, &out, exec)?;
            let ok = report.failures.is_empty();
            emit(
                cli.format,
                &BenchOut { out_dir: out.display().to_string(), rows: report.rows.len(), failures: report.failures },
            )?;
            return Ok(ok);
        }
    }
    Ok(true)
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Solver => 2,
        ErrorKind::Data => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        // A property or benchmark job failed; the report says which.
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
