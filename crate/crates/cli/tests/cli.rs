use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tscrr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tscrr")).args(args).output().expect("binary runs")
}

fn data(name: &str) -> String {
    let p: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name);
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn help_exits_zero() {
    let o = tscrr(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for sub in ["enumerate", "fit", "oracle", "relax", "verify", "bench"] {
        assert!(stdout(&o).contains(sub), "{sub}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(tscrr(&["fit"]).status.code(), Some(1));
    assert_eq!(tscrr(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(tscrr(&["enumerate", "--n", "2", "--d", "2", "--format", "yaml"]).status.code(), Some(1));
}

#[test]
fn enumerate_prints_the_basis() {
    let o = tscrr(&["enumerate", "--n", "3", "--d", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("35"));
    assert_eq!(text.lines().count(), 36);
    let o = tscrr(&["enumerate", "--n", "2", "--d", "2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["size"], 6);
    assert_eq!(v["names"][3], "x2^2");
    let o = tscrr(&["enumerate", "--n", "2", "--d", "1", "--format", "csv"]);
    assert_eq!(stdout(&o), "index,monomial,exponents\n0,1,0 0\n1,x2,0 1\n2,x1,1 0\n");
}

#[test]
fn fit_on_the_outlier_synthetic() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.txt");
    let trace = dir.path().join("trace.csv");
    let o = tscrr(&[
        "fit",
        &data("outlier_synthetic.csv"),
        "--degree",
        "2",
        "--lm",
        "3",
        "--lb",
        "18",
        "--out",
        model.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["terms"], serde_json::json!(["1", "x1", "x2^2"]));
    assert_eq!(v["anomalies"], serde_json::json!([7, 13]));
    assert!(v["gamma"].as_f64().unwrap() <= 1e-6);
    let text = std::fs::read_to_string(&model).unwrap();
    assert!(text.starts_with("tscrr-model v1\ndim 2\ndegree 2\n"));
    assert!(text.ends_with("anomalies 7 13\n"));
    assert!(std::fs::read_to_string(&trace).unwrap().starts_with("iteration,objective,residual\n"));
}

#[test]
fn oracle_and_relax_agree_with_fit() {
    let file = data("outlier_synthetic.csv");
    let o = tscrr(&["oracle", &file, "--lm", "3", "--anomalies", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("terms: 1, x1, x2^2\n") && text.contains("anomalies: 7, 13\n"), "{text}");

    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("relax.mps");
    let o = tscrr(&["relax", &file, "--lm", "3", "--lb", "18", "--mps", mps.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("key,value\nlower_bound,"));
    assert!(std::fs::read_to_string(&mps).unwrap().starts_with("NAME          RELAX\n"));
}

#[test]
fn budget_exhaustion_exits_two() {
    let o = tscrr(&["oracle", &data("outlier_synthetic.csv"), "--lm", "3", "--lb", "18", "--node-budget", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget"));
}

#[test]
fn data_errors_exit_three() {
    let o = tscrr(&["fit", "/nonexistent/file.csv", "--lm", "2"]);
    assert_eq!(o.status.code(), Some(3));
    let o = tscrr(&["fit", &data("outlier_synthetic.csv"), "--lm", "2", "--target", "price"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("price"));
}

#[test]
fn tolerance_override_is_validated() {
    let file = data("outlier_synthetic.csv");
    let run = |tol: &str| {
        Command::new(env!("CARGO_BIN_EXE_tscrr"))
            .args(["relax", &file, "--lm", "3", "--lb", "18", "--format", "json"])
            .env("TSCRR_TOL", tol)
            .output()
            .unwrap()
    };
    let loose = run("0.5");
    assert_eq!(loose.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&loose.stdout).unwrap();
    assert_eq!(v["certified"], true);
    assert_eq!(run("-1").status.code(), Some(1));
}

#[test]
fn verify_is_deterministic() {
    let a = tscrr(&["verify", "--seed", "7"]);
    let b = tscrr(&["verify", "--seed", "7", "--jobs", "1"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 8);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = tscrr(&["bench", &data("bench.toml"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count(), 13);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["jobs"].as_array().unwrap().len(), 4);
    assert_eq!(tscrr(&["bench", "/nonexistent.toml"]).status.code(), Some(3));
}
