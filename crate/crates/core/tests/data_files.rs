//! The bundled CSVs are exactly what their generators produce.

use std::path::{Path, PathBuf};

use tscrr_core::harness::{ingest_csv, write_csv};
use tscrr_core::synth::{outlier_synthetic, time_series, SERIES_ANOMALIES, SERIES_SEED};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn outlier_file_matches_generator() {
    let got = ingest_csv(&data("outlier_synthetic.csv"), "y", &[]).unwrap();
    assert_eq!(got.dropped, 0);
    assert_eq!(got.dataset, outlier_synthetic());
}

#[test]
fn series_file_matches_generator() {
    let got = ingest_csv(&data("series.csv"), "y", &["x1".into(), "x2".into(), "x3".into()]).unwrap();
    assert_eq!(got.dataset, time_series(SERIES_SEED));
}

#[test]
fn files_are_byte_identical_to_a_fresh_write() {
    for (name, ds) in [("outlier_synthetic.csv", outlier_synthetic()), ("series.csv", time_series(SERIES_SEED))] {
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        assert_eq!(std::fs::read(data(name)).unwrap(), buf, "{name}");
    }
}

#[test]
fn series_anomalies_stand_out() {
    let ds = time_series(SERIES_SEED);
    let y = ds.targets();
    for &t in &SERIES_ANOMALIES {
        let neighbours = 0.5 * (y[t - 1] + y[t + 1]);
        assert!((y[t] - neighbours).abs() > 1.0, "row {t}");
    }
}
