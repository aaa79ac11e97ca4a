//! Rewrites the bundled CSVs under `data/` from their generators.
//!
//! `cargo run -p tscrr-core --example regenerate_data`

use std::fs::File;
use std::path::Path;

use tscrr_core::harness::write_csv;
use tscrr_core::synth::{outlier_synthetic, time_series, SERIES_SEED};

fn main() -> tscrr_core::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    write_csv(&outlier_synthetic(), File::create(dir.join("outlier_synthetic.csv"))?)?;
    write_csv(&time_series(SERIES_SEED), File::create(dir.join("series.csv"))?)?;
    Ok(())
}
