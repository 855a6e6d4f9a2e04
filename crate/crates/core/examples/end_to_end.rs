//! A whole pipeline run into a run directory with a hashed manifest.

use seated_crowd::harness::{run_end_to_end, EndToEndConfig};
use seated_crowd::io::{self, Manifest};
use seated_crowd::Result;

pub fn run_example() -> Result<()> {
    let mut config = EndToEndConfig::new(2024);
    config.sources.n_sources = 6;
    config.sources.duration_s = 120.0;
    config.segment_duration_s = 30.0;
    config.evaluation.n_range = (1, 4);
    config.evaluation.samples_per_n = 3;
    config.evaluation.repeats = 1;

    let dir = tempfile::tempdir().map_err(|e| seated_crowd::Error::io("tempdir", e))?;
    let report = run_end_to_end(&config, dir.path())?;
    println!("MAE {:.2} over {} runs", report.aggregates.mae, report.aggregates.runs);

    let manifest: Manifest = io::read_json(dir.path().join(io::MANIFEST_FILE))?;
    for a in &manifest.artifacts {
        println!("  {}  {}", &a.sha256[..12], a.path);
    }
    assert!(io::verify_manifest(dir.path())?.is_empty());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
