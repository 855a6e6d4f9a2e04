//! Source-held-out cross-validation over a range of crowd sizes.

use seated_crowd::harness::{cross_validate, synth_sources, BandwidthPath, CrossValidationConfig, SegmentPool, SourceConfig};
use seated_crowd::{CarsonConfig, Result};

pub fn run_example() -> Result<()> {
    let sources = SourceConfig {
        n_sources: 9,
        duration_s: 720.0,
        ..Default::default()
    };
    let sources = synth_sources(&sources, &BandwidthPath::Carson, &CarsonConfig::default(), 21)?;
    let pool = SegmentPool::from_sources(&sources, 180.0)?;
    let config = CrossValidationConfig {
        n_range: (1, 8),
        samples_per_n: 6,
        repeats: 2,
        ..Default::default()
    };
    let report = cross_validate(&pool, &config, 21)?;
    let a = &report.aggregates;
    println!("{} runs: MAE {:.2}, NMSE {:.3}, mean convergence {:.0} s", a.runs, a.mae, a.nmse, a.mean_convergence_s);
    for p in &a.per_n {
        println!("  N = {}: MAE {:.2}", p.n, p.mae);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
