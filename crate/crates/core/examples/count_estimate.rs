//! Streaming crowd-size estimate of one synthetic 3-minute trace.

use seated_crowd::harness::{base_histogram, synth_crowd_sample, synth_sources, BandwidthPath, SegmentPool, SourceConfig};
use seated_crowd::crowd::{build_prior_set, BinGrid, DEFAULT_FLOOR};
use seated_crowd::matching::{convergence_time, streaming_estimate, StreamingConfig};
use seated_crowd::{CarsonConfig, Result};

pub fn run_example() -> Result<()> {
    let config = SourceConfig {
        n_sources: 8,
        duration_s: 900.0,
        ..Default::default()
    };
    let sources = synth_sources(&config, &BandwidthPath::Carson, &CarsonConfig::default(), 3)?;
    let pool = SegmentPool::from_sources(&sources, 180.0)?;

    // priors from the first six people, the test crowd from the other two
    let ids = pool.source_ids();
    let held_out = ids[6..].iter().map(String::as_str).collect();
    let (test, train) = pool.split_by_source(&held_out);
    let base = base_histogram(&train, &BinGrid::default(), DEFAULT_FLOOR)?;
    let priors = build_prior_set(&base, 30)?;

    let crowd = synth_crowd_sample(&test, 4, 17)?;
    let trace = streaming_estimate(&crowd, &priors, None, &StreamingConfig::default())?;
    for (t, n) in trace.times.iter().zip(&trace.estimates).step_by(30) {
        println!("t = {t:>5.1} s  N_hat = {n}");
    }
    println!(
        "final N_hat = {:?} (true 4), converged after {:.0} s",
        trace.final_estimate,
        convergence_time(&trace)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
