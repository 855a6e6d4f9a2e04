//! The four distribution distances side by side.

use seated_crowd::crowd::{build_prior_set, BandwidthHistogram, BinGrid};
use seated_crowd::matching::{distance, estimate_count, DistanceMetric};
use seated_crowd::Result;

pub fn run_example() -> Result<()> {
    let grid = BinGrid::uniform(10.0, 1.0)?;
    let base = BandwidthHistogram::from_pdf(grid, vec![0.4, 0.2, 0.15, 0.1, 0.06, 0.04, 0.02, 0.015, 0.01, 0.005])?;
    let priors = build_prior_set(&base, 8)?;
    let observed = priors.get(3).expect("built").clone();

    for metric in DistanceMetric::ALL {
        let (n, dists) = estimate_count(&observed, &priors, metric)?;
        let self_distance = distance(&observed, &observed, metric)?;
        println!(
            "{:>5}: N_hat = {n}, d(obs, obs) = {self_distance:.1e}, d to N=1..4 = {:.3?}",
            metric.tag(),
            &dists[..4]
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
