//! Single-person bandwidth histogram and the family of crowd distributions
//! of the maximum over N people.

use seated_crowd::carson::{carson_bandwidth, CarsonConfig};
use seated_crowd::crowd::{build_prior_set, estimate_pdf, BinGrid};
use seated_crowd::motion::{synth_fidget_profile, FidgetProcessParams};
use seated_crowd::Result;

pub fn run_example() -> Result<()> {
    let mut samples = Vec::new();
    for seed in 0..6 {
        let params = FidgetProcessParams {
            seed,
            ..Default::default()
        };
        let bw = carson_bandwidth(&synth_fidget_profile(&params, 300.0, 30.0)?, &CarsonConfig::default())?;
        samples.extend(bw.values);
    }
    let base = estimate_pdf(&samples, &BinGrid::default())?;
    let priors = build_prior_set(&base, 20)?;
    for n in [1, 2, 5, 10, 20] {
        let h = priors.get(n).expect("within n_max");
        let silent = h.pdf()[0];
        println!("N = {n:>2}: mean {:>5.2} Hz, P(bin 0) = {silent:.3}", h.mean());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
