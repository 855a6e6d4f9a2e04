//! Synthetic fidgeting: alternating silent gaps and smooth speed bursts.

use seated_crowd::motion::{synth_fidget_profile, FidgetProcessParams};
use seated_crowd::Result;

pub fn run_example() -> Result<()> {
    let params = FidgetProcessParams {
        seed: 11,
        ..Default::default()
    };
    let profile = synth_fidget_profile(&params, 600.0, 30.0)?;
    let expected = params.fidget_mean_s / (params.fidget_mean_s + params.silent_mean_s);
    for (m, ch) in profile.channels.iter().enumerate() {
        let active = ch.iter().filter(|&&v| v > 0.0).count() as f64 / ch.len() as f64;
        let peak = ch.iter().cloned().fold(0.0, f64::max);
        println!("part {m}: active {:.1}% (renewal mean {:.1}%), peak {peak:.3} m/s", 100.0 * active, 100.0 * expected);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
