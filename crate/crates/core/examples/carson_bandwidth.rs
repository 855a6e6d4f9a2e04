//! Predicted received-signal bandwidth from body-part speeds.

use seated_crowd::carson::{carson_bandwidth, max_combine, CarsonConfig};
use seated_crowd::motion::{synth_fidget_profile, FidgetProcessParams, SpeedProfile};
use seated_crowd::Result;

pub fn run_example() -> Result<()> {
    let config = CarsonConfig::default();

    // constant 0.1 m/s: psi * v / lambda, no spectral spread
    let steady = SpeedProfile::new(30.0, vec![vec![0.1; 300]])?;
    let bw = carson_bandwidth(&steady, &config)?;
    println!("steady 0.1 m/s -> {:.3} Hz ({} samples)", bw.values[500], bw.len());

    let people: Vec<_> = (0..4)
        .map(|seed| {
            let params = FidgetProcessParams {
                seed,
                ..Default::default()
            };
            carson_bandwidth(&synth_fidget_profile(&params, 120.0, 30.0)?, &config)
        })
        .collect::<Result<_>>()?;
    for (i, p) in people.iter().enumerate() {
        let mean = p.values.iter().sum::<f64>() / p.len() as f64;
        println!("person {i}: mean {mean:.2} Hz");
    }
    let crowd = max_combine(&people)?;
    let mean = crowd.values.iter().sum::<f64>() / crowd.len() as f64;
    println!("crowd of 4 (pointwise max): mean {mean:.2} Hz");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
