//! Received-power synthesis, PCA-averaged spectrogram and 95% bandwidth,
//! checked against the speed-based prediction.

use seated_crowd::carson::{carson_bandwidth, CarsonConfig};
use seated_crowd::motion::{synth_fidget_profile, FidgetProcessParams, SpeedProfile};
use seated_crowd::{rf, Result};

pub fn run_example() -> Result<()> {
    let carson = CarsonConfig::default();

    // a single tone: 0.1 m/s gives 2 * 0.1 / 0.0564 = 3.55 Hz
    let steady = SpeedProfile::new(200.0, vec![vec![0.1; 2000]])?;
    let paths = [rf::ReflectorPath {
        amplitude: 1.0,
        initial_phase: 0.3,
        psi: 2.0,
        speed_channel_index: 0,
    }];
    let trace = rf::synth_power_signal(&steady, &paths, carson.wavelength_m, 200.0, 0.0, 0)?;
    let spec = rf::spectrogram(&trace, 1.0, 0.01)?;
    let bw = rf::extract_bandwidth(&spec, 0.95)?;
    println!("tone: extracted {:.1} Hz", bw.values[bw.len() / 2]);

    let params = FidgetProcessParams {
        seed: 4,
        ..Default::default()
    };
    let profile = synth_fidget_profile(&params, 60.0, 200.0)?;
    let streams = rf::synth_streams(&profile, 5, (0.5, 1.5), carson.wavelength_m, 200.0, 0.0, 9)?;
    let spec = rf::pca_average_spectrogram(&streams, 5, 1.0, 0.01)?;
    let measured = rf::extract_bandwidth(&spec, 0.95)?;
    let predicted = carson_bandwidth(&profile, &carson)?;

    // compare at matching times
    let mut agree = 0;
    for (i, m) in measured.values.iter().enumerate() {
        let t = measured.time_of(i);
        let k = ((t - predicted.t0_s) / predicted.sample_period_s).round() as usize;
        if (m - predicted.values[k.min(predicted.len() - 1)]).abs() <= 2.0 {
            agree += 1;
        }
    }
    println!(
        "fidget trace: {} frames, {:.1}% within 2 Hz of the prediction",
        measured.len(),
        100.0 * agree as f64 / measured.len() as f64
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
