//! Train the reconstruction autoencoder on synthetic crowds and mask a
//! walker burst.

use seated_crowd::anomaly::{build_training_set, flag_anomalies, train_autoencoder, AnomalyConfig};
use seated_crowd::harness::{inject_walkers, synth_crowd_sample, synth_sources, BandwidthPath, SegmentPool, SourceConfig, WalkerConfig};
use seated_crowd::{BandwidthSeries, CarsonConfig, Result};

pub fn run_example() -> Result<()> {
    let config = SourceConfig {
        n_sources: 6,
        duration_s: 600.0,
        ..Default::default()
    };
    let sources = synth_sources(&config, &BandwidthPath::Carson, &CarsonConfig::default(), 5)?;
    let pool = SegmentPool::from_sources(&sources, 60.0)?;
    let segments: Vec<BandwidthSeries> = pool.segments.iter().map(|s| s.series.clone()).collect();

    let detector = AnomalyConfig {
        epochs: 20,
        ..Default::default()
    };
    let windows = build_training_set(&segments, 1..=20, 5_000, detector.window_len(0.01), 1)?;
    let model = train_autoencoder(&windows, &detector)?;
    println!("mean training error {:.2e}", model.train_error_mean);

    let crowd = synth_crowd_sample(&pool, 5, 2)?;
    let (walked, truth) = inject_walkers(&crowd, &WalkerConfig::default(), 100.0, 3)?;
    let mask = flag_anomalies(&walked, &model, &detector)?;
    let burst = truth.iter().filter(|&&t| t).count();
    let caught = truth.iter().zip(&mask.flags).filter(|(&t, &f)| t && f).count();
    println!(
        "walker samples {burst}, flagged {caught}; overall flag rate {:.1}%",
        100.0 * mask.flag_rate()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
