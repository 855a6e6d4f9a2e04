use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pool::Source;
use crate::carson::{carson_bandwidth, BandwidthSeries, CarsonConfig};
use crate::error::{ensure, Result};
use crate::motion::{synth_fidget_profile, FidgetProcessParams, SpeedProfile};
use crate::rf;
use crate::seed;

/// Population of synthetic seated individuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceConfig {
    pub n_sources: usize,
    pub duration_s: f64,
    pub profile_rate_hz: f64,
    /// Population-mean fidget parameters; `seed` is ignored.
    pub fidget: FidgetProcessParams,
    /// Each individual scales the mean durations and the top peak speed by
    /// an independent factor uniform on `[1 - jitter, 1 + jitter]`.
    pub param_jitter: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            n_sources: 24,
            duration_s: 1800.0,
            profile_rate_hz: 30.0,
            fidget: FidgetProcessParams::default(),
            param_jitter: 0.2,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_sources >= 1, "need at least one source");
        ensure!(self.duration_s > 0.0 && self.profile_rate_hz > 0.0, "duration and profile rate must be positive");
        ensure!((0.0..1.0).contains(&self.param_jitter), "param_jitter must lie in [0, 1)");
        self.fidget.validate()
    }

    /// Fidget parameters of source `i`.
    pub fn individual(&self, i: usize, seed: u64) -> FidgetProcessParams {
        let mut rng = seed::derive_rng(seed, &[seed::STREAM_SOURCES, i as u64, 0]);
        let j = self.param_jitter;
        let mut factor = || if j > 0.0 { rng.random_range(1.0 - j..=1.0 + j) } else { 1.0 };
        let base = &self.fidget;
        let (lo, hi) = base.peak_speed_range;
        let silent_mean_s = base.silent_mean_s * factor();
        let fidget_mean_s = base.fidget_mean_s * factor();
        let hi = (hi * factor()).max(lo);
        FidgetProcessParams {
            silent_mean_s,
            fidget_mean_s,
            peak_speed_range: (lo, hi),
            seed: seed::derive(seed, &[seed::STREAM_SOURCES, i as u64, 1]),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfPathConfig {
    pub n_streams: usize,
    pub amplitude_range: (f64, f64),
    pub noise_std: f64,
    pub sample_rate: f64,
    pub window_s: f64,
    pub shift_s: f64,
    pub pca_components: usize,
    pub power_fraction: f64,
}

impl Default for RfPathConfig {
    fn default() -> Self {
        Self {
            n_streams: 5,
            amplitude_range: (0.5, 1.5),
            noise_std: 0.0,
            sample_rate: rf::DEFAULT_SAMPLE_RATE,
            window_s: 1.0,
            shift_s: 0.01,
            pca_components: rf::DEFAULT_PCA_COMPONENTS,
            power_fraction: rf::DEFAULT_POWER_FRACTION,
        }
    }
}

/// How speed profiles become bandwidth series.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BandwidthPath {
    /// Predicted bandwidth from speeds.
    #[default]
    Carson,
    /// Simulated received power, PCA-averaged spectrogram, 95% bandwidth.
    Rf(RfPathConfig),
}

/// Speed profiles of the synthetic population, ids `synth-000`, ...
pub fn synth_source_profiles(config: &SourceConfig, seed: u64) -> Result<Vec<(String, SpeedProfile)>> {
    config.validate()?;
    (0..config.n_sources)
        .into_par_iter()
        .map(|i| {
            let params = config.individual(i, seed);
            let profile = synth_fidget_profile(&params, config.duration_s, config.profile_rate_hz)?;
            Ok((format!("synth-{i:03}"), profile))
        })
        .collect()
}

pub fn profile_bandwidth(
    profile: &SpeedProfile,
    path: &BandwidthPath,
    carson: &CarsonConfig,
    seed: u64,
) -> Result<BandwidthSeries> {
    match path {
        BandwidthPath::Carson => carson_bandwidth(profile, carson),
        BandwidthPath::Rf(cfg) => {
            let streams = rf::synth_streams(
                profile,
                cfg.n_streams,
                cfg.amplitude_range,
                carson.wavelength_m,
                cfg.sample_rate,
                cfg.noise_std,
                seed,
            )?;
            let k = cfg.pca_components.min(cfg.n_streams);
            let spec = rf::pca_average_spectrogram(&streams, k, cfg.window_s, cfg.shift_s)?;
            rf::extract_bandwidth(&spec, cfg.power_fraction)
        }
    }
}

pub fn sources_from_profiles(
    profiles: &[(String, SpeedProfile)],
    path: &BandwidthPath,
    carson: &CarsonConfig,
    seed: u64,
) -> Result<Vec<Source>> {
    profiles
        .par_iter()
        .enumerate()
        .map(|(i, (id, profile))| {
            let bandwidth = profile_bandwidth(profile, path, carson, seed::derive(seed, &[seed::STREAM_RF, i as u64]))?;
            Ok(Source {
                id: id.clone(),
                bandwidth,
            })
        })
        .collect()
}

pub fn synth_sources(
    config: &SourceConfig,
    path: &BandwidthPath,
    carson: &CarsonConfig,
    seed: u64,
) -> Result<Vec<Source>> {
    let profiles = synth_source_profiles(config, seed)?;
    sources_from_profiles(&profiles, path, carson, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn individuals_are_jittered_within_bounds() {
        let cfg = SourceConfig::default();
        for i in 0..20 {
            let p = cfg.individual(i, 5);
            let r = p.silent_mean_s / cfg.fidget.silent_mean_s;
            assert!((0.8..=1.2).contains(&r));
            assert_eq!(p, cfg.individual(i, 5));
        }
        assert_ne!(cfg.individual(0, 5), cfg.individual(1, 5));
    }

    #[test]
    fn short_population_has_expected_shape() {
        let cfg = SourceConfig {
            n_sources: 3,
            duration_s: 20.0,
            ..Default::default()
        };
        let sources = synth_sources(&cfg, &BandwidthPath::Carson, &CarsonConfig::default(), 1).unwrap();
        assert_eq!(sources.len(), 3);
        assert!(sources.iter().all(|s| (s.bandwidth.duration_s() - 20.0).abs() < 0.05));
        assert_eq!(sources[2].id, "synth-002");
    }
}
