//! Received-power synthesis and spectrogram-based bandwidth extraction.
//!
//! Each moving body part contributes a cosine whose phase is the integrated
//! speed scaled by `2 pi psi / wavelength`. Bandwidth is measured the way a
//! receiver would: short-time spectra of mean-removed power, optionally
//! denoised by averaging the spectrograms of the leading principal
//! components of many streams, then the frequency below which a fixed
//! fraction of each frame's power lies.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::carson::BandwidthSeries;
use crate::error::{ensure, Result};
use crate::motion::SpeedProfile;
use crate::seed;
use crate::spectral::{power_quantile_bin, FramePower};

pub const DEFAULT_SAMPLE_RATE: f64 = 200.0;
pub const DEFAULT_POWER_FRACTION: f64 = 0.95;
pub const DEFAULT_PCA_COMPONENTS: usize = 5;

/// One body-part reflection in the power approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectorPath {
    pub amplitude: f64,
    pub initial_phase: f64,
    pub psi: f64,
    pub speed_channel_index: usize,
}

/// Real received-power samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasebandTrace {
    pub sample_rate: f64,
    pub values: Vec<f64>,
}

impl BasebandTrace {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Short-time power, one row per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    /// Frame centers (s).
    pub times: Vec<f64>,
    /// Bin centers (Hz), DC through Nyquist.
    pub freqs: Vec<f64>,
    /// Spacing between frames (s).
    pub frame_period_s: f64,
    pub power: Vec<Vec<f64>>,
}

/// One reflector per speed channel with amplitude uniform over
/// `amplitude_range` and initial phase uniform on `[0, 2 pi)`.
pub fn random_paths<R: Rng>(
    n_channels: usize,
    amplitude_range: (f64, f64),
    psi: f64,
    rng: &mut R,
) -> Vec<ReflectorPath> {
    let (lo, hi) = amplitude_range;
    (0..n_channels)
        .map(|m| ReflectorPath {
            amplitude: if hi > lo { rng.random_range(lo..hi) } else { lo },
            initial_phase: rng.random_range(0.0..2.0 * PI),
            psi,
            speed_channel_index: m,
        })
        .collect()
}

/// Linear interpolation of each channel onto a new clock of the same length
/// in seconds.
fn resample(profile: &SpeedProfile, sample_rate: f64) -> Vec<Vec<f64>> {
    let n_in = profile.len();
    let n_out = ((profile.duration_s() * sample_rate).round() as usize).max(1);
    if (profile.sample_rate - sample_rate).abs() < 1e-12 {
        return profile.channels.clone();
    }
    let ratio = profile.sample_rate / sample_rate;
    profile
        .channels
        .iter()
        .map(|ch| {
            (0..n_out)
                .map(|k| {
                    let pos = (k as f64 * ratio).min((n_in - 1) as f64);
                    let i = pos.floor() as usize;
                    let frac = pos - i as f64;
                    if i + 1 < n_in {
                        ch[i] * (1.0 - frac) + ch[i + 1] * frac
                    } else {
                        ch[i]
                    }
                })
                .collect()
        })
        .collect()
}

/// Synthesizes the motion-modulated received power.
pub fn synth_power_signal(
    profile: &SpeedProfile,
    paths: &[ReflectorPath],
    wavelength_m: f64,
    sample_rate: f64,
    noise_std: f64,
    seed: u64,
) -> Result<BasebandTrace> {
    profile.validate()?;
    ensure!(wavelength_m > 0.0, "wavelength must be positive");
    ensure!(sample_rate > 0.0, "sample rate must be positive");
    ensure!(
        noise_std.is_finite() && noise_std >= 0.0,
        "noise std must be nonnegative"
    );
    for (i, p) in paths.iter().enumerate() {
        ensure!(
            p.speed_channel_index < profile.channels.len(),
            "path {i} references speed channel {} but the profile has {}",
            p.speed_channel_index,
            profile.channels.len()
        );
        ensure!(
            p.amplitude >= 0.0 && p.initial_phase.is_finite(),
            "path {i} has a negative amplitude or non-finite phase"
        );
    }

    let speeds = resample(profile, sample_rate);
    let n = speeds[0].len();
    let dt = 1.0 / sample_rate;
    let displacement: Vec<Vec<f64>> = speeds
        .iter()
        .map(|v| {
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(n);
            out.push(0.0);
            for w in v.windows(2) {
                acc += 0.5 * (w[0] + w[1]) * dt;
                out.push(acc);
            }
            out
        })
        .collect();

    let mut values = vec![0.0; n];
    for p in paths {
        let k = 2.0 * PI * p.psi / wavelength_m;
        for (out, d) in values.iter_mut().zip(&displacement[p.speed_channel_index]) {
            *out += p.amplitude * (k * d + p.initial_phase).cos();
        }
    }
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).expect("finite std");
        let mut rng = seed::rng(seed);
        for v in &mut values {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(BasebandTrace {
        sample_rate,
        values,
    })
}

/// Several power streams driven by the same speeds, each with its own
/// random amplitudes and phases (stand-in for per-subcarrier,
/// per-antenna-pair streams).
pub fn synth_streams(
    profile: &SpeedProfile,
    n_streams: usize,
    amplitude_range: (f64, f64),
    wavelength_m: f64,
    sample_rate: f64,
    noise_std: f64,
    seed: u64,
) -> Result<Vec<BasebandTrace>> {
    (0..n_streams)
        .map(|s| {
            let mut rng = seed::derive_rng(seed, &[seed::STREAM_RF, s as u64, 0]);
            let paths = random_paths(profile.channels.len(), amplitude_range, 2.0, &mut rng);
            let noise_seed = seed::derive(seed, &[seed::STREAM_RF, s as u64, 1]);
            synth_power_signal(profile, &paths, wavelength_m, sample_rate, noise_std, noise_seed)
        })
        .collect()
}

fn spectrogram_of(values: &[f64], sample_rate: f64, window_s: f64, shift_s: f64) -> Result<Spectrogram> {
    ensure!(window_s > 0.0 && shift_s > 0.0, "window and shift must be positive");
    let win = (window_s * sample_rate).round() as usize;
    let hop = ((shift_s * sample_rate).round() as usize).max(1);
    ensure!(win >= 2, "window of {window_s} s is shorter than two samples");
    ensure!(
        values.len() >= win,
        "trace of {} samples is shorter than one {win}-sample window",
        values.len()
    );
    let n_frames = (values.len() - win) / hop + 1;
    let mut frame = FramePower::new(win);
    let mut power = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let mut row = vec![0.0; frame.n_bins()];
        frame.power_into(&values[i * hop..i * hop + win], &mut row);
        power.push(row);
    }
    Ok(Spectrogram {
        times: (0..n_frames)
            .map(|i| (i * hop) as f64 / sample_rate + 0.5 * win as f64 / sample_rate)
            .collect(),
        freqs: (0..frame.n_bins())
            .map(|k| k as f64 * sample_rate / win as f64)
            .collect(),
        frame_period_s: hop as f64 / sample_rate,
        power,
    })
}

/// Tukey-windowed short-time power spectrum of the per-frame mean-removed
/// trace. Frames are whole windows; frequency resolution is `1 / window_s`.
pub fn spectrogram(trace: &BasebandTrace, window_s: f64, shift_s: f64) -> Result<Spectrogram> {
    spectrogram_of(&trace.values, trace.sample_rate, window_s, shift_s)
}

/// Leading principal-component time series of a set of equal-length traces.
///
/// Samples are observations and traces are variables; columns are centered
/// and the covariance is eigendecomposed. Components come back in order of
/// decreasing variance.
pub fn principal_components(traces: &[BasebandTrace], n_components: usize) -> Result<Vec<Vec<f64>>> {
    ensure!(n_components >= 1, "need at least one component");
    ensure!(
        traces.len() >= n_components,
        "{} traces cannot supply {n_components} components",
        traces.len()
    );
    let n = traces[0].len();
    let rate = traces[0].sample_rate;
    ensure!(n >= 2, "traces need at least two samples");
    for t in traces {
        ensure!(t.len() == n, "traces differ in length");
        ensure!((t.sample_rate - rate).abs() < 1e-12, "traces differ in sample rate");
    }
    let d = traces.len();
    let centered = DMatrix::from_fn(n, d, |i, j| traces[j].values[i]);
    let means: Vec<f64> = (0..d).map(|j| centered.column(j).mean()).collect();
    let centered = DMatrix::from_fn(n, d, |i, j| centered[(i, j)] - means[j]);
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    Ok(order
        .into_iter()
        .take(n_components)
        .map(|j| (&centered * eig.eigenvectors.column(j)).iter().copied().collect())
        .collect())
}

/// Mean of the spectrograms of the leading principal components.
pub fn pca_average_spectrogram(
    traces: &[BasebandTrace],
    n_components: usize,
    window_s: f64,
    shift_s: f64,
) -> Result<Spectrogram> {
    let rate = traces.first().map_or(1.0, |t| t.sample_rate);
    let components = principal_components(traces, n_components)?;
    let mut specs = components
        .iter()
        .map(|c| spectrogram_of(c, rate, window_s, shift_s))
        .collect::<Result<Vec<_>>>()?;
    let mut avg = specs.swap_remove(0);
    for s in &specs {
        for (row, other) in avg.power.iter_mut().zip(&s.power) {
            for (p, q) in row.iter_mut().zip(other) {
                *p += q;
            }
        }
    }
    let k = n_components as f64;
    avg.power.iter_mut().flatten().for_each(|p| *p /= k);
    Ok(avg)
}

/// Per-frame bandwidth: the lowest bin center at which cumulative power
/// reaches `power_fraction` of the frame total; 0 Hz for powerless frames.
pub fn extract_bandwidth(spec: &Spectrogram, power_fraction: f64) -> Result<BandwidthSeries> {
    ensure!(
        power_fraction > 0.0 && power_fraction < 1.0,
        "power fraction must lie in (0, 1)"
    );
    let values = spec
        .power
        .iter()
        .map(|row| power_quantile_bin(row, power_fraction).map_or(0.0, |k| spec.freqs[k]))
        .collect();
    BandwidthSeries::new(
        spec.frame_period_s,
        spec.times.first().copied().unwrap_or(0.0),
        values,
    )
}
