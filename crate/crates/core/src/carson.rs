//! Speed-to-bandwidth conversion via Carson's rule.
//!
//! For every window position the predicted bandwidth of the received power
//! signal is the largest, over body parts, of the FM deviation term
//! `v_max * psi / wavelength` plus the bandwidth of the speed signal itself.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::motion::SpeedProfile;
use crate::spectral::{power_quantile_bin, FramePower};

/// Wavelength of a 5.32 GHz carrier.
pub const WAVELENGTH_5_32_GHZ: f64 = 299_792_458.0 / 5.32e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CarsonConfig {
    pub wavelength_m: f64,
    /// Geometric factor `2 cos(phi)`; 2 for far transceivers.
    pub psi: f64,
    /// Optional per-channel override of `psi`.
    pub channel_psi: Option<Vec<f64>>,
    pub window_s: f64,
    pub shift_s: f64,
    pub speed_band_power_fraction: f64,
}

impl Default for CarsonConfig {
    fn default() -> Self {
        Self {
            wavelength_m: 0.0564,
            psi: 2.0,
            channel_psi: None,
            window_s: 1.0,
            shift_s: 0.01,
            speed_band_power_fraction: 0.95,
        }
    }
}

impl CarsonConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.wavelength_m.is_finite() && self.wavelength_m > 0.0,
            "wavelength must be positive"
        );
        let psis = std::iter::once(self.psi).chain(self.channel_psi.iter().flatten().copied());
        for psi in psis {
            ensure!(psi > 0.0 && psi <= 2.0, "psi {psi} must lie in (0, 2]");
        }
        ensure!(
            self.shift_s > 0.0 && self.shift_s <= self.window_s,
            "need 0 < shift_s ({}) <= window_s ({})",
            self.shift_s,
            self.window_s
        );
        ensure!(
            self.speed_band_power_fraction > 0.0 && self.speed_band_power_fraction < 1.0,
            "power fraction must lie in (0, 1)"
        );
        Ok(())
    }

    fn psi_for(&self, channel: usize) -> f64 {
        self.channel_psi
            .as_ref()
            .and_then(|v| v.get(channel).copied())
            .unwrap_or(self.psi)
    }
}

/// Instantaneous bandwidth (Hz) sampled every `sample_period_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSeries {
    pub sample_period_s: f64,
    pub t0_s: f64,
    pub values: Vec<f64>,
}

impl BandwidthSeries {
    pub fn new(sample_period_s: f64, t0_s: f64, values: Vec<f64>) -> Result<Self> {
        let s = Self {
            sample_period_s,
            t0_s,
            values,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.sample_period_s.is_finite() && self.sample_period_s > 0.0,
            "sample period must be positive"
        );
        ensure!(
            self.values.iter().all(|v| v.is_finite() && *v >= 0.0),
            "bandwidth values must be finite and nonnegative"
        );
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.t0_s + index as f64 * self.sample_period_s
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 * self.sample_period_s
    }

    /// Samples `[start, start + len)` as a new series.
    pub fn slice(&self, start: usize, len: usize) -> BandwidthSeries {
        BandwidthSeries {
            sample_period_s: self.sample_period_s,
            t0_s: self.time_of(start),
            values: self.values[start..start + len].to_vec(),
        }
    }
}

/// Offsets of a length-`window_len` window centered on a sample: it spans
/// `[k - window_len / 2, k - window_len / 2 + window_len)`.
fn window_bounds(center: usize, window_len: usize, len: usize) -> (usize, usize) {
    let lo = center.saturating_sub(window_len / 2);
    let hi = (center + window_len - window_len / 2).min(len);
    (lo, hi)
}

/// Running maximum over centered windows, truncated at the edges.
pub fn sliding_max(x: &[f64], window_len: usize) -> Result<Vec<f64>> {
    ensure!(!x.is_empty(), "sliding_max needs a nonempty input");
    ensure!(window_len >= 1, "window length must be at least 1");
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    // Indices with decreasing values; front is the current maximum.
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for k in 0..n {
        let (lo, hi) = window_bounds(k, window_len, n);
        while next < hi {
            while dq.back().is_some_and(|&j| x[j] <= x[next]) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        while dq.front().is_some_and(|&j| j < lo) {
            dq.pop_front();
        }
        out.push(x[*dq.front().expect("window is never empty")]);
    }
    Ok(out)
}

/// Number of profile samples in one analysis window.
fn window_samples(window_s: f64, sample_rate: f64) -> usize {
    ((window_s * sample_rate).round() as usize).max(1)
}

/// Centers (in profile samples) of the bandwidth windows: one every
/// `shift_s` from t = 0 through the last profile sample.
fn window_centers(n: usize, sample_rate: f64, shift_s: f64) -> Vec<usize> {
    let last_t = (n - 1) as f64 / sample_rate;
    let count = (last_t / shift_s + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|j| (((j as f64 * shift_s) * sample_rate).round() as usize).min(n - 1))
        .collect()
}

/// Computes speed-signal bandwidths for one channel, caching by window
/// center since several bandwidth windows often share a profile sample.
struct SpeedBand<'a> {
    v: &'a [f64],
    window_len: usize,
    bin_hz: f64,
    fraction: f64,
    frame: FramePower,
    power: Vec<f64>,
}

impl<'a> SpeedBand<'a> {
    fn new(v: &'a [f64], sample_rate: f64, config: &CarsonConfig) -> Self {
        let window_len = window_samples(config.window_s, sample_rate);
        let frame = FramePower::new(window_len);
        Self {
            v,
            window_len,
            bin_hz: sample_rate / window_len as f64,
            fraction: config.speed_band_power_fraction,
            power: vec![0.0; frame.n_bins()],
            frame,
        }
    }

    fn at(&mut self, center: usize) -> f64 {
        let (lo, hi) = window_bounds(center, self.window_len, self.v.len());
        let w = &self.v[lo..hi];
        if w.iter().all(|&x| x == w[0]) || !self.frame.power_into(w, &mut self.power) {
            return 0.0;
        }
        power_quantile_bin(&self.power, self.fraction).map_or(0.0, |k| k as f64 * self.bin_hz)
    }
}

/// Bandwidth (Hz) of the mean-removed speed signal over the window
/// centered at `t_s`: the smallest frequency bin below which the configured
/// fraction of the window's spectral power lies.
pub fn speed_band(v: &[f64], sample_rate: f64, config: &CarsonConfig, t_s: f64) -> Result<f64> {
    ensure!(!v.is_empty(), "speed channel is empty");
    ensure!(sample_rate > 0.0, "sample rate must be positive");
    config.validate()?;
    let center = ((t_s * sample_rate).round().max(0.0) as usize).min(v.len() - 1);
    Ok(SpeedBand::new(v, sample_rate, config).at(center))
}

/// Predicted received-signal bandwidth for a single individual.
pub fn carson_bandwidth(profile: &SpeedProfile, config: &CarsonConfig) -> Result<BandwidthSeries> {
    profile.validate()?;
    config.validate()?;
    let fs = profile.sample_rate;
    let n = profile.len();
    let window_len = window_samples(config.window_s, fs);
    let centers = window_centers(n, fs, config.shift_s);

    let per_channel: Vec<Vec<f64>> = profile
        .channels
        .par_iter()
        .enumerate()
        .map(|(m, v)| channel_bandwidth(v, m, fs, window_len, &centers, config))
        .collect::<Result<_>>()?;

    let values = (0..centers.len())
        .map(|j| per_channel.iter().map(|ch| ch[j]).fold(0.0, f64::max))
        .collect();
    BandwidthSeries::new(config.shift_s, 0.0, values)
}

fn channel_bandwidth(
    v: &[f64],
    m: usize,
    fs: f64,
    window_len: usize,
    centers: &[usize],
    config: &CarsonConfig,
) -> Result<Vec<f64>> {
    let vmax = sliding_max(v, window_len)?;
    let gain = config.psi_for(m) / config.wavelength_m;
    let mut band = SpeedBand::new(v, fs, config);
    let mut cached: Option<(usize, f64)> = None;
    Ok(centers
        .iter()
        .map(|&c| {
            let f0 = match cached {
                Some((cc, f)) if cc == c => f,
                _ => {
                    let f = if vmax[c] == 0.0 { 0.0 } else { band.at(c) };
                    cached = Some((c, f));
                    f
                }
            };
            vmax[c] * gain + f0
        })
        .collect())
}

/// Pointwise maximum of series sharing a clock.
pub fn max_combine(series: &[BandwidthSeries]) -> Result<BandwidthSeries> {
    let (first, rest) = series
        .split_first()
        .ok_or_else(|| Error::invalid("max_combine needs at least one series"))?;
    for s in rest {
        ensure!(
            s.len() == first.len(),
            "series lengths differ: {} vs {}",
            s.len(),
            first.len()
        );
        ensure!(
            (s.sample_period_s - first.sample_period_s).abs() <= 1e-12 * first.sample_period_s,
            "sample periods differ: {} vs {}",
            s.sample_period_s,
            first.sample_period_s
        );
    }
    let mut values = first.values.clone();
    for s in rest {
        for (acc, &v) in values.iter_mut().zip(&s.values) {
            *acc = acc.max(v);
        }
    }
    Ok(BandwidthSeries {
        sample_period_s: first.sample_period_s,
        t0_s: first.t0_s,
        values,
    })
}
