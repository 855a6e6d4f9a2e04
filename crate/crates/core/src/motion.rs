//! Per-body-part speed profiles of a seated individual.
//!
//! Profiles come either from pose-landmark trajectories (pixel tracks
//! calibrated to meters by the average adult interpupillary distance) or
//! from a stochastic fidget process that alternates silent gaps with smooth
//! movement bursts.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::seed;

/// Average adult interpupillary distance in meters.
pub const INTERPUPILLARY_M: f64 = 0.06336;

/// Landmarks below this visibility are treated as missing.
pub const DEFAULT_VISIBILITY_FLOOR: f64 = 0.5;

pub const DEFAULT_LOWPASS_HZ: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub x_px: f64,
    pub y_px: f64,
    pub visibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTrack {
    pub name: String,
    pub points: Vec<Landmark>,
}

/// Pixel-space joint trajectories from a single video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkTrack {
    pub frame_rate: f64,
    pub interpupillary_px: f64,
    pub joints: Vec<JointTrack>,
}

impl LandmarkTrack {
    pub fn n_frames(&self) -> usize {
        self.joints.first().map_or(0, |j| j.points.len())
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.frame_rate.is_finite() && self.frame_rate > 0.0,
            "frame_rate must be positive, got {}",
            self.frame_rate
        );
        ensure!(
            self.interpupillary_px.is_finite() && self.interpupillary_px > 0.0,
            "interpupillary_px must be positive, got {}",
            self.interpupillary_px
        );
        ensure!(!self.joints.is_empty(), "landmark track has no joints");
        let n = self.n_frames();
        ensure!(n >= 2, "landmark track needs at least 2 frames, got {n}");
        for joint in &self.joints {
            ensure!(
                joint.points.len() == n,
                "joint `{}` has {} frames, expected {n}",
                joint.name,
                joint.points.len()
            );
            for p in &joint.points {
                ensure!(
                    p.x_px.is_finite() && p.y_px.is_finite(),
                    "joint `{}` has a non-finite coordinate",
                    joint.name
                );
                ensure!(
                    (0.0..=1.0).contains(&p.visibility),
                    "joint `{}` has visibility {} outside [0, 1]",
                    joint.name,
                    p.visibility
                );
            }
        }
        Ok(())
    }
}

/// Speed magnitudes (m/s), one channel per body part, on a shared clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub sample_rate: f64,
    pub channels: Vec<Vec<f64>>,
}

impl SpeedProfile {
    pub fn new(sample_rate: f64, channels: Vec<Vec<f64>>) -> Result<Self> {
        let profile = Self {
            sample_rate,
            channels,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.sample_rate.is_finite() && self.sample_rate > 0.0,
            "sample_rate must be positive, got {}",
            self.sample_rate
        );
        ensure!(!self.channels.is_empty(), "speed profile has no channels");
        let n = self.channels[0].len();
        ensure!(n > 0, "speed profile channels are empty");
        for (m, ch) in self.channels.iter().enumerate() {
            ensure!(
                ch.len() == n,
                "channel {m} has {} samples, expected {n}",
                ch.len()
            );
            ensure!(
                ch.iter().all(|v| v.is_finite() && *v >= 0.0),
                "channel {m} has a negative or non-finite speed"
            );
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn channel(&self, m: usize) -> SpeedProfile {
        SpeedProfile {
            sample_rate: self.sample_rate,
            channels: vec![self.channels[m].clone()],
        }
    }
}

/// Meters per pixel for a subject whose pupils are `d_ip_px` pixels apart.
pub fn pixel_scale_factor(d_ip_px: f64) -> Result<f64> {
    ensure!(
        d_ip_px.is_finite() && d_ip_px > 0.0,
        "interpupillary distance must be positive and finite, got {d_ip_px}"
    );
    Ok(INTERPUPILLARY_M / d_ip_px)
}

/// Converts landmark tracks into metric joint speeds.
///
/// Sample `k` of each output channel is the displacement between frames `k`
/// and `k + 1`, so the profile has one sample fewer than the track has
/// frames. Steps touching a landmark below the visibility floor are zero.
/// The raw speeds are then smoothed with a zero-phase second-order
/// Butterworth low-pass and clipped at zero.
pub fn landmarks_to_speeds(track: &LandmarkTrack, lowpass_cutoff_hz: f64) -> Result<SpeedProfile> {
    landmarks_to_speeds_with_floor(track, lowpass_cutoff_hz, DEFAULT_VISIBILITY_FLOOR)
}

pub fn landmarks_to_speeds_with_floor(
    track: &LandmarkTrack,
    lowpass_cutoff_hz: f64,
    visibility_floor: f64,
) -> Result<SpeedProfile> {
    track.validate()?;
    let nyquist = track.frame_rate / 2.0;
    ensure!(
        lowpass_cutoff_hz > 0.0 && lowpass_cutoff_hz < nyquist,
        "low-pass cutoff {lowpass_cutoff_hz} Hz must lie in (0, {nyquist}) Hz"
    );
    let scale = pixel_scale_factor(track.interpupillary_px)? * track.frame_rate;
    let filter = Biquad::butterworth_lowpass(lowpass_cutoff_hz, track.frame_rate);

    let channels = track
        .joints
        .iter()
        .map(|joint| {
            let raw = raw_speeds(&joint.points, scale, visibility_floor);
            filter
                .filtfilt(&raw)
                .into_iter()
                .map(|v| v.max(0.0))
                .collect()
        })
        .collect();
    SpeedProfile::new(track.frame_rate, channels)
}

fn raw_speeds(points: &[Landmark], scale: f64, visibility_floor: f64) -> Vec<f64> {
    points
        .windows(2)
        .map(|w| {
            if w[0].visibility < visibility_floor || w[1].visibility < visibility_floor {
                0.0
            } else {
                (w[1].x_px - w[0].x_px).hypot(w[1].y_px - w[0].y_px) * scale
            }
        })
        .collect()
}

/// Second-order IIR section in transposed direct form II.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    /// Bilinear-transform Butterworth low-pass with a prewarped cutoff.
    pub(crate) fn butterworth_lowpass(cutoff_hz: f64, sample_rate: f64) -> Self {
        let k = (PI * cutoff_hz / sample_rate).tan();
        let norm = 1.0 / (1.0 + SQRT_2 * k + k * k);
        let b0 = k * k * norm;
        Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - SQRT_2 * k + k * k) * norm],
        }
    }

    fn run(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let Some(&x0) = x.first() else { return };
        // Steady state for a constant input of x0 (unity DC gain).
        let mut z2 = (self.b[2] - self.a[1]) * x0;
        let mut z1 = (1.0 - self.b[0]) * x0;
        for &xi in x {
            let y = self.b[0] * xi + z1;
            z1 = self.b[1] * xi - self.a[0] * y + z2;
            z2 = self.b[2] * xi - self.a[1] * y;
            out.push(y);
        }
    }

    /// Forward-backward filtering with odd-reflection padding at both ends.
    pub(crate) fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = 9.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let mut fwd = Vec::with_capacity(ext.len());
        self.run(&ext, &mut fwd);
        fwd.reverse();
        let mut back = Vec::with_capacity(ext.len());
        self.run(&fwd, &mut back);
        back.reverse();
        back[pad..pad + n].to_vec()
    }
}

/// Parameters of the synthetic fidget process for one individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FidgetProcessParams {
    pub silent_mean_s: f64,
    pub fidget_mean_s: f64,
    pub peak_speed_range: (f64, f64),
    pub n_body_parts: usize,
    pub envelope_smoothness_hz: f64,
    pub seed: u64,
}

impl Default for FidgetProcessParams {
    fn default() -> Self {
        Self {
            silent_mean_s: 12.0,
            fidget_mean_s: 1.5,
            peak_speed_range: (0.03, 0.45),
            n_body_parts: 3,
            envelope_smoothness_hz: 4.0,
            seed: 0,
        }
    }
}

impl FidgetProcessParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.peak_speed_range;
        ensure!(
            self.silent_mean_s > 0.0 && self.fidget_mean_s > 0.0,
            "silent and fidget mean durations must be positive"
        );
        ensure!(
            lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi,
            "peak speed range ({lo}, {hi}) must satisfy 0 <= lo <= hi"
        );
        ensure!(self.n_body_parts >= 1, "need at least one body part");
        ensure!(
            self.envelope_smoothness_hz > 0.0,
            "envelope smoothness must be positive"
        );
        Ok(())
    }
}

/// Synthesizes a fidgeting speed profile.
///
/// Each body part runs an independent alternating renewal process started
/// in its stationary state: exponential silent gaps of exact zero speed and
/// exponential-length bursts shaped as raised-cosine bumps whose peak is
/// uniform over `peak_speed_range`. Bursts are then low-passed at
/// `envelope_smoothness_hz` (zero phase) and restricted back to their own
/// support, so silent samples stay exactly zero.
pub fn synth_fidget_profile(
    params: &FidgetProcessParams,
    duration_s: f64,
    sample_rate: f64,
) -> Result<SpeedProfile> {
    params.validate()?;
    ensure!(
        duration_s.is_finite() && duration_s > 0.0,
        "duration must be positive, got {duration_s}"
    );
    ensure!(
        sample_rate.is_finite() && sample_rate > 0.0,
        "sample rate must be positive, got {sample_rate}"
    );
    let n = ((duration_s * sample_rate).round() as usize).max(1);
    let silent = Exp::new(1.0 / params.silent_mean_s).expect("positive rate");
    let fidget = Exp::new(1.0 / params.fidget_mean_s).expect("positive rate");
    let (lo, hi) = params.peak_speed_range;
    let smoother = (params.envelope_smoothness_hz < sample_rate / 2.0)
        .then(|| Biquad::butterworth_lowpass(params.envelope_smoothness_hz, sample_rate));
    let p_silent = params.silent_mean_s / (params.silent_mean_s + params.fidget_mean_s);

    let channels = (0..params.n_body_parts)
        .map(|part| {
            let mut rng = seed::derive_rng(params.seed, &[part as u64]);
            let mut speeds = vec![0.0; n];
            let mut t = 0.0;
            let mut in_silence = rng.random::<f64>() < p_silent;
            while t < duration_s {
                if in_silence {
                    t += silent.sample(&mut rng);
                } else {
                    let len = fidget.sample(&mut rng);
                    let peak = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                    write_burst(&mut speeds, sample_rate, t, len, peak, smoother.as_ref());
                    t += len;
                }
                in_silence = !in_silence;
            }
            speeds
        })
        .collect();
    SpeedProfile::new(sample_rate, channels)
}

fn write_burst(
    speeds: &mut [f64],
    sample_rate: f64,
    start: f64,
    len: f64,
    peak: f64,
    smoother: Option<&Biquad>,
) {
    let first = (start * sample_rate).ceil() as usize;
    let end = (((start + len) * sample_rate).ceil() as usize).min(speeds.len());
    if first >= end || peak <= 0.0 {
        return;
    }
    let bump: Vec<f64> = (first..end)
        .map(|k| {
            let phase = (k as f64 / sample_rate - start) / len;
            peak * 0.5 * (1.0 - (2.0 * PI * phase).cos())
        })
        .collect();
    let bump = match smoother {
        Some(f) if bump.len() > 2 => f.filtfilt(&bump),
        _ => bump,
    };
    for (slot, v) in speeds[first..end].iter_mut().zip(bump) {
        *slot = slot.max(v.max(0.0));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn track_from(xs: &[(f64, f64)], fps: f64, d_ip: f64) -> LandmarkTrack {
        LandmarkTrack {
            frame_rate: fps,
            interpupillary_px: d_ip,
            joints: vec![JointTrack {
                name: "wrist".into(),
                points: xs
                    .iter()
                    .map(|&(x, y)| Landmark {
                        x_px: x,
                        y_px: y,
                        visibility: 1.0,
                    })
                    .collect(),
            }],
        }
    }

    #[test]
    fn scale_factor_examples() {
        assert_eq!(pixel_scale_factor(63.36).unwrap(), 0.001);
        assert_eq!(pixel_scale_factor(126.72).unwrap(), 0.0005);
        assert_eq!(pixel_scale_factor(31.68).unwrap(), 0.002);
        assert!(pixel_scale_factor(0.0).is_err());
        assert!(pixel_scale_factor(-3.0).is_err());
        assert!(pixel_scale_factor(f64::NAN).is_err());
        assert!(pixel_scale_factor(f64::INFINITY).is_err());
    }

    #[test]
    fn stationary_joint_gives_zero_speed() {
        let track = track_from(&[(10.0, 20.0); 50], 30.0, 63.36);
        let p = landmarks_to_speeds(&track, 6.0).unwrap();
        assert_eq!(p.len(), 49);
        assert!(p.channels[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_pixel_step_at_30fps() {
        let xs: Vec<_> = (0..120).map(|k| (k as f64, 0.0)).collect();
        let track = track_from(&xs, 30.0, 63.36);
        let raw = raw_speeds(&track.joints[0].points, 0.001 * 30.0, 0.5);
        assert!(raw.iter().all(|&v| (v - 0.03).abs() < 1e-15));
        // constant speed passes the low-pass unchanged
        let p = landmarks_to_speeds(&track, 6.0).unwrap();
        for v in &p.channels[0] {
            assert_relative_eq!(*v, 0.03, max_relative = 1e-9);
        }
    }

    #[test]
    fn spike_is_attenuated_by_lowpass() {
        let mut xs = vec![(100.0, 100.0); 90];
        xs[45] = (130.0, 100.0);
        let track = track_from(&xs, 30.0, 63.36);
        let raw = raw_speeds(&track.joints[0].points, 0.001 * 30.0, 0.5);
        let unfiltered_peak = raw.iter().cloned().fold(0.0, f64::max);
        let filtered = landmarks_to_speeds(&track, 2.0).unwrap();
        let filtered_peak = filtered.channels[0].iter().cloned().fold(0.0, f64::max);
        assert!(filtered_peak < unfiltered_peak);
        assert!(filtered_peak > 0.0);
    }

    #[test]
    fn low_visibility_steps_are_zeroed() {
        let xs: Vec<_> = (0..10).map(|k| (5.0 * k as f64, 0.0)).collect();
        let mut track = track_from(&xs, 30.0, 63.36);
        track.joints[0].points[4].visibility = 0.2;
        let raw = raw_speeds(&track.joints[0].points, 1.0, 0.5);
        assert_eq!(raw[3], 0.0);
        assert_eq!(raw[4], 0.0);
        assert_eq!(raw[2], 5.0);
    }

    #[test]
    fn rejects_bad_tracks() {
        let short = track_from(&[(0.0, 0.0)], 30.0, 63.36);
        assert!(landmarks_to_speeds(&short, 6.0).is_err());
        let ok = track_from(&[(0.0, 0.0); 10], 30.0, 63.36);
        assert!(landmarks_to_speeds(&ok, 15.0).is_err());
        assert!(landmarks_to_speeds(&ok, 0.0).is_err());
        let mut bad_vis = ok.clone();
        bad_vis.joints[0].points[0].visibility = 1.5;
        assert!(landmarks_to_speeds(&bad_vis, 6.0).is_err());
    }

    proptest! {
        #[test]
        fn translation_and_scale_invariance(
            steps in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 20..60),
            dx in -500.0f64..500.0,
            dy in -500.0f64..500.0,
            scale in 0.25f64..4.0,
        ) {
            let mut pos = (200.0, 200.0);
            let xs: Vec<_> = steps.iter().map(|&(a, b)| { pos.0 += a; pos.1 += b; pos }).collect();
            let base = landmarks_to_speeds(&track_from(&xs, 30.0, 60.0), 6.0).unwrap();

            let shifted: Vec<_> = xs.iter().map(|&(x, y)| (x + dx, y + dy)).collect();
            let moved = landmarks_to_speeds(&track_from(&shifted, 30.0, 60.0), 6.0).unwrap();
            let scaled: Vec<_> = xs.iter().map(|&(x, y)| (x * scale, y * scale)).collect();
            let zoomed = landmarks_to_speeds(&track_from(&scaled, 30.0, 60.0 * scale), 6.0).unwrap();

            for ((a, b), c) in base.channels[0].iter().zip(&moved.channels[0]).zip(&zoomed.channels[0]) {
                prop_assert!((a - b).abs() < 1e-9);
                prop_assert!((a - c).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_peak_range_gives_silence() {
        let params = FidgetProcessParams {
            peak_speed_range: (0.0, 0.0),
            ..Default::default()
        };
        let p = synth_fidget_profile(&params, 120.0, 30.0).unwrap();
        assert!(p.channels.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn synth_is_deterministic() {
        let params = FidgetProcessParams {
            seed: 17,
            ..Default::default()
        };
        let a = synth_fidget_profile(&params, 300.0, 30.0).unwrap();
        let b = synth_fidget_profile(&params, 300.0, 30.0).unwrap();
        assert_eq!(a, b);
        let c = synth_fidget_profile(&FidgetProcessParams { seed: 18, ..params }, 300.0, 30.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn duty_cycle_matches_renewal_ratio() {
        let params = FidgetProcessParams {
            silent_mean_s: 13.5,
            fidget_mean_s: 1.5,
            n_body_parts: 1,
            seed: 5,
            ..Default::default()
        };
        let p = synth_fidget_profile(&params, 3600.0, 30.0).unwrap();
        let active = p.channels[0].iter().filter(|&&v| v > 0.0).count();
        let duty = active as f64 / p.len() as f64;
        assert!((duty - 0.1).abs() <= 0.02, "duty cycle {duty}");
    }
}
