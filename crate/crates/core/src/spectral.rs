//! Short-window power spectra shared by the speed-band and RF extractors.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Mean-removed frames whose residual energy falls below this fraction of the
/// raw frame energy are treated as constant. Rounding in the mean leaves
/// residues around 1e-34 of the raw energy on genuinely constant input.
const NEGLIGIBLE_ENERGY: f64 = 1e-20;

/// Fraction of each frame covered by the cosine tapers of the Tukey window
/// (half at each end). The flat middle keeps content near the frame edges
/// visible, which the sliding-max speed of the Carson window also sees.
const TAPER_FRACTION: f64 = 0.5;

/// Tukey-tapered power spectrum of mean-removed frames of a fixed length.
///
/// Bins run from DC to Nyquist (`len / 2 + 1` of them) with spacing
/// `sample_rate / len`. Frames shorter than `len` (truncated edge windows)
/// are zero-padded after tapering with a window of their own length, so the
/// bin grid is the same for every frame.
pub(crate) struct FramePower {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    taper: Vec<f64>,
}

impl FramePower {
    pub(crate) fn new(len: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Self {
            len,
            fft,
            buf: vec![Complex::default(); len],
            scratch,
            taper: tukey(len),
        }
    }

    pub(crate) fn n_bins(&self) -> usize {
        self.len / 2 + 1
    }

    /// Writes the one-sided power of `frame` into `out` (length `n_bins`).
    /// Returns false, leaving `out` zeroed, when the frame is constant.
    pub(crate) fn power_into(&mut self, frame: &[f64], out: &mut [f64]) -> bool {
        debug_assert!(frame.len() <= self.len && !frame.is_empty());
        debug_assert_eq!(out.len(), self.n_bins());
        out.iter_mut().for_each(|p| *p = 0.0);

        let mean = frame.iter().sum::<f64>() / frame.len() as f64;
        let raw: f64 = frame.iter().map(|x| x * x).sum();
        let resid: f64 = frame.iter().map(|x| (x - mean) * (x - mean)).sum();
        if resid <= NEGLIGIBLE_ENERGY * raw || resid == 0.0 {
            return false;
        }

        let owned;
        let taper: &[f64] = if frame.len() == self.len {
            &self.taper
        } else {
            owned = tukey(frame.len());
            &owned
        };
        for (slot, (x, w)) in self.buf.iter_mut().zip(frame.iter().zip(taper)) {
            *slot = Complex::new((x - mean) * w, 0.0);
        }
        for slot in &mut self.buf[frame.len()..] {
            *slot = Complex::default();
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (p, c) in out.iter_mut().zip(&self.buf) {
            *p = c.norm_sqr();
        }
        true
    }
}

/// Periodic Tukey window with `TAPER_FRACTION` of the frame in cosine ramps.
fn tukey(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let half = TAPER_FRACTION / 2.0;
    (0..len)
        .map(|n| {
            let x = n as f64 / len as f64;
            let edge = x.min(1.0 - x);
            if edge < half {
                0.5 * (1.0 - (PI * edge / half).cos())
            } else {
                1.0
            }
        })
        .collect()
}

/// Index of the first bin at which cumulative power reaches `fraction` of the
/// total. `None` when the spectrum carries no power.
pub(crate) fn power_quantile_bin(power: &[f64], fraction: f64) -> Option<usize> {
    let total: f64 = power.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let target = fraction * total;
    let mut acc = 0.0;
    for (k, p) in power.iter().enumerate() {
        acc += p;
        if acc >= target {
            return Some(k);
        }
    }
    Some(power.len() - 1)
}
