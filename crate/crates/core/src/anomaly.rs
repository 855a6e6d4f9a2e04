//! Reconstruction-error anomaly detection on bandwidth windows.
//!
//! A single-hidden-layer autoencoder (sigmoid hidden units, linear output)
//! is trained on crowd-fidget bandwidth windows. At inference a window whose
//! reconstruction error exceeds `threshold_ratio` times the mean training
//! error is anomalous, and every sample it covers is masked.

use std::ops::RangeInclusive;

use log::warn;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::carson::BandwidthSeries;
use crate::error::{ensure, Error, Result};
use crate::seed;

pub const ACTIVATION: &str = "sigmoid-linear";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnomalyConfig {
    pub window_s: f64,
    pub threshold_ratio: f64,
    pub hidden_dim: usize,
    pub l2_weight: f64,
    pub sparsity_weight: f64,
    pub sparsity_target: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Inputs are divided by this before entering the network (Hz).
    pub input_scale_hz: f64,
    pub seed: u64,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        Self {
            window_s: 2.0,
            threshold_ratio: 1.5,
            hidden_dim: 32,
            l2_weight: 1e-6,
            sparsity_weight: 1e-4,
            sparsity_target: 0.05,
            epochs: 50,
            learning_rate: 20.0,
            batch_size: 64,
            input_scale_hz: 100.0,
            seed: 0,
        }
    }
}

impl AnomalyConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.window_s > 0.0, "window_s must be positive");
        ensure!(self.threshold_ratio > 1.0, "threshold_ratio must exceed 1");
        ensure!(self.epochs >= 1, "need at least one epoch");
        ensure!(self.hidden_dim >= 1 && self.batch_size >= 1, "hidden_dim and batch_size must be positive");
        ensure!(
            self.l2_weight >= 0.0 && self.sparsity_weight >= 0.0,
            "regularizer weights must be nonnegative"
        );
        ensure!(
            self.sparsity_target > 0.0 && self.sparsity_target < 1.0,
            "sparsity target must lie in (0, 1)"
        );
        ensure!(self.learning_rate > 0.0, "learning rate must be positive");
        ensure!(self.input_scale_hz > 0.0, "input scale must be positive");
        Ok(())
    }

    /// Window length in samples for a series with the given sample period.
    pub fn window_len(&self, sample_period_s: f64) -> usize {
        ((self.window_s / sample_period_s).round() as usize).max(1)
    }
}

/// Trained autoencoder. Weight matrices are stored row-major:
/// `encoder_weights` is `hidden_dim x input_dim`, `decoder_weights` is
/// `input_dim x hidden_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub activation: String,
    pub encoder_weights: Vec<f64>,
    pub encoder_bias: Vec<f64>,
    pub decoder_weights: Vec<f64>,
    pub decoder_bias: Vec<f64>,
    pub input_scale_hz: f64,
    pub train_error_mean: f64,
}

/// Per-sample exclusion flags aligned with a bandwidth series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyMask {
    pub flags: Vec<bool>,
}

impl AnomalyMask {
    pub fn none(len: usize) -> Self {
        Self { flags: vec![false; len] }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn flagged(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn flag_rate(&self) -> f64 {
        if self.flags.is_empty() {
            0.0
        } else {
            self.flagged() as f64 / self.flags.len() as f64
        }
    }
}

struct Weights {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Weights {
    fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let r = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let u = Uniform::new(-r, r).expect("nonempty range");
        Self {
            w1: Array2::from_shape_fn((hidden_dim, input_dim), |_| u.sample(rng)),
            b1: Array1::zeros(hidden_dim),
            w2: Array2::from_shape_fn((input_dim, hidden_dim), |_| u.sample(rng)),
            b2: Array1::zeros(input_dim),
        }
    }

    fn hidden(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut h = x.dot(&self.w1.t()) + &self.b1;
        h.mapv_inplace(sigmoid);
        h
    }

    fn output(&self, h: &Array2<f64>) -> Array2<f64> {
        h.dot(&self.w2.t()) + &self.b2
    }

    /// Mean squared error of each row.
    fn errors(&self, x: &ArrayView2<f64>) -> Vec<f64> {
        let y = self.output(&self.hidden(x));
        let d = x.ncols() as f64;
        (y - x)
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|e| e * e).sum::<f64>() / d)
            .collect()
    }

    fn into_model(self, input_scale_hz: f64, train_error_mean: f64) -> AutoencoderModel {
        AutoencoderModel {
            input_dim: self.w1.ncols(),
            hidden_dim: self.w1.nrows(),
            activation: ACTIVATION.to_string(),
            encoder_weights: self.w1.iter().copied().collect(),
            encoder_bias: self.b1.to_vec(),
            decoder_weights: self.w2.iter().copied().collect(),
            decoder_bias: self.b2.to_vec(),
            input_scale_hz,
            train_error_mean,
        }
    }
}

impl AutoencoderModel {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.activation == ACTIVATION, "unsupported activation `{}`", self.activation);
        ensure!(
            self.encoder_weights.len() == self.input_dim * self.hidden_dim
                && self.decoder_weights.len() == self.input_dim * self.hidden_dim
                && self.encoder_bias.len() == self.hidden_dim
                && self.decoder_bias.len() == self.input_dim,
            "weight shapes do not match dims {}x{}",
            self.input_dim,
            self.hidden_dim
        );
        let params = self
            .encoder_weights
            .iter()
            .chain(&self.encoder_bias)
            .chain(&self.decoder_weights)
            .chain(&self.decoder_bias);
        ensure!(params.clone().all(|v| v.is_finite()), "model has non-finite parameters");
        ensure!(
            self.train_error_mean.is_finite() && self.train_error_mean > 0.0,
            "train_error_mean must be positive"
        );
        ensure!(self.input_scale_hz > 0.0, "input scale must be positive");
        Ok(())
    }

    fn weights(&self) -> Weights {
        let (d, h) = (self.input_dim, self.hidden_dim);
        Weights {
            w1: Array2::from_shape_vec((h, d), self.encoder_weights.clone()).expect("validated shape"),
            b1: Array1::from(self.encoder_bias.clone()),
            w2: Array2::from_shape_vec((d, h), self.decoder_weights.clone()).expect("validated shape"),
            b2: Array1::from(self.decoder_bias.clone()),
        }
    }

    /// Squared Frobenius norm of both weight matrices.
    pub fn weight_norm_sq(&self) -> f64 {
        self.encoder_weights
            .iter()
            .chain(&self.decoder_weights)
            .map(|w| w * w)
            .sum()
    }

    /// Mean squared reconstruction error (normalized units) per window.
    pub fn reconstruction_errors(&self, windows: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.validate()?;
        let x = stack(windows, self.input_dim, self.input_scale_hz)?;
        Ok(self.weights().errors(&x.view()))
    }
}

fn stack(windows: &[Vec<f64>], dim: usize, scale: f64) -> Result<Array2<f64>> {
    let mut x = Array2::zeros((windows.len(), dim));
    for (mut row, w) in x.rows_mut().into_iter().zip(windows) {
        ensure!(w.len() == dim, "window has {} samples, expected {dim}", w.len());
        row.iter_mut().zip(w).for_each(|(r, v)| *r = v / scale);
    }
    Ok(x)
}

/// Synthetic crowd windows: for each window draw `N` uniformly from
/// `n_range`, pick `N` pool segments with replacement, shift each circularly
/// by a random offset, take their pointwise maximum and crop a random
/// `window_len` span.
pub fn build_training_set(
    segment_pool: &[BandwidthSeries],
    n_range: RangeInclusive<usize>,
    count: usize,
    window_len: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    ensure!(!segment_pool.is_empty(), "segment pool is empty");
    ensure!(*n_range.start() >= 1 && !n_range.is_empty(), "crowd size range must be nonempty and start at 1 or more");
    ensure!(window_len >= 1, "window length must be positive");
    let usable: Vec<&BandwidthSeries> = segment_pool
        .iter()
        .filter(|s| {
            let ok = s.len() >= window_len;
            if !ok {
                warn!("skipping pool segment of {} samples (< {window_len})", s.len());
            }
            ok
        })
        .collect();
    ensure!(!usable.is_empty(), "no pool segment is at least {window_len} samples long");
    let min_len = usable.iter().map(|s| s.len()).min().expect("nonempty");

    let mut rng = seed::rng(seed);
    let mut windows = Vec::with_capacity(count);
    for _ in 0..count {
        let n = rng.random_range(n_range.clone());
        let crop = rng.random_range(0..=min_len - window_len);
        let mut window = vec![0.0f64; window_len];
        for _ in 0..n {
            let seg = usable[rng.random_range(0..usable.len())];
            let shift = rng.random_range(0..seg.len());
            for (j, w) in window.iter_mut().enumerate() {
                *w = w.max(seg.values[(crop + j + shift) % seg.len()]);
            }
        }
        windows.push(window);
    }
    Ok(windows)
}

pub fn train_autoencoder(windows: &[Vec<f64>], config: &AnomalyConfig) -> Result<AutoencoderModel> {
    train_autoencoder_traced(windows, config).map(|(m, _)| m)
}

/// Trains the autoencoder and also returns the mean training loss of each
/// epoch. Plain mini-batch gradient descent on
/// `mean squared error + l2/2 |W|^2 + beta * sum_j KL(rho || rho_hat_j)`.
pub fn train_autoencoder_traced(
    windows: &[Vec<f64>],
    config: &AnomalyConfig,
) -> Result<(AutoencoderModel, Vec<f64>)> {
    config.validate()?;
    ensure!(!windows.is_empty(), "no training windows");
    let dim = windows[0].len();
    ensure!(dim >= 1, "training windows are empty");
    let x = stack(windows, dim, config.input_scale_hz)?;

    let mut rng = seed::derive_rng(config.seed, &[seed::STREAM_ANOMALY_TRAIN]);
    let mut w = Weights::init(dim, config.hidden_dim, &mut rng);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut losses = Vec::with_capacity(config.epochs);
    let rho = config.sparsity_target;
    let lr = config.learning_rate;
    let lambda = config.l2_weight;
    let beta = config.sparsity_weight;
    let d = dim as f64;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let b = batch.len() as f64;
            let xb = x.select(Axis(0), batch);
            let h = w.hidden(&xb.view());
            let y = w.output(&h);
            let diff = &y - &xb;
            let rho_hat = h.mean_axis(Axis(0)).expect("nonempty batch").mapv(|r| r.clamp(1e-12, 1.0 - 1e-12));

            let mse = diff.iter().map(|e| e * e).sum::<f64>() / (b * d);
            let l2 = 0.5 * lambda * (w.w1.iter().chain(w.w2.iter()).map(|v| v * v).sum::<f64>());
            let sparsity: f64 = rho_hat
                .iter()
                .map(|&r| rho * (rho / r).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - r)).ln())
                .sum();
            let loss = mse + l2 + beta * sparsity;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    batch: batch_idx,
                    loss,
                });
            }
            epoch_loss += loss * b;

            let dy = diff * (2.0 / (b * d));
            let dw2 = dy.t().dot(&h) + &(&w.w2 * lambda);
            let db2 = dy.sum_axis(Axis(0));
            let dsparse = rho_hat.mapv(|r| beta * (-rho / r + (1.0 - rho) / (1.0 - r)) / b);
            let dh = dy.dot(&w.w2) + &dsparse;
            let dz = dh * &h.mapv(|v| v * (1.0 - v));
            let dw1 = dz.t().dot(&xb) + &(&w.w1 * lambda);
            let db1 = dz.sum_axis(Axis(0));

            w.w1.scaled_add(-lr, &dw1);
            w.b1.scaled_add(-lr, &db1);
            w.w2.scaled_add(-lr, &dw2);
            w.b2.scaled_add(-lr, &db2);
        }
        losses.push(epoch_loss / windows.len() as f64);
    }

    let errors = chunked_errors(&w, &x.view());
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    // A perfect fit would make every window anomalous at any ratio.
    let mean = mean.max(f64::MIN_POSITIVE);
    ensure!(
        w.w1.iter().chain(w.w2.iter()).all(|v| v.is_finite()),
        "training produced non-finite weights"
    );
    Ok((w.into_model(config.input_scale_hz, mean), losses))
}

fn chunked_errors(w: &Weights, x: &ArrayView2<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.nrows());
    let mut start = 0;
    while start < x.nrows() {
        let end = (start + 4096).min(x.nrows());
        out.extend(w.errors(&x.slice(s![start..end, ..])));
        start = end;
    }
    out
}

/// Reconstruction error of every full window (stride one sample).
pub fn window_errors(bw: &BandwidthSeries, model: &AutoencoderModel) -> Result<Vec<f64>> {
    model.validate()?;
    let dim = model.input_dim;
    ensure!(
        bw.len() >= dim,
        "series of {} samples is shorter than one {dim}-sample window",
        bw.len()
    );
    let weights = model.weights();
    let n_windows = bw.len() - dim + 1;
    let mut errors = Vec::with_capacity(n_windows);
    let mut start = 0;
    while start < n_windows {
        let end = (start + 2048).min(n_windows);
        let x = Array2::from_shape_fn((end - start, dim), |(i, j)| {
            bw.values[start + i + j] / model.input_scale_hz
        });
        errors.extend(weights.errors(&x.view()));
        start = end;
    }
    Ok(errors)
}

/// Masks every sample covered by at least one window whose reconstruction
/// error exceeds `threshold_ratio * train_error_mean`.
pub fn flag_anomalies(bw: &BandwidthSeries, model: &AutoencoderModel, config: &AnomalyConfig) -> Result<AnomalyMask> {
    ensure!(config.threshold_ratio > 1.0, "threshold_ratio must exceed 1");
    let errors = window_errors(bw, model)?;
    let threshold = config.threshold_ratio * model.train_error_mean;
    let dim = model.input_dim;
    // +1 at each flagged window start, -1 one past its end.
    let mut delta = vec![0i64; bw.len() + 1];
    for (i, e) in errors.iter().enumerate() {
        if *e > threshold {
            delta[i] += 1;
            delta[i + dim] -= 1;
        }
    }
    let mut cover = 0;
    let flags = delta[..bw.len()]
        .iter()
        .map(|d| {
            cover += d;
            cover > 0
        })
        .collect();
    Ok(AnomalyMask { flags })
}
