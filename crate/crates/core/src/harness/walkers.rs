use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::carson::BandwidthSeries;
use crate::error::{ensure, Result};
use crate::seed;

/// Walker bursts: a linear rise to a plateau, the plateau, and a linear
/// fall, overlaid on the crowd series by pointwise maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkerConfig {
    /// Fraction of the timeline covered by bursts, drawn per trace.
    pub coverage: (f64, f64),
    /// Burst duration including ramps (s).
    pub duration_s: (f64, f64),
    /// Plateau height as a fraction of Nyquist.
    pub plateau_fraction: (f64, f64),
    /// Length of each ramp (s).
    pub ramp_s: (f64, f64),
}

impl Default for WalkerConfig {
    fn default() -> Self {
        Self {
            coverage: (0.10, 0.20),
            duration_s: (5.0, 15.0),
            plateau_fraction: (0.6, 0.9),
            ramp_s: (1.0, 2.0),
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    ensure!(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi, "bad {name} range ({lo}, {hi})");
    Ok(())
}

fn draw<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

impl WalkerConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("coverage", self.coverage)?;
        check_range("duration_s", self.duration_s)?;
        check_range("plateau_fraction", self.plateau_fraction)?;
        check_range("ramp_s", self.ramp_s)?;
        ensure!(self.coverage.1 < 1.0, "coverage must stay below 1");
        ensure!(self.duration_s.0 > 0.0, "burst duration must be positive");
        ensure!(
            2.0 * self.ramp_s.1 <= self.duration_s.0,
            "two ramps must fit in the shortest burst"
        );
        Ok(())
    }
}

/// Returns the injected series and per-sample burst membership.
pub fn inject_walkers(
    bw: &BandwidthSeries,
    config: &WalkerConfig,
    nyquist_hz: f64,
    seed: u64,
) -> Result<(BandwidthSeries, Vec<bool>)> {
    config.validate()?;
    ensure!(nyquist_hz > 0.0, "nyquist must be positive");
    let mut rng = seed::rng(seed);
    let dt = bw.sample_period_s;
    let len = bw.len();
    let target = (draw(&mut rng, config.coverage) * len as f64).round() as usize;

    let mut bursts = Vec::new();
    let mut covered = 0;
    while covered < target {
        let d = ((draw(&mut rng, config.duration_s) / dt).round() as usize).clamp(1, target - covered);
        bursts.push(d);
        covered += d;
    }
    // Spread the uncovered time over the gaps around the bursts.
    let free = len - covered;
    let mut cuts: Vec<usize> = (0..bursts.len()).map(|_| rng.random_range(0..=free)).collect();
    cuts.sort_unstable();

    let mut values = bw.values.clone();
    let mut truth = vec![false; len];
    let mut offset = 0;
    for (&d, &cut) in bursts.iter().zip(&cuts) {
        let start = cut + offset;
        offset += d;
        let height = draw(&mut rng, config.plateau_fraction) * nyquist_hz;
        let ramp = ((draw(&mut rng, config.ramp_s) / dt).round() as usize).min(d / 2).max(1);
        for j in 0..d {
            let edge = (j + 1).min(d - j) as f64;
            let level = height * (edge / ramp as f64).min(1.0);
            let k = start + j;
            values[k] = values[k].max(level);
            truth[k] = true;
        }
    }
    Ok((
        BandwidthSeries {
            values,
            ..bw.clone()
        },
        truth,
    ))
}
