//! Distribution matching against the crowd prior family.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::anomaly::AnomalyMask;
use crate::carson::BandwidthSeries;
use crate::crowd::{BandwidthHistogram, CrowdPriorSet, DEFAULT_FLOOR};
use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    /// Kullback-Leibler divergence, observed distribution first.
    Kl,
    /// Jensen-Shannon divergence.
    Js,
    /// Total variation distance.
    Tv,
    /// Bhattacharyya distance.
    #[serde(rename = "bhat")]
    Bhattacharyya,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 4] = [Self::Kl, Self::Js, Self::Tv, Self::Bhattacharyya];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Kl => "kl",
            Self::Js => "js",
            Self::Tv => "tv",
            Self::Bhattacharyya => "bhat",
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl" => Ok(Self::Kl),
            "js" => Ok(Self::Js),
            "tv" => Ok(Self::Tv),
            "bhat" | "bhattacharyya" => Ok(Self::Bhattacharyya),
            other => Err(Error::invalid(format!(
                "unknown metric `{other}` (expected kl, js, tv or bhat)"
            ))),
        }
    }
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum()
}

fn distance_unchecked(p: &[f64], q: &[f64], metric: DistanceMetric) -> f64 {
    let d = match metric {
        DistanceMetric::Kl => kl(p, q),
        DistanceMetric::Js => {
            let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
            0.5 * kl(p, &m) + 0.5 * kl(q, &m)
        }
        DistanceMetric::Tv => 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>(),
        DistanceMetric::Bhattacharyya => -p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum::<f64>().ln(),
    };
    // Rounding can push identical inputs a hair below zero.
    d.max(0.0)
}

/// Distance from `observed` to `prior` in nats (or probability mass for TV).
pub fn distance(observed: &BandwidthHistogram, prior: &BandwidthHistogram, metric: DistanceMetric) -> Result<f64> {
    ensure!(
        observed.grid().same_as(prior.grid()),
        "histograms use different bin grids"
    );
    Ok(distance_unchecked(observed.pdf(), prior.pdf(), metric))
}

/// Crowd size whose prior is closest to `observed`, with the distance to
/// every prior (index `N - 1`). Ties go to the smaller `N`.
pub fn estimate_count(
    observed: &BandwidthHistogram,
    priors: &CrowdPriorSet,
    metric: DistanceMetric,
) -> Result<(usize, Vec<f64>)> {
    ensure!(!priors.is_empty(), "prior set is empty");
    let distances = priors
        .iter()
        .map(|(_, prior)| distance(observed, prior, metric))
        .collect::<Result<Vec<_>>>()?;
    Ok((argmin(&distances) + 1, distances))
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Time-indexed crowd-size estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateTrace {
    /// Update times (s, on the series clock, at the end of the data used).
    pub times: Vec<f64>,
    pub estimates: Vec<usize>,
    /// Distance to each prior at each update, index `N - 1`.
    pub distances: Vec<Vec<f64>>,
    /// Estimate at the last update, `None` if every update was withheld.
    pub final_estimate: Option<usize>,
    /// Update times at which every sample so far was masked.
    pub withheld: Vec<f64>,
    /// Start of the series (s).
    pub start_s: f64,
    /// Total observed duration (s).
    pub duration_s: f64,
}

impl EstimateTrace {
    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    pub fn has_estimate(&self) -> bool {
        self.final_estimate.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamingConfig {
    pub metric: DistanceMetric,
    pub update_every_s: f64,
    pub floor: f64,
}

impl Default for StreamingConfig {
    fn default() -> Self {
        Self {
            metric: DistanceMetric::Kl,
            update_every_s: 1.0,
            floor: DEFAULT_FLOOR,
        }
    }
}

/// Re-estimates the crowd size every `update_every_s` from all unmasked
/// samples seen so far, plus once at the end of the series.
pub fn streaming_estimate(
    bw: &BandwidthSeries,
    priors: &CrowdPriorSet,
    mask: Option<&AnomalyMask>,
    config: &StreamingConfig,
) -> Result<EstimateTrace> {
    ensure!(!bw.is_empty(), "bandwidth series is empty");
    ensure!(!priors.is_empty(), "prior set is empty");
    ensure!(config.update_every_s > 0.0, "update interval must be positive");
    if let Some(m) = mask {
        ensure!(
            m.flags.len() == bw.len(),
            "mask has {} flags for {} samples",
            m.flags.len(),
            bw.len()
        );
    }
    let grid = priors.base().expect("nonempty").grid().clone();
    let prior_pdfs: Vec<&[f64]> = priors.iter().map(|(_, h)| h.pdf()).collect();

    let period = bw.sample_period_s;
    let mut counts = vec![0u64; grid.n_bins()];
    let mut trace = EstimateTrace {
        times: Vec::new(),
        estimates: Vec::new(),
        distances: Vec::new(),
        final_estimate: None,
        withheld: Vec::new(),
        start_s: bw.t0_s,
        duration_s: bw.duration_s(),
    };
    let mut next_update = config.update_every_s;
    for (i, &v) in bw.values.iter().enumerate() {
        if !mask.is_some_and(|m| m.flags[i]) {
            counts[grid.bin_of(v)] += 1;
        }
        let elapsed = (i + 1) as f64 * period;
        let last = i + 1 == bw.len();
        if elapsed + 1e-9 * period < next_update && !last {
            continue;
        }
        while next_update <= elapsed + 1e-9 * period {
            next_update += config.update_every_s;
        }
        let t = bw.t0_s + elapsed;
        if counts.iter().all(|&c| c == 0) {
            trace.withheld.push(t);
            continue;
        }
        let observed = BandwidthHistogram::from_counts(&grid, &counts, config.floor)?;
        let distances: Vec<f64> = prior_pdfs
            .iter()
            .map(|q| distance_unchecked(observed.pdf(), q, config.metric))
            .collect();
        trace.times.push(t);
        trace.estimates.push(argmin(&distances) + 1);
        trace.distances.push(distances);
    }
    trace.final_estimate = trace.estimates.last().copied();
    Ok(trace)
}

/// Latest update time whose estimate differs from the final one by more
/// than one person, measured from the start of the series; 0 when no
/// estimate ever strays that far.
pub fn convergence_time(trace: &EstimateTrace) -> f64 {
    let Some(final_n) = trace.final_estimate else {
        return 0.0;
    };
    trace
        .times
        .iter()
        .zip(&trace.estimates)
        .filter(|(_, &n)| n.abs_diff(final_n) > 1)
        .map(|(&t, _)| t - trace.start_s)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub mae: f64,
    pub nmse: f64,
}

/// Mean absolute error and normalized mean square error of count estimates.
pub fn score(true_counts: &[usize], estimates: &[usize]) -> Result<Score> {
    ensure!(
        true_counts.len() == estimates.len(),
        "{} true counts vs {} estimates",
        true_counts.len(),
        estimates.len()
    );
    ensure!(!true_counts.is_empty(), "nothing to score");
    ensure!(true_counts.iter().all(|&n| n >= 1), "true counts must be at least 1");
    let k = true_counts.len() as f64;
    let (abs, norm_sq) = true_counts
        .iter()
        .zip(estimates)
        .fold((0.0, 0.0), |(a, s), (&t, &e)| {
            let err = t.abs_diff(e) as f64;
            (a + err, s + (err * err) / (t * t) as f64)
        });
    Ok(Score {
        mae: abs / k,
        nmse: norm_sq / k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crowd::{build_prior_set, estimate_pdf, BinGrid};
    use proptest::prelude::*;
    use rand::distr::{weighted::WeightedIndex, Distribution};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hist(pdf: &[f64]) -> BandwidthHistogram {
        let grid = BinGrid::uniform(pdf.len() as f64, 1.0).unwrap();
        BandwidthHistogram::from_pdf(grid, pdf.to_vec()).unwrap()
    }

    fn random_hist(rng: &mut impl Rng, bins: usize) -> BandwidthHistogram {
        let w: Vec<f64> = (0..bins).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = w.iter().sum();
        hist(&w.iter().map(|x| x / s).collect::<Vec<_>>())
    }

    fn base_prior() -> BandwidthHistogram {
        let w: Vec<f64> = (0..40).map(|k| (-(k as f64) / 6.0).exp()).collect();
        let s: f64 = w.iter().sum();
        let mut pdf: Vec<f64> = w.iter().map(|x| x / s).collect();
        pdf.iter_mut().for_each(|p| *p = p.max(1e-6));
        let s: f64 = pdf.iter().sum();
        hist(&pdf.iter().map(|x| x / s).collect::<Vec<_>>())
    }

    #[test]
    fn kl_hand_value() {
        let p = hist(&[0.5, 0.5]);
        let q = hist(&[0.25, 0.75]);
        let d = distance(&p, &q, DistanceMetric::Kl).unwrap();
        assert!((d - 0.143_841_036_225_890_4).abs() < 1e-12);
        assert!((d - 0.1438).abs() < 1e-4);
    }

    #[test]
    fn tv_of_nearly_disjoint_supports() {
        for eps in [1e-3, 1e-6, 1e-9] {
            let p = hist(&[1.0 - eps, eps]);
            let q = hist(&[eps, 1.0 - eps]);
            let d = distance(&p, &q, DistanceMetric::Tv).unwrap();
            assert!((d - (1.0 - 2.0 * eps)).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_grids_rejected() {
        let p = hist(&[0.5, 0.5]);
        let q = hist(&[0.2, 0.3, 0.5]);
        assert!(distance(&p, &q, DistanceMetric::Kl).is_err());
    }

    #[test]
    fn metric_tags_round_trip() {
        for m in DistanceMetric::ALL {
            assert_eq!(m.tag().parse::<DistanceMetric>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.tag()));
        }
        assert!("l2".parse::<DistanceMetric>().is_err());
    }

    proptest! {
        #[test]
        fn metric_axioms(seed in 0u64..10_000, bins in 2usize..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_hist(&mut rng, bins);
            let q = random_hist(&mut rng, bins);
            for m in DistanceMetric::ALL {
                prop_assert!(distance(&p, &p, m).unwrap().abs() <= 1e-9);
                let pq = distance(&p, &q, m).unwrap();
                prop_assert!(pq > 0.0);
                if m != DistanceMetric::Kl {
                    prop_assert!((pq - distance(&q, &p, m).unwrap()).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn argmin_is_invariant_under_monotone_transforms(values in prop::collection::vec(0.0f64..5.0, 1..30)) {
            let a = argmin(&values);
            prop_assert_eq!(a, argmin(&values.iter().map(|v| v.exp()).collect::<Vec<_>>()));
            prop_assert_eq!(a, argmin(&values.iter().map(|v| 3.0 * v + 1.0).collect::<Vec<_>>()));
            prop_assert_eq!(a, argmin(&values.iter().map(|v| v.sqrt()).collect::<Vec<_>>()));
        }
    }

    #[test]
    fn ties_break_toward_smaller_n() {
        assert_eq!(argmin(&[1.0, 0.5, 0.5, 0.7]), 1);
    }

    #[test]
    fn exact_prior_is_recovered() {
        let priors = build_prior_set(&base_prior(), 12).unwrap();
        for n in [1usize, 7] {
            let (n_hat, d) = estimate_count(priors.get(n).unwrap(), &priors, DistanceMetric::Kl).unwrap();
            assert_eq!(n_hat, n);
            assert_eq!(d[n - 1], 0.0);
            assert_eq!(d.len(), 12);
        }
    }

    fn max_of_n_samples(base: &BandwidthHistogram, n: usize, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sampler = WeightedIndex::new(base.pdf()).unwrap();
        let centers = base.bin_centers();
        (0..count)
            .map(|_| centers[(0..n).map(|_| sampler.sample(&mut rng)).max().unwrap()])
            .collect()
    }

    #[test]
    fn monte_carlo_crowd_of_five_is_recovered() {
        let base = base_prior();
        let priors = build_prior_set(&base, 15).unwrap();
        let samples = max_of_n_samples(&base, 5, 100_000, 21);
        let observed = estimate_pdf(&samples, base.grid()).unwrap();
        for m in DistanceMetric::ALL {
            assert_eq!(estimate_count(&observed, &priors, m).unwrap().0, 5, "{m}");
        }
    }

    #[test]
    fn empty_prior_set_rejected() {
        let empty: CrowdPriorSet = serde_json::from_str("{}").unwrap();
        assert!(estimate_count(&base_prior(), &empty, DistanceMetric::Kl).is_err());
    }

    fn series(values: Vec<f64>) -> BandwidthSeries {
        BandwidthSeries::new(0.01, 0.0, values).unwrap()
    }

    #[test]
    fn stationary_stream_settles_on_truth() {
        let base = base_prior();
        let priors = build_prior_set(&base, 15).unwrap();
        let bw = series(max_of_n_samples(&base, 4, 6000, 3));
        let trace = streaming_estimate(&bw, &priors, None, &StreamingConfig::default()).unwrap();
        assert_eq!(trace.times.len(), 60);
        assert!((trace.times[0] - 1.0).abs() < 1e-9);
        assert!((trace.times[59] - 60.0).abs() < 1e-9);
        assert!(trace.estimates[10..].iter().all(|&n| n == 4), "{:?}", trace.estimates);
        assert_eq!(trace.final_estimate, Some(4));
    }

    #[test]
    fn fully_masked_stream_withholds_everything() {
        let priors = build_prior_set(&base_prior(), 5).unwrap();
        let bw = series(vec![3.0; 500]);
        let mask = AnomalyMask { flags: vec![true; 500] };
        let trace = streaming_estimate(&bw, &priors, Some(&mask), &StreamingConfig::default()).unwrap();
        assert!(trace.is_empty());
        assert!(!trace.has_estimate());
        assert_eq!(trace.withheld.len(), 5);
        assert_eq!(convergence_time(&trace), 0.0);
    }

    #[test]
    fn masked_samples_do_not_matter() {
        let base = base_prior();
        let priors = build_prior_set(&base, 10).unwrap();
        let clean = max_of_n_samples(&base, 3, 3000, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut dirty = clean.clone();
        let mut flags = vec![false; clean.len()];
        for i in 0..clean.len() {
            if rng.random::<f64>() < 0.2 {
                dirty[i] = rng.random_range(0.0..40.0);
                flags[i] = true;
            }
        }
        let mask = AnomalyMask { flags: flags.clone() };
        let cfg = StreamingConfig::default();
        let a = streaming_estimate(&series(dirty), &priors, Some(&mask), &cfg).unwrap();
        // Same unmasked values with different masked values.
        let mut other = clean.clone();
        for (v, f) in other.iter_mut().zip(&flags) {
            if *f {
                *v = 39.0;
            }
        }
        let b = streaming_estimate(&series(other), &priors, Some(&mask), &cfg).unwrap();
        assert_eq!(a, b);
    }

    fn trace_of(times: &[f64], estimates: &[usize], duration: f64) -> EstimateTrace {
        EstimateTrace {
            times: times.to_vec(),
            estimates: estimates.to_vec(),
            distances: vec![vec![]; times.len()],
            final_estimate: estimates.last().copied(),
            withheld: vec![],
            start_s: 0.0,
            duration_s: duration,
        }
    }

    #[test]
    fn convergence_time_examples() {
        let t = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0];
        assert_eq!(convergence_time(&trace_of(&t, &[9, 9, 5, 6, 6, 6], 50.0)), 10.0);
        assert_eq!(convergence_time(&trace_of(&t[..5], &[5, 5, 3, 4, 4], 40.0)), 0.0);
        assert_eq!(convergence_time(&trace_of(&t, &[3; 6], 50.0)), 0.0);
    }

    proptest! {
        #[test]
        fn convergence_time_is_bounded(estimates in prop::collection::vec(1usize..20, 1..100)) {
            let times: Vec<f64> = (1..=estimates.len()).map(|k| k as f64).collect();
            let trace = trace_of(&times, &estimates, estimates.len() as f64);
            let tc = convergence_time(&trace);
            prop_assert!(tc < trace.duration_s);
            let fin = *estimates.last().unwrap();
            if estimates.iter().all(|&n| n.abs_diff(fin) <= 1) {
                prop_assert_eq!(tc, 0.0);
            }
        }
    }

    #[test]
    fn score_examples() {
        let s = score(&[2, 4], &[3, 4]).unwrap();
        assert_eq!((s.mae, s.nmse), (0.5, 0.125));
        assert_eq!(score(&[5, 6], &[5, 6]).unwrap(), Score { mae: 0.0, nmse: 0.0 });
        let s = score(&[1], &[3]).unwrap();
        assert_eq!((s.mae, s.nmse), (2.0, 4.0));
        assert!(score(&[1, 2], &[1]).is_err());
        assert!(score(&[], &[]).is_err());
        assert!(score(&[0], &[1]).is_err());
    }
}
