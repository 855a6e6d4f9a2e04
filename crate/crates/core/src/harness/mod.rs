//! Simulation harness: synthetic sources, segment pools, synthetic crowds,
//! cross-validated evaluation and end-to-end runs.
//!
//! Every random choice derives from one root seed (see [`crate::seed`]):
//!
//! | path | use |
//! |---|---|
//! | `[SOURCES, i]` | fidget parameters and profile of source `i` |
//! | `[RF, i]` | reflector draws for source `i` on the RF path |
//! | `[FOLDS, r]` | source shuffle of repeat `r` |
//! | `[ANOMALY_DATA, r, f]` / `[ANOMALY_TRAIN, r, f]` | training windows and weights for fold `f` |
//! | `[RUN, r, f, n, i]` | segment draw for run `i` of crowd size `n` |
//! | `[WALKERS, r, f, n, i]` | walker bursts for the same run |

mod pool;
mod run;
mod sources;
mod walkers;

pub use pool::{synth_crowd_sample, PoolSegment, SegmentPool, Source};
pub use run::{run_end_to_end, run_end_to_end_file, EndToEndConfig, LandmarkSourceSpec};
pub use sources::{profile_bandwidth, sources_from_profiles, synth_source_profiles, synth_sources, BandwidthPath, RfPathConfig, SourceConfig};
pub use walkers::{inject_walkers, WalkerConfig};

use std::collections::BTreeSet;
use std::ops::RangeInclusive;
use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anomaly::{self, AnomalyConfig, AutoencoderModel};
use crate::carson::BandwidthSeries;
use crate::crowd::{build_prior_set, estimate_pdf_with_floor, BandwidthHistogram, BinGrid, CrowdPriorSet, DEFAULT_FLOOR};
use crate::error::{ensure, Result};
use crate::matching::{self, convergence_time, streaming_estimate, DistanceMetric, StreamingConfig};
use crate::seed;

/// Anomaly stage of an evaluation: training-set construction plus the
/// detector settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnomalyStage {
    pub training_windows: usize,
    pub training_n_range: (usize, usize),
    pub detector: AnomalyConfig,
}

impl Default for AnomalyStage {
    fn default() -> Self {
        Self {
            training_windows: 60_000,
            training_n_range: (1, 20),
            detector: AnomalyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrossValidationConfig {
    pub k_folds: usize,
    pub repeats: usize,
    /// Crowd sizes evaluated, inclusive.
    pub n_range: (usize, usize),
    /// Test samples per crowd size, spread over folds and repeats.
    pub samples_per_n: usize,
    /// Largest crowd size in the prior family.
    pub prior_n_max: usize,
    pub metric: DistanceMetric,
    pub grid: BinGrid,
    pub floor: f64,
    pub update_every_s: f64,
    pub anomaly: Option<AnomalyStage>,
    pub walkers: Option<WalkerConfig>,
}

impl Default for CrossValidationConfig {
    fn default() -> Self {
        Self {
            k_folds: 3,
            repeats: 5,
            n_range: (1, 20),
            samples_per_n: 50,
            prior_n_max: 30,
            metric: DistanceMetric::Kl,
            grid: BinGrid::default(),
            floor: DEFAULT_FLOOR,
            update_every_s: 1.0,
            anomaly: None,
            walkers: None,
        }
    }
}

impl CrossValidationConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.n_range;
        ensure!(lo >= 1, "crowd sizes must be at least 1, got {lo}");
        ensure!(lo <= hi, "empty crowd-size range {lo}..={hi}");
        ensure!(self.prior_n_max >= hi, "prior_n_max {} is below the largest tested N {hi}", self.prior_n_max);
        ensure!(self.k_folds >= 2, "need at least 2 folds");
        ensure!(self.repeats >= 1 && self.samples_per_n >= 1, "repeats and samples_per_n must be positive");
        ensure!(self.update_every_s > 0.0, "update interval must be positive");
        ensure!((0.0..1.0).contains(&self.floor), "floor must lie in [0, 1)");
        if let Some(a) = &self.anomaly {
            a.detector.validate()?;
            ensure!(a.training_n_range.0 >= 1 && a.training_n_range.0 <= a.training_n_range.1, "bad training crowd-size range");
            ensure!(a.training_windows >= 1, "need at least one training window");
        }
        if let Some(w) = &self.walkers {
            w.validate()?;
        }
        Ok(())
    }

    pub fn crowd_sizes(&self) -> RangeInclusive<usize> {
        self.n_range.0..=self.n_range.1
    }
}

/// One synthetic test trace and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub fold: usize,
    pub index: usize,
    pub true_n: usize,
    /// `None` when every sample was masked.
    pub estimated_n: Option<usize>,
    pub metric: DistanceMetric,
    pub convergence_s: f64,
    pub flag_rate: f64,
    /// Injected walker samples and how many of them were masked.
    pub walker_samples: usize,
    pub walker_flagged: usize,
    /// Flagged samples outside any walker burst.
    pub clean_flagged: usize,
    pub samples: usize,
}

impl RunRecord {
    /// Estimate used for scoring; a fully masked run counts as 0.
    pub fn scored_estimate(&self) -> usize {
        self.estimated_n.unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerNSummary {
    pub n: usize,
    pub runs: usize,
    pub mae: f64,
    pub mean_estimate: f64,
    pub mean_convergence_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub runs: usize,
    pub mae: f64,
    pub nmse: f64,
    pub mean_convergence_s: f64,
    pub median_convergence_s: f64,
    pub mean_flag_rate: f64,
    /// Fraction of injected walker samples that were masked.
    pub walker_recall: Option<f64>,
    /// Fraction of non-walker samples that were masked.
    pub false_positive_rate: f64,
    pub per_n: Vec<PerNSummary>,
}

impl Aggregates {
    pub fn from_records(records: &[RunRecord]) -> Result<Self> {
        ensure!(!records.is_empty(), "no run records");
        let truth: Vec<usize> = records.iter().map(|r| r.true_n).collect();
        let est: Vec<usize> = records.iter().map(RunRecord::scored_estimate).collect();
        let s = matching::score(&truth, &est)?;
        let k = records.len() as f64;
        let mut conv: Vec<f64> = records.iter().map(|r| r.convergence_s).collect();
        conv.sort_by(f64::total_cmp);
        let median = if conv.len() % 2 == 1 {
            conv[conv.len() / 2]
        } else {
            0.5 * (conv[conv.len() / 2 - 1] + conv[conv.len() / 2])
        };
        let walker_samples: usize = records.iter().map(|r| r.walker_samples).sum();
        let walker_flagged: usize = records.iter().map(|r| r.walker_flagged).sum();
        let clean_samples: usize = records.iter().map(|r| r.samples - r.walker_samples).sum();
        let clean_flagged: usize = records.iter().map(|r| r.clean_flagged).sum();
        let sizes: BTreeSet<usize> = truth.iter().copied().collect();
        let per_n = sizes
            .into_iter()
            .map(|n| {
                let rs: Vec<&RunRecord> = records.iter().filter(|r| r.true_n == n).collect();
                let m = rs.len() as f64;
                PerNSummary {
                    n,
                    runs: rs.len(),
                    mae: rs.iter().map(|r| r.scored_estimate().abs_diff(n) as f64).sum::<f64>() / m,
                    mean_estimate: rs.iter().map(|r| r.scored_estimate() as f64).sum::<f64>() / m,
                    mean_convergence_s: rs.iter().map(|r| r.convergence_s).sum::<f64>() / m,
                }
            })
            .collect();
        Ok(Self {
            runs: records.len(),
            mae: s.mae,
            nmse: s.nmse,
            mean_convergence_s: conv.iter().sum::<f64>() / k,
            median_convergence_s: median,
            mean_flag_rate: records.iter().map(|r| r.flag_rate).sum::<f64>() / k,
            walker_recall: (walker_samples > 0).then(|| walker_flagged as f64 / walker_samples as f64),
            false_positive_rate: if clean_samples > 0 {
                clean_flagged as f64 / clean_samples as f64
            } else {
                0.0
            },
            per_n,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub config: CrossValidationConfig,
    pub records: Vec<RunRecord>,
    pub aggregates: Aggregates,
    /// Wall-clock processing time per second of evaluated data (ms/s).
    /// Informational only; excluded from determinism comparisons.
    pub ms_per_data_second: f64,
}

impl ExperimentReport {
    /// True when two reports agree on everything except timing.
    pub fn same_results(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.config == other.config
            && self.records == other.records
            && self.aggregates == other.aggregates
    }
}

/// As-equal-as-possible partition of the sources into `k` folds after a
/// seeded shuffle.
pub fn partition_sources(source_ids: &[String], k: usize, seed: u64, repeat: usize) -> Result<Vec<Vec<String>>> {
    ensure!(k >= 2, "need at least 2 folds");
    ensure!(
        source_ids.len() >= k,
        "{} distinct sources cannot fill {k} folds",
        source_ids.len()
    );
    let mut ids = source_ids.to_vec();
    ids.sort();
    ids.dedup();
    ensure!(ids.len() >= k, "{} distinct sources cannot fill {k} folds", ids.len());
    ids.shuffle(&mut seed::derive_rng(seed, &[seed::STREAM_FOLDS, repeat as u64]));
    let mut folds = vec![Vec::new(); k];
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % k].push(id);
    }
    Ok(folds)
}

/// Base single-person histogram from every sample of the given segments.
pub fn base_histogram(pool: &SegmentPool, grid: &BinGrid, floor: f64) -> Result<BandwidthHistogram> {
    let samples: Vec<f64> = pool.segments.iter().flat_map(|s| s.series.values.iter().copied()).collect();
    estimate_pdf_with_floor(&samples, grid, floor)
}

/// Number of runs for crowd size `n` in one (repeat, fold) cell: the
/// budget split evenly over cells, capped by the number of distinct
/// multisets of `n` segments.
fn runs_in_cell(config: &CrossValidationConfig, cell: usize, n: usize, pool_len: usize) -> usize {
    let cells = config.k_folds * config.repeats;
    let share = config.samples_per_n / cells + usize::from(cell < config.samples_per_n % cells);
    share.min(distinct_multisets(pool_len, n))
}

/// `C(pool + n - 1, n)`, saturating.
fn distinct_multisets(pool: usize, n: usize) -> usize {
    let mut c: u128 = 1;
    for i in 0..n as u128 {
        c = c * (pool as u128 + i) / (i + 1);
        if c > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    c as usize
}

/// Everything one fold needs to evaluate its test runs.
pub struct FoldModel {
    pub repeat: usize,
    pub fold: usize,
    pub prior_sources: Vec<String>,
    pub test_sources: Vec<String>,
    pub priors: CrowdPriorSet,
    pub detector: Option<AutoencoderModel>,
    pub test_pool: SegmentPool,
}

pub fn build_fold(
    pool: &SegmentPool,
    config: &CrossValidationConfig,
    seed: u64,
    repeat: usize,
    fold: usize,
    test_sources: &[String],
) -> Result<FoldModel> {
    let test_set: BTreeSet<&str> = test_sources.iter().map(String::as_str).collect();
    let (test_pool, prior_pool) = pool.split_by_source(&test_set);
    ensure!(!test_pool.is_empty(), "fold {fold} has no test segments");
    ensure!(!prior_pool.is_empty(), "fold {fold} has no prior segments");
    let base = base_histogram(&prior_pool, &config.grid, config.floor)?;
    let priors = build_prior_set(&base, config.prior_n_max)?;
    let detector = match &config.anomaly {
        None => None,
        Some(stage) => {
            let window_len = stage.detector.window_len(pool.sample_period_s());
            let segments: Vec<BandwidthSeries> = prior_pool.segments.iter().map(|s| s.series.clone()).collect();
            let windows = anomaly::build_training_set(
                &segments,
                stage.training_n_range.0..=stage.training_n_range.1,
                stage.training_windows,
                window_len,
                seed::derive(seed, &[seed::STREAM_ANOMALY_DATA, repeat as u64, fold as u64]),
            )?;
            let detector_config = AnomalyConfig {
                seed: seed::derive(seed, &[seed::STREAM_ANOMALY_TRAIN, repeat as u64, fold as u64]),
                ..stage.detector.clone()
            };
            Some(anomaly::train_autoencoder(&windows, &detector_config)?)
        }
    };
    Ok(FoldModel {
        repeat,
        fold,
        prior_sources: prior_pool.source_ids(),
        test_sources: test_pool.source_ids(),
        priors,
        detector,
        test_pool,
    })
}

/// A single evaluated test trace, with the intermediate series kept for
/// artifact emission.
pub struct RunOutcome {
    pub record: RunRecord,
    pub trace: matching::EstimateTrace,
    pub bandwidth: BandwidthSeries,
    pub mask: Option<anomaly::AnomalyMask>,
}

pub fn evaluate_run(
    fold: &FoldModel,
    config: &CrossValidationConfig,
    seed: u64,
    n: usize,
    index: usize,
) -> Result<RunOutcome> {
    let path = [fold.repeat as u64, fold.fold as u64, n as u64, index as u64];
    let run_seed = seed::derive(seed, &[&[seed::STREAM_RUN][..], &path].concat());
    let mut bw = synth_crowd_sample(&fold.test_pool, n, run_seed)?;
    let mut walker_truth = vec![false; bw.len()];
    if let Some(w) = &config.walkers {
        let walker_seed = seed::derive(seed, &[&[seed::STREAM_WALKERS][..], &path].concat());
        // The bin grid spans DC to the RF Nyquist frequency.
        (bw, walker_truth) = inject_walkers(&bw, w, config.grid.f_max(), walker_seed)?;
    }
    let mask = match (&fold.detector, &config.anomaly) {
        (Some(model), Some(stage)) => Some(anomaly::flag_anomalies(&bw, model, &stage.detector)?),
        _ => None,
    };
    let streaming = StreamingConfig {
        metric: config.metric,
        update_every_s: config.update_every_s,
        floor: config.floor,
    };
    let trace = streaming_estimate(&bw, &fold.priors, mask.as_ref(), &streaming)?;
    let flags = mask.as_ref().map(|m| m.flags.as_slice());
    let flagged = |i: usize| flags.is_some_and(|f| f[i]);
    let walker_samples = walker_truth.iter().filter(|&&w| w).count();
    let walker_flagged = (0..bw.len()).filter(|&i| walker_truth[i] && flagged(i)).count();
    let clean_flagged = (0..bw.len()).filter(|&i| !walker_truth[i] && flagged(i)).count();
    let record = RunRecord {
        repeat: fold.repeat,
        fold: fold.fold,
        index,
        true_n: n,
        estimated_n: trace.final_estimate,
        metric: config.metric,
        convergence_s: convergence_time(&trace),
        flag_rate: mask.as_ref().map_or(0.0, |m| m.flag_rate()),
        walker_samples,
        walker_flagged,
        clean_flagged,
        samples: bw.len(),
    };
    Ok(RunOutcome {
        record,
        trace,
        bandwidth: bw,
        mask,
    })
}

/// All (repeat, fold) cells of a cross-validation, with trained priors and
/// detectors. Folds are built in parallel.
pub fn build_folds(pool: &SegmentPool, config: &CrossValidationConfig, seed: u64) -> Result<Vec<FoldModel>> {
    config.validate()?;
    pool.validate()?;
    let ids = pool.source_ids();
    let mut cells = Vec::new();
    for repeat in 0..config.repeats {
        let folds = partition_sources(&ids, config.k_folds, seed, repeat)?;
        for (fold, test) in folds.into_iter().enumerate() {
            cells.push((repeat, fold, test));
        }
    }
    cells
        .into_par_iter()
        .map(|(repeat, fold, test)| build_fold(pool, config, seed, repeat, fold, &test))
        .collect()
}

/// Run plan: (fold cell index, n, run index) for every test run.
fn plan_runs(folds: &[FoldModel], config: &CrossValidationConfig) -> Vec<(usize, usize, usize)> {
    let mut plan = Vec::new();
    for (cell, fold) in folds.iter().enumerate() {
        for n in config.crowd_sizes() {
            for i in 0..runs_in_cell(config, cell, n, fold.test_pool.len()) {
                plan.push((cell, n, i));
            }
        }
    }
    plan
}

/// Evaluates every planned run over prebuilt folds.
pub fn evaluate_folds(
    folds: &[FoldModel],
    config: &CrossValidationConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    config.validate()?;
    let plan = plan_runs(folds, config);
    ensure!(!plan.is_empty(), "no runs planned");
    let started = Instant::now();
    let records = plan
        .par_iter()
        .map(|&(cell, n, i)| evaluate_run(&folds[cell], config, seed, n, i).map(|o| o.record))
        .collect::<Result<Vec<_>>>()?;
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    let data_s: f64 = records
        .iter()
        .zip(&plan)
        .map(|(r, &(cell, _, _))| r.samples as f64 * folds[cell].test_pool.sample_period_s())
        .sum();
    let aggregates = Aggregates::from_records(&records)?;
    info!(
        "{} runs: MAE {:.3}, NMSE {:.3}, mean convergence {:.1} s",
        records.len(),
        aggregates.mae,
        aggregates.nmse,
        aggregates.mean_convergence_s
    );
    Ok(ExperimentReport {
        seed,
        config: config.clone(),
        records,
        aggregates,
        ms_per_data_second: elapsed_ms / data_s.max(f64::MIN_POSITIVE),
    })
}

/// k-fold cross-validation split by source, repeated with fresh shuffles.
pub fn cross_validate(pool: &SegmentPool, config: &CrossValidationConfig, seed: u64) -> Result<ExperimentReport> {
    let folds = build_folds(pool, config, seed)?;
    evaluate_folds(&folds, config, seed)
}
