use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pool::{SegmentPool, Source};
use super::sources::{profile_bandwidth, synth_sources, BandwidthPath, SourceConfig};
use super::{base_histogram, build_folds, evaluate_folds, evaluate_run, CrossValidationConfig, ExperimentReport};
use crate::carson::CarsonConfig;
use crate::error::{ensure, Error, Result};
use crate::io::{self, RunDir};
use crate::motion::{landmarks_to_speeds_with_floor, DEFAULT_LOWPASS_HZ, DEFAULT_VISIBILITY_FLOOR};
use crate::seed;

fn default_segment_duration() -> f64 {
    180.0
}

fn default_traces_per_n() -> usize {
    1
}

fn default_lowpass() -> f64 {
    DEFAULT_LOWPASS_HZ
}

fn default_visibility_floor() -> f64 {
    DEFAULT_VISIBILITY_FLOOR
}

/// One ingested landmark recording used as a source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSourceSpec {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
    #[serde(default = "default_lowpass")]
    pub lowpass_hz: f64,
    #[serde(default = "default_visibility_floor")]
    pub visibility_floor: f64,
}

/// Whole-pipeline configuration. `seed` is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEndConfig {
    pub seed: u64,
    #[serde(default)]
    pub sources: SourceConfig,
    /// When nonempty, these recordings replace the synthetic population.
    #[serde(default)]
    pub landmark_sources: Vec<LandmarkSourceSpec>,
    #[serde(default)]
    pub bandwidth: BandwidthPath,
    #[serde(default)]
    pub carson: CarsonConfig,
    #[serde(default = "default_segment_duration")]
    pub segment_duration_s: f64,
    #[serde(default)]
    pub evaluation: CrossValidationConfig,
    /// Runs per crowd size (from the first fold) whose estimate trace,
    /// bandwidth series and mask are written out.
    #[serde(default = "default_traces_per_n")]
    pub traces_per_n: usize,
}

impl EndToEndConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            sources: SourceConfig::default(),
            landmark_sources: Vec::new(),
            bandwidth: BandwidthPath::default(),
            carson: CarsonConfig::default(),
            segment_duration_s: default_segment_duration(),
            evaluation: CrossValidationConfig::default(),
            traces_per_n: default_traces_per_n(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.segment_duration_s > 0.0, "segment duration must be positive");
        self.carson.validate()?;
        if self.landmark_sources.is_empty() {
            self.sources.validate()?;
        }
        self.evaluation.validate()
    }
}

fn build_sources(config: &EndToEndConfig) -> Result<Vec<Source>> {
    if config.landmark_sources.is_empty() {
        return synth_sources(&config.sources, &config.bandwidth, &config.carson, config.seed);
    }
    config
        .landmark_sources
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let track = io::read_landmarks(&spec.csv, &spec.sidecar)?;
            let profile = landmarks_to_speeds_with_floor(&track, spec.lowpass_hz, spec.visibility_floor)?;
            let rf_seed = seed::derive(config.seed, &[seed::STREAM_RF, i as u64]);
            Ok(Source {
                id: spec.csv.display().to_string(),
                bandwidth: profile_bandwidth(&profile, &config.bandwidth, &config.carson, rf_seed)?,
            })
        })
        .collect()
}

type Staged<T> = std::result::Result<T, (&'static str, Error)>;

fn stage(name: &'static str) -> impl Fn(Error) -> (&'static str, Error) {
    move |e| (name, e)
}

fn execute(config: &EndToEndConfig, run: &mut RunDir) -> Staged<ExperimentReport> {
    let sources = build_sources(config).map_err(stage("sources"))?;
    let pool = SegmentPool::from_sources(&sources, config.segment_duration_s).map_err(stage("pool"))?;
    let eval = &config.evaluation;
    let folds = build_folds(&pool, eval, config.seed).map_err(stage("priors"))?;

    let mut write_models = || -> Result<()> {
        for f in &folds {
            let tag = format!("r{}_f{}", f.repeat, f.fold);
            let prior_pool = pool
                .split_by_source(&f.prior_sources.iter().map(String::as_str).collect())
                .0;
            let base = base_histogram(&prior_pool, &eval.grid, eval.floor)?;
            run.emit(&format!("histograms/{tag}_base.json"), |p| io::write_json(p, &base))?;
            run.emit(&format!("histograms/{tag}_priors.json"), |p| io::write_json(p, &f.priors))?;
            if let Some(model) = &f.detector {
                run.emit(&format!("models/{tag}_autoencoder.json"), |p| io::write_json(p, model))?;
            }
        }
        Ok(())
    };
    write_models().map_err(stage("artifacts"))?;

    let report = evaluate_folds(&folds, eval, config.seed).map_err(stage("matching"))?;

    let mut write_traces = || -> Result<()> {
        let first = &folds[0];
        let mut written = 0;
        for r in report.records.iter().filter(|r| r.repeat == first.repeat && r.fold == first.fold) {
            if r.index >= config.traces_per_n {
                continue;
            }
            let outcome = evaluate_run(first, eval, config.seed, r.true_n, r.index)?;
            let tag = format!("n{:02}_i{}", r.true_n, r.index);
            run.emit(&format!("traces/{tag}_estimate.csv"), |p| io::write_estimate_trace(&outcome.trace, p))?;
            run.emit(&format!("traces/{tag}_bandwidth.csv"), |p| io::write_bandwidth(&outcome.bandwidth, p))?;
            if let Some(mask) = &outcome.mask {
                run.emit(&format!("traces/{tag}_mask.csv"), |p| io::write_mask(mask, &outcome.bandwidth, p))?;
            }
            written += 1;
        }
        log::info!("wrote {written} estimate traces");
        run.emit("report.json", |p| io::write_json(p, &report))?;
        Ok(())
    };
    write_traces().map_err(stage("artifacts"))?;
    Ok(report)
}

/// Runs sources, bandwidth, priors, optional anomaly masking and matching,
/// writing every artifact under `out_dir` with a manifest. On failure the
/// manifest is marked incomplete and names the failing stage.
pub fn run_end_to_end(config: &EndToEndConfig, out_dir: impl AsRef<Path>) -> Result<ExperimentReport> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let mut run = RunDir::create(out_dir.as_ref(), config.seed)?;
    run.emit("config.json", |p| io::write_json(p, config))?;
    match execute(config, &mut run) {
        Ok(report) => {
            run.finish(None)?;
            Ok(report)
        }
        Err((name, e)) => {
            run.finish(Some(name))?;
            Err(e.in_stage(name))
        }
    }
}

/// Loads a JSON config, applies an optional seed override and runs it.
pub fn run_end_to_end_file(
    config_path: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    seed_override: Option<u64>,
) -> Result<ExperimentReport> {
    let mut config: EndToEndConfig = io::read_json(config_path).map_err(|e| e.in_stage("config"))?;
    if let Some(s) = seed_override {
        config.seed = s;
    }
    run_end_to_end(&config, out_dir)
}
