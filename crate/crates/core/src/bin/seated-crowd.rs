use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use seated_crowd::anomaly::{self, AnomalyConfig, AutoencoderModel};
use seated_crowd::carson::{carson_bandwidth, CarsonConfig};
use seated_crowd::crowd::{build_prior_set, estimate_pdf, BinGrid, CrowdPriorSet};
use seated_crowd::harness::{self, ExperimentReport, SourceConfig};
use seated_crowd::io::{self, RunDir};
use seated_crowd::matching::{convergence_time, streaming_estimate, DistanceMetric, StreamingConfig};
use seated_crowd::motion::landmarks_to_speeds_with_floor;
use seated_crowd::{rf, BandwidthSeries, Result};

#[derive(Parser)]
#[command(name = "seated-crowd", version, about = "Seated-crowd counting from motion-modulated RF bandwidth")]
struct Cli {
    /// Root seed; overrides any seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Out {
    /// Run directory; artifacts and manifest.json go here.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize fidget speed profiles for a population of individuals.
    SynthProfiles {
        #[command(flatten)]
        out: Out,
        /// SourceConfig JSON; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n_sources: Option<usize>,
        #[arg(long)]
        duration_s: Option<f64>,
    },
    /// Landmark CSV + sidecar JSON to a speed profile.
    LandmarksIngest {
        #[command(flatten)]
        out: Out,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        sidecar: PathBuf,
        #[arg(long, default_value_t = 6.0)]
        cutoff_hz: f64,
        #[arg(long, default_value_t = 0.5)]
        visibility_floor: f64,
    },
    /// Speed profile to predicted bandwidth.
    Carson {
        #[command(flatten)]
        out: Out,
        #[arg(long)]
        profile: PathBuf,
        /// CarsonConfig JSON.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Simulate received power streams and extract bandwidth from them.
    RfSim {
        #[command(flatten)]
        out: Out,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 5)]
        streams: usize,
        #[arg(long, default_value_t = 0.0)]
        noise_std: f64,
        #[arg(long, default_value_t = 1.0)]
        window_s: f64,
        #[arg(long, default_value_t = 0.01)]
        shift_s: f64,
    },
    /// Single-person bandwidth series to a base histogram and prior family.
    PriorBuild {
        #[command(flatten)]
        out: Out,
        #[arg(long, required = true, num_args = 1..)]
        bandwidth: Vec<PathBuf>,
        #[arg(long, default_value_t = 30)]
        n_max: usize,
    },
    /// Train the anomaly autoencoder on synthetic crowds of the given
    /// single-person series.
    AnomalyTrain {
        #[command(flatten)]
        out: Out,
        #[arg(long, required = true, num_args = 1..)]
        bandwidth: Vec<PathBuf>,
        /// AnomalyConfig JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 60_000)]
        windows: usize,
    },
    /// Mask anomalous samples of a bandwidth series.
    AnomalyFlag {
        #[command(flatten)]
        out: Out,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        bandwidth: PathBuf,
        #[arg(long, default_value_t = 1.5)]
        threshold_ratio: f64,
    },
    /// Streaming crowd-size estimate of one bandwidth series.
    Estimate {
        #[command(flatten)]
        out: Out,
        #[arg(long)]
        priors: PathBuf,
        #[arg(long)]
        bandwidth: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value = "kl")]
        metric: DistanceMetric,
    },
    /// Full cross-validated simulation from a JSON config.
    Simulate {
        #[command(flatten)]
        out: Out,
        #[arg(long)]
        config: PathBuf,
        /// Overrides the evaluation metric in the config.
        #[arg(long)]
        metric: Option<DistanceMetric>,
    },
    /// Verify a run directory and summarize its report.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn seed_or(cli: Option<u64>, default: u64) -> u64 {
    cli.unwrap_or(default)
}

fn read_series(paths: &[PathBuf]) -> Result<Vec<BandwidthSeries>> {
    paths.iter().map(io::read_bandwidth).collect()
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::SynthProfiles {
            out,
            config,
            n_sources,
            duration_s,
        } => {
            let mut cfg: SourceConfig = config.map(io::read_json).transpose()?.unwrap_or_default();
            cfg.n_sources = n_sources.unwrap_or(cfg.n_sources);
            cfg.duration_s = duration_s.unwrap_or(cfg.duration_s);
            let seed = seed_or(seed, 0);
            let mut dir = RunDir::create(&out.out, seed)?;
            for (id, profile) in harness::synth_source_profiles(&cfg, seed)? {
                dir.emit(&format!("profiles/{id}.csv"), |p| io::write_speed_profile(&profile, p))?;
            }
            dir.finish(None)?;
        }
        Command::LandmarksIngest {
            out,
            csv,
            sidecar,
            cutoff_hz,
            visibility_floor,
        } => {
            let track = io::read_landmarks(&csv, &sidecar)?;
            let profile = landmarks_to_speeds_with_floor(&track, cutoff_hz, visibility_floor)?;
            let mut dir = RunDir::create(&out.out, seed_or(seed, 0))?;
            dir.emit("speed.csv", |p| io::write_speed_profile(&profile, p))?;
            dir.finish(None)?;
        }
        Command::Carson { out, profile, config } => {
            let cfg: CarsonConfig = config.map(io::read_json).transpose()?.unwrap_or_default();
            let bw = carson_bandwidth(&io::read_speed_profile(profile)?, &cfg)?;
            let mut dir = RunDir::create(&out.out, seed_or(seed, 0))?;
            dir.emit("bandwidth.csv", |p| io::write_bandwidth(&bw, p))?;
            dir.finish(None)?;
        }
        Command::RfSim {
            out,
            profile,
            streams,
            noise_std,
            window_s,
            shift_s,
        } => {
            let seed = seed_or(seed, 0);
            let profile = io::read_speed_profile(profile)?;
            let traces = rf::synth_streams(
                &profile,
                streams,
                (0.5, 1.5),
                CarsonConfig::default().wavelength_m,
                rf::DEFAULT_SAMPLE_RATE,
                noise_std,
                seed,
            )?;
            let spec = rf::pca_average_spectrogram(&traces, rf::DEFAULT_PCA_COMPONENTS.min(streams), window_s, shift_s)?;
            let bw = rf::extract_bandwidth(&spec, rf::DEFAULT_POWER_FRACTION)?;
            let mut dir = RunDir::create(&out.out, seed)?;
            dir.emit("traces.csv", |p| io::write_traces(&traces, p))?;
            io::write_spectrogram(&spec, dir.path("spectrogram")?)?;
            dir.record("spectrogram.json")?;
            dir.record("spectrogram.csv")?;
            dir.emit("bandwidth.csv", |p| io::write_bandwidth(&bw, p))?;
            dir.finish(None)?;
        }
        Command::PriorBuild { out, bandwidth, n_max } => {
            let samples: Vec<f64> = read_series(&bandwidth)?.into_iter().flat_map(|s| s.values).collect();
            let base = estimate_pdf(&samples, &BinGrid::default())?;
            let priors = build_prior_set(&base, n_max)?;
            let mut dir = RunDir::create(&out.out, seed_or(seed, 0))?;
            dir.emit("base.json", |p| io::write_json(p, &base))?;
            dir.emit("priors.json", |p| io::write_json(p, &priors))?;
            dir.finish(None)?;
        }
        Command::AnomalyTrain {
            out,
            bandwidth,
            config,
            windows,
        } => {
            let mut cfg: AnomalyConfig = config.map(io::read_json).transpose()?.unwrap_or_default();
            cfg.seed = seed_or(seed, cfg.seed);
            let pool = read_series(&bandwidth)?;
            let period = pool[0].sample_period_s;
            let training = anomaly::build_training_set(&pool, 1..=20, windows, cfg.window_len(period), cfg.seed)?;
            let model = anomaly::train_autoencoder(&training, &cfg)?;
            let mut dir = RunDir::create(&out.out, cfg.seed)?;
            dir.emit("model.json", |p| io::write_json(p, &model))?;
            dir.finish(None)?;
        }
        Command::AnomalyFlag {
            out,
            model,
            bandwidth,
            threshold_ratio,
        } => {
            let model: AutoencoderModel = io::read_json(model)?;
            let bw = io::read_bandwidth(bandwidth)?;
            let cfg = AnomalyConfig {
                threshold_ratio,
                ..Default::default()
            };
            let mask = anomaly::flag_anomalies(&bw, &model, &cfg)?;
            println!("flagged {:.2}% of {} samples", 100.0 * mask.flag_rate(), mask.len());
            let mut dir = RunDir::create(&out.out, seed_or(seed, 0))?;
            dir.emit("mask.csv", |p| io::write_mask(&mask, &bw, p))?;
            dir.finish(None)?;
        }
        Command::Estimate {
            out,
            priors,
            bandwidth,
            mask,
            metric,
        } => {
            let priors: CrowdPriorSet = io::read_json(priors)?;
            priors.validate()?;
            let bw = io::read_bandwidth(bandwidth)?;
            let mask = mask.map(io::read_mask).transpose()?;
            let cfg = StreamingConfig {
                metric,
                ..Default::default()
            };
            let trace = streaming_estimate(&bw, &priors, mask.as_ref(), &cfg)?;
            match trace.final_estimate {
                Some(n) => println!("N = {n} (converged after {:.1} s)", convergence_time(&trace)),
                None => println!("no estimate: every sample was masked"),
            }
            let mut dir = RunDir::create(&out.out, seed_or(seed, 0))?;
            dir.emit("estimate.csv", |p| io::write_estimate_trace(&trace, p))?;
            dir.finish(None)?;
        }
        Command::Simulate { out, config, metric } => {
            let mut cfg: harness::EndToEndConfig = io::read_json(&config)?;
            cfg.seed = seed_or(seed, cfg.seed);
            if let Some(m) = metric {
                cfg.evaluation.metric = m;
            }
            let report = harness::run_end_to_end(&cfg, &out.out)?;
            print_report(&report);
        }
        Command::Report { run } => {
            let bad = io::verify_manifest(&run)?;
            let manifest: io::Manifest = io::read_json(run.join(io::MANIFEST_FILE))?;
            println!("status: {:?}, {} artifacts", manifest.status, manifest.artifacts.len());
            if !bad.is_empty() {
                println!("hash mismatch or missing: {}", bad.join(", "));
            }
            if let Ok(report) = io::read_json::<ExperimentReport>(run.join("report.json")) {
                print_report(&report);
            }
        }
    }
    Ok(())
}

fn print_report(report: &ExperimentReport) {
    let a = &report.aggregates;
    println!(
        "seed {} metric {} runs {}: MAE {:.3} NMSE {:.3} convergence mean {:.1} s median {:.1} s ({:.3} ms per data second)",
        report.seed,
        report.config.metric.tag(),
        a.runs,
        a.mae,
        a.nmse,
        a.mean_convergence_s,
        a.median_convergence_s,
        report.ms_per_data_second
    );
    if let Some(recall) = a.walker_recall {
        println!("walker recall {:.3}, false-positive rate {:.3}", recall, a.false_positive_rate);
    }
    println!("{:>4} {:>5} {:>7} {:>8} {:>9}", "N", "runs", "MAE", "mean N", "conv (s)");
    for p in &a.per_n {
        println!(
            "{:>4} {:>5} {:>7.3} {:>8.2} {:>9.1}",
            p.n, p.runs, p.mae, p.mean_estimate, p.mean_convergence_s
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
