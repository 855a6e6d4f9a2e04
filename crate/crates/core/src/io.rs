//! File formats: CSV series, JSON histograms/models/configs and run
//! directories with a hashed manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anomaly::AnomalyMask;
use crate::carson::BandwidthSeries;
use crate::error::{ensure, Error, Result};
use crate::matching::EstimateTrace;
use crate::motion::{JointTrack, Landmark, LandmarkTrack, SpeedProfile};
use crate::rf::{BasebandTrace, Spectrogram};

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn parse_f64(field: &str, what: &str, row: usize) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::invalid(format!("row {row}: cannot parse {what} `{field}`")))
}

/// Reads a numeric CSV whose first column is `t_s`. Returns the header and
/// the rows.
fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv_reader(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    ensure!(
        header.first().map(String::as_str) == Some("t_s"),
        "{}: first column must be `t_s`",
        path.display()
    );
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        ensure!(record.len() == header.len(), "{}: row {i} has {} fields", path.display(), record.len());
        let row = record
            .iter()
            .zip(&header)
            .map(|(f, h)| parse_f64(f, h, i))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Sample period implied by a uniform time column.
fn uniform_period(times: &[f64], path: &Path) -> Result<f64> {
    ensure!(times.len() >= 2, "{}: need at least two rows to infer the sample rate", path.display());
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    ensure!(dt > 0.0, "{}: time column must increase", path.display());
    for pair in times.windows(2) {
        ensure!(
            ((pair[1] - pair[0]) - dt).abs() <= 1e-6 * dt.max(1.0),
            "{}: time column is not uniformly spaced",
            path.display()
        );
    }
    Ok(dt)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LandmarkSidecar {
    pub frame_rate: f64,
    pub interpupillary_px: f64,
}

#[derive(Debug, Deserialize, Serialize)]
struct LandmarkRow {
    frame: usize,
    joint: String,
    x_px: f64,
    y_px: f64,
    visibility: f64,
}

/// Reads a landmark CSV (`frame,joint,x_px,y_px,visibility`) and its
/// sidecar JSON. Joints keep their order of first appearance; every joint
/// must have exactly one row per frame `0..n`.
pub fn read_landmarks(csv_path: impl AsRef<Path>, sidecar_path: impl AsRef<Path>) -> Result<LandmarkTrack> {
    let csv_path = csv_path.as_ref();
    let sidecar: LandmarkSidecar = read_json(sidecar_path)?;
    let mut order: Vec<String> = Vec::new();
    let mut frames: BTreeMap<String, BTreeMap<usize, Landmark>> = BTreeMap::new();
    for row in csv_reader(csv_path)?.deserialize() {
        let row: LandmarkRow = row?;
        let entry = frames.entry(row.joint.clone()).or_insert_with(|| {
            order.push(row.joint.clone());
            BTreeMap::new()
        });
        let point = Landmark {
            x_px: row.x_px,
            y_px: row.y_px,
            visibility: row.visibility,
        };
        ensure!(
            entry.insert(row.frame, point).is_none(),
            "{}: duplicate row for joint `{}` frame {}",
            csv_path.display(),
            row.joint,
            row.frame
        );
    }
    let mut joints = Vec::with_capacity(order.len());
    for name in order {
        let points = frames.remove(&name).expect("joint recorded");
        for (i, frame) in points.keys().enumerate() {
            ensure!(
                *frame == i,
                "{}: joint `{name}` is missing frame {i}",
                csv_path.display()
            );
        }
        joints.push(JointTrack {
            name,
            points: points.into_values().collect(),
        });
    }
    let track = LandmarkTrack {
        frame_rate: sidecar.frame_rate,
        interpupillary_px: sidecar.interpupillary_px,
        joints,
    };
    track.validate()?;
    Ok(track)
}

pub fn write_landmarks(track: &LandmarkTrack, csv_path: impl AsRef<Path>, sidecar_path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv_writer(csv_path.as_ref())?;
    for frame in 0..track.n_frames() {
        for joint in &track.joints {
            let p = joint.points[frame];
            w.serialize(LandmarkRow {
                frame,
                joint: joint.name.clone(),
                x_px: p.x_px,
                y_px: p.y_px,
                visibility: p.visibility,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(csv_path.as_ref(), e))?;
    write_json(
        sidecar_path,
        &LandmarkSidecar {
            frame_rate: track.frame_rate,
            interpupillary_px: track.interpupillary_px,
        },
    )
}

/// `t_s,part_0,...,part_{M-1}`.
pub fn write_speed_profile(profile: &SpeedProfile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let mut header = vec!["t_s".to_string()];
    header.extend((0..profile.channels.len()).map(|m| format!("part_{m}")));
    w.write_record(&header)?;
    for k in 0..profile.len() {
        let mut row = vec![(k as f64 / profile.sample_rate).to_string()];
        row.extend(profile.channels.iter().map(|c| c[k].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_speed_profile(path: impl AsRef<Path>) -> Result<SpeedProfile> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    ensure!(header.len() >= 2, "{}: no speed columns", path.display());
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let dt = uniform_period(&times, path)?;
    let channels = (1..header.len()).map(|c| rows.iter().map(|r| r[c]).collect()).collect();
    SpeedProfile::new(1.0 / dt, channels)
}

/// `t_s,bw_hz`.
pub fn write_bandwidth(bw: &BandwidthSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["t_s", "bw_hz"])?;
    for (k, v) in bw.values.iter().enumerate() {
        w.write_record([bw.time_of(k).to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_bandwidth(path: impl AsRef<Path>) -> Result<BandwidthSeries> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    ensure!(header == ["t_s", "bw_hz"], "{}: expected header `t_s,bw_hz`", path.display());
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let dt = uniform_period(&times, path)?;
    BandwidthSeries::new(dt, times[0], rows.iter().map(|r| r[1]).collect())
}

/// `t_s,p` for one stream, `t_s,p_0,p_1,...` for several.
pub fn write_traces(traces: &[BasebandTrace], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    ensure!(!traces.is_empty(), "no traces to write");
    let (fs_, len) = (traces[0].sample_rate, traces[0].len());
    ensure!(
        traces.iter().all(|t| t.sample_rate == fs_ && t.len() == len),
        "traces differ in sample rate or length"
    );
    let mut w = csv_writer(path)?;
    let mut header = vec!["t_s".to_string()];
    if traces.len() == 1 {
        header.push("p".into());
    } else {
        header.extend((0..traces.len()).map(|s| format!("p_{s}")));
    }
    w.write_record(&header)?;
    for k in 0..len {
        let mut row = vec![(k as f64 / fs_).to_string()];
        row.extend(traces.iter().map(|t| t.values[k].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_traces(path: impl AsRef<Path>) -> Result<Vec<BasebandTrace>> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    ensure!(header.len() >= 2, "{}: no power columns", path.display());
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let dt = uniform_period(&times, path)?;
    Ok((1..header.len())
        .map(|c| BasebandTrace {
            sample_rate: 1.0 / dt,
            values: rows.iter().map(|r| r[c]).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrogramHeader {
    pub times: Vec<f64>,
    pub freqs: Vec<f64>,
    pub frame_period_s: f64,
    /// Power matrix file, relative to the header: one row per time, one
    /// column per frequency.
    pub power_csv: String,
}

/// Writes `<stem>.json` (axes) and `<stem>.csv` (power matrix).
pub fn write_spectrogram(spec: &Spectrogram, stem: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let stem = stem.as_ref();
    let json_path = stem.with_extension("json");
    let csv_path = stem.with_extension("csv");
    let file_name = csv_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::invalid(format!("bad spectrogram path {}", stem.display())))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&csv_path)?;
    for row in &spec.power {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    write_json(
        &json_path,
        &SpectrogramHeader {
            times: spec.times.clone(),
            freqs: spec.freqs.clone(),
            frame_period_s: spec.frame_period_s,
            power_csv: file_name.to_string(),
        },
    )?;
    Ok((json_path, csv_path))
}

pub fn read_spectrogram(json_path: impl AsRef<Path>) -> Result<Spectrogram> {
    let json_path = json_path.as_ref();
    let header: SpectrogramHeader = read_json(json_path)?;
    let csv_path = json_path.with_file_name(&header.power_csv);
    let file = fs::File::open(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(file);
    let mut power = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = record?
            .iter()
            .map(|f| parse_f64(f, "power", i))
            .collect::<Result<Vec<f64>>>()?;
        ensure!(row.len() == header.freqs.len(), "spectrogram row {i} has {} columns", row.len());
        power.push(row);
    }
    ensure!(power.len() == header.times.len(), "spectrogram has {} rows for {} times", power.len(), header.times.len());
    Ok(Spectrogram {
        times: header.times,
        freqs: header.freqs,
        frame_period_s: header.frame_period_s,
        power,
    })
}

/// `t_s,n_hat,dist_1,...,dist_nmax`.
pub fn write_estimate_trace(trace: &EstimateTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n_max = trace.distances.first().map_or(0, Vec::len);
    let mut w = csv_writer(path)?;
    let mut header = vec!["t_s".to_string(), "n_hat".to_string()];
    header.extend((1..=n_max).map(|n| format!("dist_{n}")));
    w.write_record(&header)?;
    for ((t, n), d) in trace.times.iter().zip(&trace.estimates).zip(&trace.distances) {
        let mut row = vec![t.to_string(), n.to_string()];
        row.extend(d.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `t_s,anomalous` with 0/1 flags aligned to `bw`.
pub fn write_mask(mask: &AnomalyMask, bw: &BandwidthSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    ensure!(mask.len() == bw.len(), "mask has {} flags for {} samples", mask.len(), bw.len());
    let mut w = csv_writer(path)?;
    w.write_record(["t_s", "anomalous"])?;
    for (k, f) in mask.flags.iter().enumerate() {
        w.write_record([bw.time_of(k).to_string(), u8::from(*f).to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<AnomalyMask> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    ensure!(header == ["t_s", "anomalous"], "{}: expected header `t_s,anomalous`", path.display());
    let flags = rows
        .iter()
        .map(|r| match r[1] {
            0.0 => Ok(false),
            1.0 => Ok(true),
            v => Err(Error::invalid(format!("{}: flag {v} is not 0 or 1", path.display()))),
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(AnomalyMask { flags })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        write!(s, "{b:02x}").expect("writing to a String");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Path relative to the run directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub status: RunStatus,
    pub seed: u64,
    /// Stage that failed, for incomplete runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    pub artifacts: Vec<ArtifactEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Output directory that records every artifact written through it.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    seed: u64,
    artifacts: Vec<ArtifactEntry>,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>, seed: u64) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self {
            root,
            seed,
            artifacts: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path for a relative artifact name, creating parent dirs.
    pub fn path(&self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(p)
    }

    /// Hashes a file already written under the run directory and adds it
    /// to the manifest.
    pub fn record(&mut self, rel: &str) -> Result<()> {
        let p = self.root.join(rel);
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        self.artifacts.retain(|a| a.path != rel);
        self.artifacts.push(ArtifactEntry {
            path: rel.to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    /// Writes through `write` to `rel` and records the result.
    pub fn emit(&mut self, rel: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<PathBuf> {
        let p = self.path(rel)?;
        write(&p)?;
        self.record(rel)?;
        Ok(p)
    }

    pub fn artifacts(&self) -> &[ArtifactEntry] {
        &self.artifacts
    }

    pub fn finish(self, failed_stage: Option<&str>) -> Result<Manifest> {
        let manifest = Manifest {
            status: if failed_stage.is_some() {
                RunStatus::Incomplete
            } else {
                RunStatus::Complete
            },
            seed: self.seed,
            failed_stage: failed_stage.map(str::to_string),
            artifacts: self.artifacts,
        };
        write_json(self.root.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }
}

/// Recomputes every artifact hash listed in a manifest; returns the paths
/// that are missing or differ.
pub fn verify_manifest(root: impl AsRef<Path>) -> Result<Vec<String>> {
    let root = root.as_ref();
    let manifest: Manifest = read_json(root.join(MANIFEST_FILE))?;
    Ok(manifest
        .artifacts
        .into_iter()
        .filter(|a| fs::read(root.join(&a.path)).map_or(true, |b| sha256_hex(&b) != a.sha256))
        .map(|a| a.path)
        .collect())
}
