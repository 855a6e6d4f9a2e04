//! Seated-crowd size estimation from the bandwidth of motion-modulated RF
//! power signals.
//!
//! The pipeline runs from body-part speed profiles, through Carson's-rule
//! bandwidth prediction (or spectrogram-based extraction from simulated
//! received power), to single-person bandwidth histograms, the
//! order-statistics family of crowd distributions built from them, and
//! divergence-based matching of an observed bandwidth distribution against
//! that family. A small autoencoder flags non-fidget motion so it can be
//! excluded before matching.
//!
//! | module | role |
//! |---|---|
//! | [`motion`] | landmark calibration and synthetic fidget speed profiles |
//! | [`carson`] | speed profile to bandwidth series |
//! | [`rf`] | received-power synthesis, spectrograms, PCA, 95% bandwidth |
//! | [`crowd`] | histograms and crowd-size priors |
//! | [`matching`] | distances, count estimation, convergence and error metrics |
//! | [`anomaly`] | reconstruction-error anomaly masking |
//! | [`harness`] | segment pools, cross-validation, end-to-end runs |
//! | [`io`] | CSV and JSON formats |

pub mod anomaly;
pub mod carson;
pub mod crowd;
pub mod error;
pub mod harness;
pub mod io;
pub mod matching;
pub mod motion;
pub mod rf;
pub mod seed;
mod spectral;

pub use anomaly::{AnomalyConfig, AnomalyMask, AutoencoderModel};
pub use carson::{BandwidthSeries, CarsonConfig};
pub use crowd::{BandwidthHistogram, BinGrid, CrowdPriorSet};
pub use error::{Error, Result};
pub use matching::{DistanceMetric, EstimateTrace};
pub use motion::{FidgetProcessParams, LandmarkTrack, SpeedProfile};
pub use rf::{BasebandTrace, ReflectorPath, Spectrogram};
