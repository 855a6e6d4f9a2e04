//! Bandwidth histograms and the crowd-size prior family.
//!
//! The bandwidth seen with `N` people present is the largest of `N`
//! independent single-person bandwidths, so its CDF is the single-person
//! CDF raised to the `N`-th power. On a histogram the per-bin masses follow
//! exactly from first differences of that CDF.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Minimum per-bin mass before renormalization; keeps log ratios finite.
pub const DEFAULT_FLOOR: f64 = 1e-6;

/// Histogram bin edges (Hz), strictly increasing from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BinGrid {
    edges: Vec<f64>,
}

impl Default for BinGrid {
    /// 0 to 100 Hz in 1 Hz bins.
    fn default() -> Self {
        Self::uniform(100.0, 1.0).expect("valid default grid")
    }
}

impl BinGrid {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        ensure!(edges.len() >= 2, "a bin grid needs at least two edges");
        ensure!(edges[0] == 0.0, "bin edges must start at 0 Hz");
        ensure!(
            edges.windows(2).all(|w| w[1] > w[0]) && edges.iter().all(|e| e.is_finite()),
            "bin edges must be finite and strictly increasing"
        );
        Ok(Self { edges })
    }

    pub fn uniform(f_max: f64, width: f64) -> Result<Self> {
        ensure!(width > 0.0 && f_max >= width, "need 0 < width <= f_max");
        let n = (f_max / width).round() as usize;
        Self::new((0..=n).map(|k| k as f64 * width).collect())
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn f_max(&self) -> f64 {
        *self.edges.last().expect("nonempty")
    }

    /// Bin holding `x`; values past the last edge land in the last bin.
    pub fn bin_of(&self, x: f64) -> usize {
        let k = self.edges.partition_point(|&e| e <= x);
        k.saturating_sub(1).min(self.n_bins() - 1)
    }

    pub(crate) fn same_as(&self, other: &BinGrid) -> bool {
        self.edges.len() == other.edges.len()
            && self
                .edges
                .iter()
                .zip(&other.edges)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
    }
}

/// Discrete bandwidth distribution on a [`BinGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HistogramRepr", into = "HistogramRepr")]
pub struct BandwidthHistogram {
    grid: BinGrid,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct HistogramRepr {
    bin_edges: Vec<f64>,
    pdf: Vec<f64>,
}

impl TryFrom<HistogramRepr> for BandwidthHistogram {
    type Error = Error;

    fn try_from(r: HistogramRepr) -> Result<Self> {
        BandwidthHistogram::from_pdf(BinGrid::new(r.bin_edges)?, r.pdf)
    }
}

impl From<BandwidthHistogram> for HistogramRepr {
    fn from(h: BandwidthHistogram) -> Self {
        HistogramRepr {
            bin_edges: h.grid.edges,
            pdf: h.pdf,
        }
    }
}

fn cumulative(pdf: &[f64]) -> Vec<f64> {
    pdf.iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

/// Raises every bin to at least `floor`, then renormalizes if anything moved.
fn apply_floor(pdf: &mut [f64], floor: f64) {
    let mut raised = false;
    for p in pdf.iter_mut() {
        if *p < floor {
            *p = floor;
            raised = true;
        }
    }
    if raised {
        let total: f64 = pdf.iter().sum();
        pdf.iter_mut().for_each(|p| *p /= total);
    }
}

impl BandwidthHistogram {
    /// Wraps a probability vector; it must be nonnegative and sum to 1.
    pub fn from_pdf(grid: BinGrid, pdf: Vec<f64>) -> Result<Self> {
        ensure!(
            pdf.len() == grid.n_bins(),
            "pdf has {} bins but the grid has {}",
            pdf.len(),
            grid.n_bins()
        );
        ensure!(
            pdf.iter().all(|p| p.is_finite() && *p >= 0.0),
            "pdf masses must be finite and nonnegative"
        );
        let total: f64 = pdf.iter().sum();
        ensure!((total - 1.0).abs() <= 1e-9, "pdf sums to {total}, not 1");
        let cdf = cumulative(&pdf);
        Ok(Self { grid, pdf, cdf })
    }

    /// Normalized histogram of raw bin counts with the epsilon floor.
    pub fn from_counts(grid: &BinGrid, counts: &[u64], floor: f64) -> Result<Self> {
        ensure!(counts.len() == grid.n_bins(), "count vector does not match the grid");
        let total: u64 = counts.iter().sum();
        ensure!(total > 0, "cannot build a histogram from zero samples");
        let mut pdf: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        apply_floor(&mut pdf, floor);
        Ok(Self {
            grid: grid.clone(),
            cdf: cumulative(&pdf),
            pdf,
        })
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn bin_edges(&self) -> &[f64] {
        self.grid.edges()
    }

    pub fn pdf(&self) -> &[f64] {
        &self.pdf
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.grid.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Mean bandwidth using bin centers.
    pub fn mean(&self) -> f64 {
        self.bin_centers().iter().zip(&self.pdf).map(|(c, p)| c * p).sum()
    }
}

/// Counts samples into the grid's bins. Values above `f_max` go to the last
/// bin; negative or non-finite values are rejected.
pub fn bin_counts(samples: &[f64], grid: &BinGrid) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; grid.n_bins()];
    for &x in samples {
        ensure!(x.is_finite() && x >= 0.0, "bandwidth sample {x} is negative or non-finite");
        counts[grid.bin_of(x)] += 1;
    }
    Ok(counts)
}

/// Empirical bandwidth PDF with the default epsilon floor.
pub fn estimate_pdf(samples: &[f64], grid: &BinGrid) -> Result<BandwidthHistogram> {
    estimate_pdf_with_floor(samples, grid, DEFAULT_FLOOR)
}

pub fn estimate_pdf_with_floor(samples: &[f64], grid: &BinGrid, floor: f64) -> Result<BandwidthHistogram> {
    ensure!(!samples.is_empty(), "cannot estimate a pdf from zero samples");
    ensure!(floor >= 0.0 && floor * (grid.n_bins() as f64) < 1.0, "floor {floor} is too large");
    BandwidthHistogram::from_counts(grid, &bin_counts(samples, grid)?, floor)
}

/// CDF of the maximum of `n` independent draws from `base`.
pub fn crowd_cdf(base: &BandwidthHistogram, n: usize) -> Result<Vec<f64>> {
    ensure!(n >= 1, "crowd size must be at least 1");
    let n = i32::try_from(n).map_err(|_| Error::invalid("crowd size too large"))?;
    Ok(base.cdf.iter().map(|f| f.min(1.0).powi(n)).collect())
}

/// PDF of the maximum of `n` independent draws from `base`, floored with
/// [`DEFAULT_FLOOR`].
pub fn crowd_pdf(base: &BandwidthHistogram, n: usize) -> Result<BandwidthHistogram> {
    crowd_pdf_with_floor(base, n, DEFAULT_FLOOR)
}

pub fn crowd_pdf_with_floor(base: &BandwidthHistogram, n: usize, floor: f64) -> Result<BandwidthHistogram> {
    let cdf = crowd_cdf(base, n)?;
    if n == 1 {
        return Ok(base.clone());
    }
    let mut pdf: Vec<f64> = cdf
        .iter()
        .scan(0.0, |prev, &f| {
            let mass = (f - *prev).max(0.0);
            *prev = f;
            Some(mass)
        })
        .collect();
    let total: f64 = pdf.iter().sum();
    if (total - 1.0).abs() > 0.0 {
        pdf.iter_mut().for_each(|p| *p /= total);
    }
    apply_floor(&mut pdf, floor);
    Ok(BandwidthHistogram {
        grid: base.grid.clone(),
        cdf: cumulative(&pdf),
        pdf,
    })
}

/// Crowd-size priors for `N = 1..=n_max`; serializes as a map `"N" -> histogram`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CrowdPriorSet {
    priors: BTreeMap<usize, BandwidthHistogram>,
}

impl CrowdPriorSet {
    pub fn n_max(&self) -> usize {
        self.priors.keys().next_back().copied().unwrap_or(0)
    }

    pub fn get(&self, n: usize) -> Option<&BandwidthHistogram> {
        self.priors.get(&n)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &BandwidthHistogram)> {
        self.priors.iter().map(|(&n, h)| (n, h))
    }

    pub fn is_empty(&self) -> bool {
        self.priors.is_empty()
    }

    pub fn len(&self) -> usize {
        self.priors.len()
    }

    pub fn base(&self) -> Option<&BandwidthHistogram> {
        self.get(1)
    }

    /// Checks that keys run contiguously from 1 and share one grid.
    pub fn validate(&self) -> Result<()> {
        for (i, (&n, h)) in self.priors.iter().enumerate() {
            ensure!(n == i + 1, "prior set keys must run 1..=n_max, found {n} at position {i}");
            ensure!(
                h.grid.same_as(&self.priors[&1].grid),
                "prior {n} uses a different bin grid"
            );
        }
        Ok(())
    }
}

pub fn build_prior_set(base: &BandwidthHistogram, n_max: usize) -> Result<CrowdPriorSet> {
    ensure!(n_max >= 1, "n_max must be at least 1");
    let priors = (1..=n_max)
        .map(|n| Ok((n, crowd_pdf(base, n)?)))
        .collect::<Result<_>>()?;
    Ok(CrowdPriorSet { priors })
}
