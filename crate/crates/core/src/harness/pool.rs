use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::carson::{max_combine, BandwidthSeries};
use crate::error::{ensure, Result};
use crate::seed;

/// Full-length bandwidth series of one individual (synthetic or ingested).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub id: String,
    pub bandwidth: BandwidthSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSegment {
    pub source_id: String,
    /// Starts at `t0_s = 0`.
    pub series: BandwidthSeries,
}

/// Equal-duration, non-overlapping single-person segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPool {
    pub segment_duration_s: f64,
    pub segments: Vec<PoolSegment>,
}

impl SegmentPool {
    /// Cuts each source into as many whole segments as fit; tails are
    /// dropped.
    pub fn from_sources(sources: &[Source], segment_duration_s: f64) -> Result<Self> {
        ensure!(segment_duration_s > 0.0, "segment duration must be positive");
        let mut segments = Vec::new();
        for src in sources {
            src.bandwidth.validate()?;
            let len = (segment_duration_s / src.bandwidth.sample_period_s).round() as usize;
            ensure!(len >= 1, "segment of {segment_duration_s} s is shorter than one sample");
            for k in 0..src.bandwidth.len() / len {
                let mut series = src.bandwidth.slice(k * len, len);
                series.t0_s = 0.0;
                segments.push(PoolSegment {
                    source_id: src.id.clone(),
                    series,
                });
            }
        }
        let pool = Self {
            segment_duration_s,
            segments,
        };
        pool.validate()?;
        Ok(pool)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.segments.first() else {
            return Err(crate::Error::invalid("segment pool is empty"));
        };
        for s in &self.segments {
            ensure!(
                s.series.len() == first.series.len()
                    && (s.series.sample_period_s - first.series.sample_period_s).abs()
                        <= 1e-12 * first.series.sample_period_s,
                "pool segments differ in length or sample period"
            );
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn sample_period_s(&self) -> f64 {
        self.segments.first().map_or(0.0, |s| s.series.sample_period_s)
    }

    pub fn segment_len(&self) -> usize {
        self.segments.first().map_or(0, |s| s.series.len())
    }

    /// Distinct source ids, sorted.
    pub fn source_ids(&self) -> Vec<String> {
        let ids: BTreeSet<&String> = self.segments.iter().map(|s| &s.source_id).collect();
        ids.into_iter().cloned().collect()
    }

    /// Segments whose source is in `ids`, and the rest.
    pub fn split_by_source(&self, ids: &BTreeSet<&str>) -> (SegmentPool, SegmentPool) {
        let (inside, outside): (Vec<_>, Vec<_>) = self
            .segments
            .iter()
            .cloned()
            .partition(|s| ids.contains(s.source_id.as_str()));
        let wrap = |segments| SegmentPool {
            segment_duration_s: self.segment_duration_s,
            segments,
        };
        (wrap(inside), wrap(outside))
    }
}

/// Pointwise maximum of `n` segments drawn uniformly with replacement.
pub fn synth_crowd_sample(pool: &SegmentPool, n: usize, seed: u64) -> Result<BandwidthSeries> {
    ensure!(n >= 1, "crowd size must be at least 1");
    ensure!(!pool.is_empty(), "segment pool is empty");
    let mut rng = seed::rng(seed);
    let chosen: Vec<BandwidthSeries> = (0..n)
        .map(|_| pool.segments[rng.random_range(0..pool.len())].series.clone())
        .collect();
    max_combine(&chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn source(id: &str, values: Vec<f64>) -> Source {
        Source {
            id: id.into(),
            bandwidth: BandwidthSeries::new(0.5, 0.0, values).unwrap(),
        }
    }

    #[test]
    fn sources_are_cut_into_whole_segments() {
        let pool = SegmentPool::from_sources(
            &[source("a", (0..9).map(f64::from).collect()), source("b", vec![1.0; 4])],
            2.0,
        )
        .unwrap();
        assert_eq!(pool.len(), 3);
        assert_eq!(pool.segments[1].series.values, vec![4.0, 5.0, 6.0, 7.0]);
        assert_eq!(pool.segments[1].series.t0_s, 0.0);
        assert_eq!(pool.source_ids(), vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn single_person_sample_is_a_pool_segment() {
        let pool = SegmentPool::from_sources(&[source("a", (0..12).map(f64::from).collect())], 2.0).unwrap();
        for seed in 0..10 {
            let s = synth_crowd_sample(&pool, 1, seed).unwrap();
            assert!(pool.segments.iter().any(|p| p.series == s));
        }
    }

    #[test]
    fn crowd_sample_dominates_members() {
        let pool = SegmentPool::from_sources(
            &[source("a", vec![1.0, 0.0, 3.0, 0.0, 2.0, 2.0, 0.0, 5.0]), source("b", vec![0.0, 4.0, 0.0, 1.0])],
            2.0,
        )
        .unwrap();
        let s = synth_crowd_sample(&pool, 6, 3).unwrap();
        assert_eq!(s.len(), 4);
        assert!(synth_crowd_sample(&pool, 0, 3).is_err());
        let all = max_combine(&pool.segments.iter().map(|p| p.series.clone()).collect::<Vec<_>>()).unwrap();
        assert!(s.values.iter().zip(&all.values).all(|(a, b)| a <= b));
    }
}
