//! Summary statistics of terminal wealth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];
const MAX_BINS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantile {
    pub level: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor `n - 1`).
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub quantiles: Vec<Quantile>,
    pub histogram: Histogram,
}

impl TerminalStats {
    pub fn compute(values: &[f64], bins: Option<usize>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("no values to summarize"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::degenerate(format!("non-finite terminal wealth {v}")));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let quantiles = QUANTILE_LEVELS
            .iter()
            .map(|&level| Quantile {
                level,
                value: quantile_sorted(&sorted, level),
            })
            .collect();
        Ok(Self {
            count: n,
            mean,
            sd,
            min: sorted[0],
            max: sorted[n - 1],
            quantiles,
            histogram: histogram_sorted(&sorted, bins),
        })
    }

    pub fn quantile(&self, level: f64) -> Option<f64> {
        self.quantiles.iter().find(|q| q.level == level).map(|q| q.value)
    }
}

/// Linear interpolation between order statistics at `(n - 1)·level`.
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * level.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Freedman-Diaconis bin width `2·IQR·n^{-1/3}` unless `bins` is given.
pub fn histogram_sorted(sorted: &[f64], bins: Option<usize>) -> Histogram {
    let n = sorted.len();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let range = hi - lo;
    let bins = match bins {
        Some(b) => b.max(1),
        None => {
            let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
            let width = 2.0 * iqr / (n as f64).cbrt();
            if width > 0.0 && range > 0.0 {
                ((range / width).ceil() as usize).clamp(1, MAX_BINS)
            } else {
                1
            }
        }
    };
    let (lo, hi) = if range > 0.0 { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    edges[bins] = hi;
    let mut counts = vec![0u64; bins];
    for &v in sorted {
        let k = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_sample_values() {
        let s = TerminalStats::compute(&[4.0, 1.0, 3.0, 2.0], Some(3)).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(s.quantile(0.5), Some(2.5));
        assert!((s.quantile(0.25).unwrap() - 1.75).abs() < 1e-15);
        assert_eq!(s.histogram.counts, vec![1, 1, 2]);
        assert_eq!(s.histogram.edges, vec![1.0, 2.0, 3.0, 4.0]);
        assert!(TerminalStats::compute(&[], None).is_err());
        assert!(TerminalStats::compute(&[1.0, f64::NAN], None).is_err());
    }

    #[test]
    fn constant_sample() {
        let s = TerminalStats::compute(&[0.0; 10], None).unwrap();
        assert_eq!(s.sd, 0.0);
        assert_eq!(s.histogram.counts, vec![10]);
        let one = TerminalStats::compute(&[3.0], None).unwrap();
        assert_eq!(one.sd, 0.0);
        assert_eq!(one.quantile(0.99), Some(3.0));
    }

    proptest! {
        #[test]
        fn quantiles_monotone_and_counts_complete(values in proptest::collection::vec(-1e3f64..1e3, 1..300)) {
            let s = TerminalStats::compute(&values, None).unwrap();
            for w in s.quantiles.windows(2) {
                prop_assert!(w[0].value <= w[1].value);
            }
            prop_assert!(s.min <= s.quantiles[0].value && s.quantiles[6].value <= s.max);
            prop_assert_eq!(s.histogram.counts.iter().sum::<u64>() as usize, values.len());
            prop_assert_eq!(s.histogram.edges.len(), s.histogram.counts.len() + 1);
        }
    }
}
