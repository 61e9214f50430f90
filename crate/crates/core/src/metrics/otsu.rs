//! Multi-level Otsu thresholding over a fixed 256-bin histogram.

use crate::error::{Error, Result};

pub const HIST_BINS: usize = 256;

/// 256 equal-width bins over `[min, max]`.
///
/// Bin `i` holds values in `(edge_i, edge_{i+1}]` with the first bin closed
/// on the left, so a value equal to a returned threshold always falls in
/// the lower class.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub counts: [u64; HIST_BINS],
    pub min: f64,
    pub max: f64,
}

impl Histogram {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("histogram input contains non-finite values".into()));
        }
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !(max > min) {
            return Err(Error::Degenerate(
                "Otsu needs at least two distinct values".into(),
            ));
        }
        let mut hist = Self {
            counts: [0; HIST_BINS],
            min,
            max,
        };
        for &v in values {
            hist.counts[hist.bin_of(v)] += 1;
        }
        Ok(hist)
    }

    pub fn bin_of(&self, v: f64) -> usize {
        let pos = (v - self.min) / (self.max - self.min) * HIST_BINS as f64;
        (pos.ceil() as i64 - 1).clamp(0, HIST_BINS as i64 - 1) as usize
    }

    /// Upper edge of bin `i` in value units.
    pub fn upper_edge(&self, i: usize) -> f64 {
        self.min + (i + 1) as f64 * (self.max - self.min) / HIST_BINS as f64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Contribution of one class to the Otsu objective. With integer bin
/// indices as the class values, maximizing `sum(S_c^2 / N_c)` is the same
/// as maximizing the between-class variance.
#[inline]
pub(crate) fn class_score(count: u64, index_sum: u64) -> f64 {
    if count == 0 {
        0.0
    } else {
        let s = index_sum as f64;
        s * s / count as f64
    }
}

/// Fitted thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct Otsu {
    pub hist: Histogram,
    /// Last bin of each lower class, strictly increasing.
    pub bins: Vec<usize>,
    pub thresholds: Vec<f64>,
}

impl Otsu {
    /// Class index of `v`: 0 for `v <= t1`, up to `k` for `v > t_k`.
    pub fn class_of(&self, v: f64) -> usize {
        let b = self.hist.bin_of(v);
        self.bins.iter().filter(|&&t| b > t).count()
    }
}

/// Exhaustive Otsu search for `k` (1 or 2) thresholds. Ties go to the
/// lexicographically lowest bin tuple.
pub fn otsu(values: &[f64], k: usize) -> Result<Otsu> {
    if !(1..=2).contains(&k) {
        return Err(Error::Argument(format!("Otsu supports 1 or 2 thresholds, got {k}")));
    }
    let hist = Histogram::from_values(values)?;
    // Prefix count and index-sum: cum[i] covers bins 0..i.
    let mut cum_n = [0u64; HIST_BINS + 1];
    let mut cum_s = [0u64; HIST_BINS + 1];
    for i in 0..HIST_BINS {
        cum_n[i + 1] = cum_n[i] + hist.counts[i];
        cum_s[i + 1] = cum_s[i] + hist.counts[i] * i as u64;
    }
    let range = |a: usize, b: usize| class_score(cum_n[b] - cum_n[a], cum_s[b] - cum_s[a]);

    let bins = if k == 1 {
        let mut best = (f64::NEG_INFINITY, 0);
        for t in 0..HIST_BINS - 1 {
            let score = range(0, t + 1) + range(t + 1, HIST_BINS);
            if score > best.0 {
                best = (score, t);
            }
        }
        vec![best.1]
    } else {
        let mut best = (f64::NEG_INFINITY, 0, 1);
        for t1 in 0..HIST_BINS - 2 {
            let low = range(0, t1 + 1);
            for t2 in t1 + 1..HIST_BINS - 1 {
                let score = low + range(t1 + 1, t2 + 1) + range(t2 + 1, HIST_BINS);
                if score > best.0 {
                    best = (score, t1, t2);
                }
            }
        }
        vec![best.1, best.2]
    };
    let thresholds = bins.iter().map(|&b| hist.upper_edge(b)).collect();
    Ok(Otsu {
        hist,
        bins,
        thresholds,
    })
}

/// Otsu thresholds in value units (upper edges of the chosen bins).
pub fn otsu_thresholds(values: &[f64], k: usize) -> Result<Vec<f64>> {
    otsu(values, k).map(|o| o.thresholds)
}
