//! Utility metrics comparing synthetic to confidential data: ECDF distances
//! evaluated on the merged multiset of record values (so the maximum
//! distance is the exact two-sample Kolmogorov-Smirnov statistic) and
//! mean/quantile point statistics.

use serde::Serialize;

use crate::error::{Error, Result};

/// Maximum absolute and average squared ECDF difference, evaluated at every
/// record value of both datasets (duplicates included).
pub fn ecdf_distances(confidential: &[f64], synthetic: &[f64]) -> Result<(f64, f64)> {
    if confidential.is_empty() || synthetic.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut c = confidential.to_vec();
    let mut s = synthetic.to_vec();
    c.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (nc, ns) = (c.len() as f64, s.len() as f64);

    let mut max_diff = 0.0f64;
    let mut sq_sum = 0.0f64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < c.len() || j < s.len() {
        // Process all records tied at the next grid value together.
        let t = match (c.get(i), s.get(j)) {
            (Some(a), Some(b)) => a.min(*b),
            (Some(a), None) => *a,
            (None, Some(b)) => *b,
            (None, None) => unreachable!(),
        };
        let mut multiplicity = 0usize;
        while i < c.len() && c[i] == t {
            i += 1;
            multiplicity += 1;
        }
        while j < s.len() && s[j] == t {
            j += 1;
            multiplicity += 1;
        }
        let diff = (i as f64 / nc - j as f64 / ns).abs();
        if diff > max_diff {
            max_diff = diff;
        }
        sq_sum += diff * diff * multiplicity as f64;
    }
    Ok((max_diff, sq_sum / (nc + ns)))
}

/// Type-7 (linear interpolation) empirical quantile of pre-sorted data.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0 && (0.0..=1.0).contains(&p));
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Arithmetic mean plus empirical quantiles at the requested probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PointStatistics {
    pub mean: f64,
    pub quantiles: Vec<(f64, f64)>,
}

pub const DEFAULT_PROBS: [f64; 3] = [0.15, 0.5, 0.9];

pub fn point_statistics(data: &[f64], probs: &[f64]) -> Result<PointStatistics> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Domain(format!(
            "quantile probability {p} outside [0, 1]"
        )));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    Ok(PointStatistics {
        mean,
        quantiles: probs
            .iter()
            .map(|&p| (p, quantile_type7(&sorted, p)))
            .collect(),
    })
}

/// Point summary columns shared by reports and result rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointSummary {
    pub mean: f64,
    pub median: f64,
    pub q15: f64,
    pub q90: f64,
}

impl PointSummary {
    pub fn compute(data: &[f64]) -> Result<Self> {
        let stats = point_statistics(data, &DEFAULT_PROBS)?;
        Ok(Self {
            mean: stats.mean,
            q15: stats.quantiles[0].1,
            median: stats.quantiles[1].1,
            q90: stats.quantiles[2].1,
        })
    }
}

/// Global and analysis-specific utility of a synthetic dataset against its
/// confidential source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityReport {
    pub ecdf_max: f64,
    pub ecdf_avg_sq: f64,
    pub synthetic: PointSummary,
    pub confidential: PointSummary,
}

impl UtilityReport {
    pub fn compute(confidential: &[f64], synthetic: &[f64]) -> Result<Self> {
        let (ecdf_max, ecdf_avg_sq) = ecdf_distances(confidential, synthetic)?;
        Ok(Self {
            ecdf_max,
            ecdf_avg_sq,
            synthetic: PointSummary::compute(synthetic)?,
            confidential: PointSummary::compute(confidential)?,
        })
    }

    pub fn csv_header() -> &'static str {
        "ecdf_max,ecdf_avg_sq,mean,median,q15,q90,ref_mean,ref_median,ref_q15,ref_q90"
    }

    pub fn csv_row(&self) -> String {
        use crate::data::fmt_f64 as f;
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            f(self.ecdf_max),
            f(self.ecdf_avg_sq),
            f(self.synthetic.mean),
            f(self.synthetic.median),
            f(self.synthetic.q15),
            f(self.synthetic.q90),
            f(self.confidential.mean),
            f(self.confidential.median),
            f(self.confidential.q15),
            f(self.confidential.q90)
        )
    }
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Brute-force reference implementations, kept independent of the
    //! two-pointer production path.

    pub fn ecdf_at(data: &[f64], t: f64) -> f64 {
        data.iter().filter(|v| **v <= t).count() as f64 / data.len() as f64
    }

    /// Double-loop ECDF distances over the merged multiset grid.
    pub fn ecdf_distances_brute(c: &[f64], s: &[f64]) -> (f64, f64) {
        let grid: Vec<f64> = c.iter().chain(s.iter()).copied().collect();
        let diffs: Vec<f64> = grid
            .iter()
            .map(|t| (ecdf_at(c, *t) - ecdf_at(s, *t)).abs())
            .collect();
        let max = diffs.iter().copied().fold(0.0, f64::max);
        let avg_sq = diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64;
        (max, avg_sq)
    }
}
