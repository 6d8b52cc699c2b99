//! Contour thresholds for credible (posterior) and confidence (profile)
//! regions.
//!
//! Credible regions are highest-posterior-density sets of bins. Confidence
//! regions use the likelihood-ratio cut `lnl_max - q / 2`, where `q` is the
//! chi-square quantile at the requested level with one degree of freedom per
//! grid axis.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::binning::{Grid, GridKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Credible,
    Confidence,
}

/// `requested` is sorted by descending probability and `thresholds` is
/// parallel to it, so thresholds come out ascending: the widest region has
/// the lowest cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionThresholds {
    pub kind: RegionKind,
    pub requested: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl RegionThresholds {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Threshold for `level`, if it was requested.
    pub fn threshold_for(&self, level: f64) -> Option<f64> {
        self.requested
            .iter()
            .position(|&p| p == level)
            .map(|i| self.thresholds[i])
    }
}

fn sorted_levels(levels: &[f64]) -> Result<Vec<f64>> {
    if let Some(&bad) = levels.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::Level(bad));
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted)
}

/// Highest-posterior-density thresholds on a posterior grid.
///
/// For each level `p`, bins are taken in order of decreasing value until
/// their cumulative mass reaches `p * M` (`M` = mass of all bins); the value
/// of the last bin taken is the threshold. The region `{bins >= threshold}`
/// then holds at least `p * M`, while the bins strictly above the threshold
/// hold less. Bins tied with the threshold are all inside.
pub fn hpd_thresholds(grid: &Grid, levels: &[f64]) -> Result<RegionThresholds> {
    if grid.kind != GridKind::Posterior {
        return Err(Error::Region(
            "credible regions need a posterior grid".into(),
        ));
    }
    let requested = sorted_levels(levels)?;

    let mut sorted = grid.values.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let cumulative: Vec<f64> = sorted
        .iter()
        .scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let total = cumulative.last().copied().unwrap_or(0.0);
    if total <= 0.0 {
        return Err(Error::Region("posterior grid holds no mass".into()));
    }

    let thresholds = requested
        .iter()
        .map(|&p| {
            let target = p * total;
            let i = cumulative.partition_point(|&c| c < target);
            sorted[i.min(sorted.len() - 1)]
        })
        .collect();

    Ok(RegionThresholds {
        kind: RegionKind::Credible,
        requested,
        thresholds,
    })
}

/// Likelihood-ratio thresholds on a profile grid.
pub fn wilks_thresholds(grid: &Grid, levels: &[f64]) -> Result<RegionThresholds> {
    if grid.kind != GridKind::Profile {
        return Err(Error::Region(
            "confidence regions need a profile grid".into(),
        ));
    }
    let requested = sorted_levels(levels)?;
    if !grid.lnl_max.is_finite() {
        return Err(Error::Region("profile grid has no occupied bin".into()));
    }
    let dof = grid.dimensions();
    let thresholds = requested
        .iter()
        .map(|&p| Ok(grid.lnl_max - 0.5 * chi2_quantile(p, dof)?))
        .collect::<Result<_>>()?;
    Ok(RegionThresholds {
        kind: RegionKind::Confidence,
        requested,
        thresholds,
    })
}

/// Chi-square CDF for one degree of freedom.
pub fn chi2_cdf_1dof(q: f64) -> f64 {
    if q <= 0.0 {
        0.0
    } else {
        erf((0.5 * q).sqrt())
    }
}

/// Chi-square quantile at probability `p` for 1 or 2 degrees of freedom.
pub fn chi2_quantile(p: f64, dof: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Level(p));
    }
    match dof {
        1 => Ok(bisect_increasing(chi2_cdf_1dof, p)),
        2 => Ok(-2.0 * (-p).ln_1p()),
        _ => Err(Error::Region(format!(
            "chi-square quantile implemented for 1 or 2 degrees of freedom, not {dof}"
        ))),
    }
}

/// Solves `f(q) = target` for a non-decreasing `f` on `[0, inf)`.
fn bisect_increasing(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) < target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-13 {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
