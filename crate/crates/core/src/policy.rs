//! Degeneracy of a histogram and the naive/adaptive switching rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelKind;
use crate::types::{Histogram256, BINS};

pub const DEFAULT_THRESHOLD: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    /// Largest single-bin share of the total; 0 for an empty histogram.
    pub max_bin_fraction: f64,
    pub argmax_bin: u8,
    pub total: u64,
}

/// Adaptive when the largest bin holds at least `threshold` of the mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchPolicy {
    threshold: f64,
}

impl Default for SwitchPolicy {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl SwitchPolicy {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidThreshold(threshold));
        }
        Ok(Self { threshold })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

pub fn degeneracy(h: &Histogram256) -> DegeneracyReport {
    let counts = h.counts();
    let mut argmax = 0;
    for b in 1..BINS {
        if counts[b] > counts[argmax] {
            argmax = b;
        }
    }
    let total = h.total();
    let max_bin_fraction = if total == 0 {
        0.0
    } else {
        counts[argmax] as f64 / total as f64
    };
    DegeneracyReport {
        max_bin_fraction,
        argmax_bin: argmax as u8,
        total,
    }
}

pub fn select_kernel(report: &DegeneracyReport, policy: &SwitchPolicy) -> KernelKind {
    if report.max_bin_fraction >= policy.threshold {
        KernelKind::Adaptive
    } else {
        KernelKind::Naive
    }
}

/// Total-variation distance between the normalized histograms.
pub fn divergence(a: &Histogram256, b: &Histogram256) -> Result<f64> {
    let (ta, tb) = (a.total(), b.total());
    if ta == 0 || tb == 0 {
        return Err(Error::EmptyHistogram);
    }
    let (ta, tb) = (ta as f64, tb as f64);
    let l1: f64 = a
        .counts()
        .iter()
        .zip(b.counts())
        .map(|(&x, &y)| (x as f64 / ta - y as f64 / tb).abs())
        .sum();
    Ok((0.5 * l1).clamp(0.0, 1.0))
}
