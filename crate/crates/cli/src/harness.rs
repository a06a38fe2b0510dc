//! Timing helpers and the noise-guarded comparisons used by every mode.

use std::fmt;
use std::time::Duration;

/// Two medians closer than this factor are treated as indistinguishable.
pub const NOISE_GUARD: f64 = 1.10;

pub fn median(mut xs: Vec<Duration>) -> Duration {
    assert!(!xs.is_empty(), "median of nothing");
    xs.sort();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2
    }
}

/// Outcome of asserting `a > b` on noisy measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    /// `a` exceeds `b` by more than the noise guard.
    Holds,
    /// Within the guard either way.
    Inconclusive,
    /// `b` exceeds `a` by more than the noise guard.
    Inverted,
}

impl Ordering {
    pub fn as_str(self) -> &'static str {
        match self {
            Ordering::Holds => "holds",
            Ordering::Inconclusive => "inconclusive",
            Ordering::Inverted => "inverted",
        }
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Compares two positive quantities, expecting `a > b`.
pub fn expect_greater(a: f64, b: f64) -> Ordering {
    expect_greater_by(a, b, NOISE_GUARD)
}

/// [`expect_greater`] with an explicit separation factor.
pub fn expect_greater_by(a: f64, b: f64, guard: f64) -> Ordering {
    if a > b * guard {
        Ordering::Holds
    } else if b > a * guard {
        Ordering::Inverted
    } else {
        Ordering::Inconclusive
    }
}

/// Ranks with ties averaged, 1-based.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation: Pearson correlation of the rank vectors.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx).powi(2);
        vy += (b - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// Outcome of one self-check a mode performs before reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Inconclusive,
    Fail,
}

impl Check {
    pub fn new(name: impl Into<String>, status: Status, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status,
            detail: detail.into(),
        }
    }

    pub fn pass_if(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Self::new(name, if ok { Status::Pass } else { Status::Fail }, detail)
    }

    /// Maps an ordering onto a check that fails only when inverted.
    pub fn ordering(name: impl Into<String>, ord: Ordering, detail: impl Into<String>) -> Self {
        let status = match ord {
            Ordering::Holds => Status::Pass,
            Ordering::Inconclusive => Status::Inconclusive,
            Ordering::Inverted => Status::Fail,
        };
        Self::new(name, status, detail)
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Inconclusive => "INCONCLUSIVE",
            Status::Fail => "FAIL",
        };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}
