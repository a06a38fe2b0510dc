//! Binning patterns: how the 256 bins are spread over a flat array of sub-counters.
//!
//! A pattern gives every bin a contiguous run of `count[b]` sub-bins starting at
//! `offset[b]`. Bins that carry more of the expected mass get more sub-bins, so
//! concurrent increments of a hot bin land on different counters.
//!
//! Patterns are computed from a prior histogram by largest-remainder
//! apportionment with a floor of one sub-bin per bin and a per-bin cap:
//!
//! 1. every bin starts with one sub-bin, leaving `R = S - 256` extras;
//! 2. bin `b` ideally receives `prior[b] / total * R` extras (`R / 256` when the
//!    prior is empty);
//! 3. each bin takes the integer part of its ideal, clipped to `cap - 1`;
//! 4. the extras still unassigned go one at a time to bins below the cap, in
//!    descending order of fractional remainder (ties by ascending bin index),
//!    cycling through that order until none are left.
//!
//! All arithmetic is exact integer arithmetic, so a prior always maps to the
//! same pattern on every platform.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Histogram256, BINS};

pub const DEFAULT_TOTAL_SLOTS: usize = 960;
pub const DEFAULT_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinningPattern {
    offset: Vec<u32>,
    count: Vec<u32>,
    total_slots: usize,
    cap: usize,
}

impl BinningPattern {
    /// Builds a pattern from per-bin sub-bin counts, deriving contiguous offsets.
    pub fn from_counts(count: [u32; BINS], cap: usize) -> Result<Self> {
        let mut offset = Vec::with_capacity(BINS);
        let mut next = 0u32;
        for &c in &count {
            offset.push(next);
            next += c;
        }
        let p = Self {
            offset,
            count: count.to_vec(),
            total_slots: next as usize,
            cap,
        };
        validate_pattern(&p)?;
        Ok(p)
    }

    /// Assembles a pattern without checking it. Use [`validate_pattern`] before
    /// handing it to a kernel.
    pub fn from_raw_parts(
        offset: Vec<u32>,
        count: Vec<u32>,
        total_slots: usize,
        cap: usize,
    ) -> Self {
        Self {
            offset,
            count,
            total_slots,
            cap,
        }
    }

    pub fn offsets(&self) -> &[u32] {
        &self.offset
    }

    pub fn counts(&self) -> &[u32] {
        &self.count
    }

    #[inline]
    pub fn offset(&self, bin: usize) -> usize {
        self.offset[bin] as usize
    }

    #[inline]
    pub fn count(&self, bin: usize) -> usize {
        self.count[bin] as usize
    }

    pub fn total_slots(&self) -> usize {
        self.total_slots
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Sub-counter slot used by worker `lane` when it increments `bin`.
    #[inline]
    pub fn slot_for(&self, bin: usize, lane: usize) -> usize {
        self.offset(bin) + lane % self.count(bin)
    }

    /// The bin with the most sub-bins; lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for b in 1..BINS {
            if self.count[b] > self.count[best] {
                best = b;
            }
        }
        best
    }

    /// Flat text form: 256 lines of `bin offset count`.
    pub fn dump(&self) -> String {
        let mut out = String::with_capacity(BINS * 12);
        for b in 0..self.offset.len().min(self.count.len()) {
            let _ = writeln!(out, "{} {} {}", b, self.offset[b], self.count[b]);
        }
        out
    }

    /// Parses the text form written by [`dump`](Self::dump) and validates it.
    pub fn parse_dump(text: &str, cap: usize) -> Result<Self> {
        let mut count = [0u32; BINS];
        let mut offset = vec![0u32; BINS];
        let mut seen = 0usize;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let fields: Vec<u32> = line
                .split_whitespace()
                .map(|f| f.parse::<u32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidPattern {
                    reason: "malformed dump line",
                })?;
            let [bin, off, cnt] = fields[..] else {
                return Err(Error::InvalidPattern {
                    reason: "malformed dump line",
                });
            };
            let bin = bin as usize;
            if bin != seen || bin >= BINS {
                return Err(Error::InvalidPattern {
                    reason: "dump bins out of order",
                });
            }
            offset[bin] = off;
            count[bin] = cnt;
            seen += 1;
        }
        if seen != BINS {
            return Err(Error::InvalidPattern {
                reason: "dump must list 256 bins",
            });
        }
        let total = count.iter().map(|&c| c as usize).sum();
        let p = Self::from_raw_parts(offset, count.to_vec(), total, cap);
        validate_pattern(&p)?;
        Ok(p)
    }
}

fn check_slot_range(total_slots: usize, cap: usize) -> Result<()> {
    let max = BINS * cap;
    if cap == 0 || total_slots < BINS || total_slots > max {
        return Err(Error::SlotCountOutOfRange {
            slots: total_slots,
            cap,
            max,
        });
    }
    Ok(())
}

/// Equal shares of `total_slots`, leftovers to the lowest bins first.
pub fn uniform_pattern(total_slots: usize, cap: usize) -> Result<BinningPattern> {
    compute_binning_pattern(&Histogram256::zero(), total_slots, cap)
}

/// Apportions `total_slots` sub-bins over the 256 bins in proportion to `prior`.
pub fn compute_binning_pattern(
    prior: &Histogram256,
    total_slots: usize,
    cap: usize,
) -> Result<BinningPattern> {
    check_slot_range(total_slots, cap)?;
    let extras = (total_slots - BINS) as u128;
    let total: u128 = prior.counts().iter().map(|&c| c as u128).sum();
    let max_extra = (cap - 1) as u32;

    // ideal_b = numer_b / denom; floor and remainder taken exactly.
    let (denom, numer): (u128, Vec<u128>) = if total == 0 {
        (BINS as u128, vec![extras; BINS])
    } else {
        (
            total,
            prior.counts().iter().map(|&c| c as u128 * extras).collect(),
        )
    };

    let mut count = [1u32; BINS];
    let mut remainder = [0u128; BINS];
    let mut assigned = 0u128;
    for b in 0..BINS {
        let whole = numer[b] / denom;
        remainder[b] = numer[b] % denom;
        let extra = whole.min(max_extra as u128) as u32;
        count[b] += extra;
        assigned += extra as u128;
    }

    let mut left = (extras - assigned) as usize;
    if left > 0 {
        let mut order: Vec<usize> = (0..BINS).collect();
        order.sort_by(|&a, &b| remainder[b].cmp(&remainder[a]).then(a.cmp(&b)));
        while left > 0 {
            for &b in &order {
                if left == 0 {
                    break;
                }
                if count[b] <= max_extra {
                    count[b] += 1;
                    left -= 1;
                }
            }
        }
    }

    BinningPattern::from_counts(count, cap)
}

/// Checks the pattern invariants, reporting the first one violated.
pub fn validate_pattern(p: &BinningPattern) -> Result<()> {
    let bad = |reason| Err(Error::InvalidPattern { reason });
    if p.count.len() != BINS || p.offset.len() != BINS {
        return bad("pattern must cover 256 bins");
    }
    if p.cap == 0 {
        return bad("cap must be positive");
    }
    if p.count.iter().any(|&c| c < 1) {
        return bad("count below 1");
    }
    if p.count.iter().any(|&c| c as usize > p.cap) {
        return bad("count above cap");
    }
    let sum: usize = p.count.iter().map(|&c| c as usize).sum();
    if sum != p.total_slots {
        return bad("slot total mismatch");
    }
    let mut next = 0u32;
    for b in 0..BINS {
        if p.offset[b] != next {
            return bad("offsets not contiguous");
        }
        next += p.count[b];
    }
    Ok(())
}

/// Per-bin integer part of the ideal extra allocation, before capping.
///
/// Exposed for property tests of floor-monotonicity.
pub fn ideal_floors(prior: &Histogram256, total_slots: usize) -> [u64; BINS] {
    let extras = total_slots.saturating_sub(BINS) as u128;
    let total: u128 = prior.counts().iter().map(|&c| c as u128).sum();
    let mut out = [0u64; BINS];
    for (b, o) in out.iter_mut().enumerate() {
        *o = if total == 0 {
            (extras / BINS as u128) as u64
        } else {
            (prior.counts()[b] as u128 * extras / total) as u64
        };
    }
    out
}
