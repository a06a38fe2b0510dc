//! Cumulative stage ablation of the adaptive kernel, for timing only.
//!
//! Each variant does the work of the previous one plus one more stage:
//! read words and write a 256-entry output per group, zero the sub-counter
//! array, look up the slot index for every pixel, increment the sub-counters,
//! and finally reduce sub-bins and merge group partials. Dummy outputs go to
//! a sink that is folded into a checksum so none of the work can be elided.

use std::hint::black_box;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use super::{
    adaptive_histogram, for_each_group_task, naive_histogram, run_groups, KernelKind, LaneTable,
    NoProbe, SlotMap, SubCounterArray, WorkerGroupConfig,
};
use crate::error::Result;
use crate::pattern::{validate_pattern, BinningPattern};
use crate::types::{Histogram256, PackedChunk, BINS, PIXELS_PER_WORD};

/// The five cumulative stages, cheapest first.
pub const GENEALOGY: [KernelKind; 5] = [
    KernelKind::CopyOnly,
    KernelKind::CopyInit,
    KernelKind::PatternLoad,
    KernelKind::SubHistNoReduce,
    KernelKind::Full,
];

#[derive(Debug, Clone)]
pub struct AblationRun {
    pub variant: KernelKind,
    pub elapsed: Duration,
    pub bytes: usize,
    pub checksum: u64,
    /// Present for variants that produce a real histogram.
    pub histogram: Option<Histogram256>,
}

impl AblationRun {
    pub fn throughput(&self) -> f64 {
        throughput(self.bytes, self.elapsed)
    }
}

/// Input bytes per second; infinite for a zero duration.
pub fn throughput(bytes: usize, elapsed: Duration) -> f64 {
    let secs = elapsed.as_secs_f64();
    if secs == 0.0 {
        f64::INFINITY
    } else {
        bytes as f64 / secs
    }
}

struct Sink {
    cells: Vec<AtomicU64>,
}

impl Sink {
    fn new(groups: usize) -> Self {
        Self {
            cells: (0..groups * BINS).map(|_| AtomicU64::new(0)).collect(),
        }
    }

    fn write(&self, group: usize, lane: usize, value: u64) {
        self.cells[group * BINS + lane % BINS].fetch_add(value, Ordering::Relaxed);
    }

    fn checksum(&self) -> u64 {
        self.cells.iter().fold(0u64, |acc, c| {
            acc.rotate_left(5) ^ c.load(Ordering::Relaxed)
        })
    }
}

/// Times one variant on `chunk`.
pub fn run_ablation(
    chunk: &PackedChunk,
    variant: KernelKind,
    pattern: &BinningPattern,
    cfg: &WorkerGroupConfig,
) -> Result<AblationRun> {
    cfg.validate()?;
    validate_pattern(pattern)?;
    let words = chunk.words();
    let start = Instant::now();
    let (checksum, histogram) = match variant {
        KernelKind::Naive => {
            let h = naive_histogram(chunk, cfg)?;
            (h.total(), Some(h))
        }
        KernelKind::Adaptive | KernelKind::Full => {
            let h = adaptive_histogram(chunk, pattern, cfg)?;
            (h.total(), Some(h))
        }
        KernelKind::CopyOnly => (copy_stage(words, cfg, None, None), None),
        KernelKind::CopyInit => {
            let arrays = zeroed_arrays(cfg, pattern);
            (copy_stage(words, cfg, Some(&arrays), None), None)
        }
        KernelKind::PatternLoad => {
            let arrays = zeroed_arrays(cfg, pattern);
            let table = LaneTable::new(pattern, cfg.group_size);
            (copy_stage(words, cfg, Some(&arrays), Some(&table)), None)
        }
        KernelKind::SubHistNoReduce => {
            let table = LaneTable::new(pattern, cfg.group_size);
            let groups =
                run_groups::<AtomicU64, _, _>(words, cfg, pattern.total_slots(), &table, &NoProbe)?;
            let sink = Sink::new(cfg.group_count);
            for (g, arr) in groups.iter().enumerate() {
                sink.write(g, 0, arr.get(0));
            }
            (sink.checksum(), None)
        }
    };
    let elapsed = start.elapsed();
    Ok(AblationRun {
        variant,
        elapsed,
        bytes: chunk.byte_len(),
        checksum: black_box(checksum),
        histogram,
    })
}

fn zeroed_arrays(cfg: &WorkerGroupConfig, pattern: &BinningPattern) -> Vec<SubCounterArray> {
    (0..cfg.group_count)
        .map(|_| SubCounterArray::new(pattern.total_slots()))
        .collect()
}

fn copy_stage(
    words: &[u32],
    cfg: &WorkerGroupConfig,
    arrays: Option<&[SubCounterArray]>,
    table: Option<&LaneTable>,
) -> u64 {
    let sink = Sink::new(cfg.group_count);
    let gs = cfg.group_size;
    for_each_group_task(words.len(), cfg, |g, range| {
        let mut acc = 0u64;
        let mut lanes = 0usize;
        for warp in words[range].chunks(gs) {
            match table {
                None => {
                    for &w in warp {
                        acc = acc.wrapping_add(w as u64);
                    }
                }
                Some(table) => {
                    for k in 0..PIXELS_PER_WORD {
                        let shift = 8 * k;
                        for (lane, &w) in warp.iter().enumerate() {
                            let bin = ((w >> shift) & 0xFF) as usize;
                            acc = acc.wrapping_add(table.slot(lane, bin) as u64);
                        }
                    }
                }
            }
            lanes = lanes.wrapping_add(warp.len());
        }
        if let Some(arrays) = arrays {
            acc ^= arrays[g].get(0);
        }
        sink.write(g, lanes, black_box(acc));
    });
    sink.checksum()
}
