//! Histogram kernels.
//!
//! * [`reference_histogram`]: serial single pass, the oracle for everything else.
//! * [`naive_histogram`]: every worker of a group increments one shared counter
//!   per bin with fetch-and-add. Skewed data piles onto a single counter.
//! * [`adaptive_histogram`]: the group's counters are split into sub-bins laid
//!   out by a [`BinningPattern`]; lane `L` increments slot
//!   `offset[b] + L % count[b]`, which spreads a hot bin over several counters.
//!
//! Both parallel kernels share one execution layout. The chunk is cut into
//! `group_count` contiguous word ranges (remainder to the last group). Each
//! group owns one counter array and walks its range in lock-step "warp steps"
//! of `group_size` consecutive words, word `j` of a step going to lane `j`.
//! Within a step every lane issues the increment for byte 0 of its word, then
//! byte 1, and so on. A group's steps are split over as many tasks as there are
//! worker threads, so several tasks hammer the same counter array at once.

mod ablation;

use std::sync::atomic::{AtomicBool, AtomicU16, AtomicU64, Ordering};

use crossbeam_utils::CachePadded;
use serde::{Deserialize, Serialize};

pub use ablation::{run_ablation, throughput, AblationRun, GENEALOGY};

use crate::error::{Error, Result};
use crate::exec;
use crate::pattern::{validate_pattern, BinningPattern};
use crate::types::{Histogram256, PackedChunk, BINS, PIXELS_PER_WORD};

pub const DEFAULT_GROUP_SIZE: usize = 32;
pub const DEFAULT_GROUP_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Naive,
    Adaptive,
    CopyOnly,
    CopyInit,
    PatternLoad,
    SubHistNoReduce,
    Full,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Naive => "naive",
            KernelKind::Adaptive => "adaptive",
            KernelKind::CopyOnly => "copy-only",
            KernelKind::CopyInit => "copy-init",
            KernelKind::PatternLoad => "pattern-load",
            KernelKind::SubHistNoReduce => "subhist-no-reduce",
            KernelKind::Full => "full",
        }
    }

    /// True for the kinds whose output is a correct histogram.
    pub fn produces_histogram(self) -> bool {
        matches!(
            self,
            KernelKind::Naive | KernelKind::Adaptive | KernelKind::Full
        )
    }
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Width of the shared sub-counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CounterWidth {
    #[default]
    Wide,
    /// 16-bit sub-counters; an increment past `u16::MAX` fails the kernel with
    /// [`Error::SubCounterOverflow`].
    Narrow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerGroupConfig {
    /// Workers sharing one counter array.
    pub group_size: usize,
    /// Independent groups, each producing a partial histogram.
    pub group_count: usize,
    #[serde(default)]
    pub counter_width: CounterWidth,
    /// Run tasks on the rayon pool. Ignored without the `parallel` feature.
    #[serde(default = "default_parallel")]
    pub parallel: bool,
}

fn default_parallel() -> bool {
    true
}

impl Default for WorkerGroupConfig {
    fn default() -> Self {
        Self {
            group_size: DEFAULT_GROUP_SIZE,
            group_count: DEFAULT_GROUP_COUNT,
            counter_width: CounterWidth::Wide,
            parallel: true,
        }
    }
}

impl WorkerGroupConfig {
    pub fn new(group_size: usize, group_count: usize) -> Self {
        Self {
            group_size,
            group_count,
            ..Self::default()
        }
    }

    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }

    pub fn narrow(mut self) -> Self {
        self.counter_width = CounterWidth::Narrow;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.group_size == 0 {
            return Err(Error::InvalidGroupConfig("group_size must be at least 1"));
        }
        if self.group_count == 0 {
            return Err(Error::InvalidGroupConfig("group_count must be at least 1"));
        }
        Ok(())
    }

    /// Word range of group `g` within a chunk of `words` words.
    pub fn group_range(&self, g: usize, words: usize) -> std::ops::Range<usize> {
        let share = words / self.group_count;
        let start = g * share;
        let end = if g + 1 == self.group_count {
            words
        } else {
            start + share
        };
        start..end
    }
}

/// One counter of a group's shared array.
pub trait CounterCell: Send + Sync {
    fn zeroed() -> Self;
    /// Linearizable increment. Returns false if the counter wrapped.
    fn bump(&self) -> bool;
    fn value(&self) -> u64;
}

impl CounterCell for AtomicU64 {
    fn zeroed() -> Self {
        AtomicU64::new(0)
    }

    #[inline(always)]
    fn bump(&self) -> bool {
        self.fetch_add(1, Ordering::Relaxed);
        true
    }

    fn value(&self) -> u64 {
        self.load(Ordering::Relaxed)
    }
}

impl CounterCell for AtomicU16 {
    fn zeroed() -> Self {
        AtomicU16::new(0)
    }

    #[inline(always)]
    fn bump(&self) -> bool {
        self.fetch_add(1, Ordering::Relaxed) != u16::MAX
    }

    fn value(&self) -> u64 {
        self.load(Ordering::Relaxed) as u64
    }
}

/// The counter array shared by all workers of one group. Each slot sits on
/// its own cache line so distinct slots never contend.
pub struct SubCounterArray<C: CounterCell = AtomicU64> {
    slots: Box<[CachePadded<C>]>,
}

impl<C: CounterCell> SubCounterArray<C> {
    pub fn new(len: usize) -> Self {
        Self {
            slots: (0..len).map(|_| CachePadded::new(C::zeroed())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    #[inline(always)]
    pub fn increment(&self, slot: usize) -> bool {
        self.slots[slot].bump()
    }

    pub fn get(&self, slot: usize) -> u64 {
        self.slots[slot].value()
    }

    pub fn values(&self) -> Vec<u64> {
        self.slots.iter().map(|c| c.value()).collect()
    }
}

impl SubCounterArray<AtomicU64> {
    pub fn from_values(values: &[u64]) -> Self {
        Self {
            slots: values
                .iter()
                .map(|&v| CachePadded::new(AtomicU64::new(v)))
                .collect(),
        }
    }
}

/// Sums each bin's sub-bins: `counts[b] = sum(slots[offset[b] .. offset[b] + count[b]])`.
pub fn reduce_subbins<C: CounterCell>(
    slots: &SubCounterArray<C>,
    pattern: &BinningPattern,
) -> Histogram256 {
    let mut h = Histogram256::zero();
    for b in 0..BINS {
        let start = pattern.offset(b);
        let sum: u64 = (start..start + pattern.count(b))
            .map(|s| slots.get(s))
            .sum();
        h.bump(b, sum);
    }
    h
}

/// Serial single-pass histogram.
pub fn reference_histogram(chunk: &PackedChunk) -> Histogram256 {
    let mut h = Histogram256::zero();
    for p in chunk.pixels() {
        h.bump(p as usize, 1);
    }
    h
}

/// One shared counter per bin per group.
pub fn naive_histogram(chunk: &PackedChunk, cfg: &WorkerGroupConfig) -> Result<Histogram256> {
    cfg.validate()?;
    match cfg.counter_width {
        CounterWidth::Wide => naive_with::<AtomicU64>(chunk, cfg),
        CounterWidth::Narrow => naive_with::<AtomicU16>(chunk, cfg),
    }
}

fn naive_with<C: CounterCell>(
    chunk: &PackedChunk,
    cfg: &WorkerGroupConfig,
) -> Result<Histogram256> {
    let groups = run_groups::<C, _, _>(chunk.words(), cfg, BINS, &DirectMap, &NoProbe)?;
    let mut total = Histogram256::zero();
    for counters in &groups {
        let mut part = Histogram256::zero();
        for b in 0..BINS {
            part.bump(b, counters.get(b));
        }
        total.merge_from(&part)?;
    }
    Ok(total)
}

/// Sub-binned kernel using `pattern` and the lane-cyclic slot rule.
pub fn adaptive_histogram(
    chunk: &PackedChunk,
    pattern: &BinningPattern,
    cfg: &WorkerGroupConfig,
) -> Result<Histogram256> {
    adaptive_probed(chunk, pattern, cfg, &NoProbe)
}

/// [`adaptive_histogram`] that also records which lane touched which slot.
pub fn adaptive_histogram_traced(
    chunk: &PackedChunk,
    pattern: &BinningPattern,
    cfg: &WorkerGroupConfig,
) -> Result<(Histogram256, SlotTrace)> {
    cfg.validate()?;
    let trace = SlotTrace::new(cfg.group_count, cfg.group_size, pattern.total_slots());
    let h = adaptive_probed(chunk, pattern, cfg, &trace)?;
    Ok((h, trace))
}

fn adaptive_probed<P: Probe>(
    chunk: &PackedChunk,
    pattern: &BinningPattern,
    cfg: &WorkerGroupConfig,
    probe: &P,
) -> Result<Histogram256> {
    cfg.validate()?;
    validate_pattern(pattern)?;
    let map = LaneTable::new(pattern, cfg.group_size);
    match cfg.counter_width {
        CounterWidth::Wide => {
            let groups = run_groups::<AtomicU64, _, _>(
                chunk.words(),
                cfg,
                pattern.total_slots(),
                &map,
                probe,
            )?;
            merge_groups(&groups, pattern)
        }
        CounterWidth::Narrow => {
            let groups = run_groups::<AtomicU16, _, _>(
                chunk.words(),
                cfg,
                pattern.total_slots(),
                &map,
                probe,
            )?;
            merge_groups(&groups, pattern)
        }
    }
}

fn merge_groups<C: CounterCell>(
    groups: &[SubCounterArray<C>],
    pattern: &BinningPattern,
) -> Result<Histogram256> {
    let mut total = Histogram256::zero();
    for counters in groups {
        total.merge_from(&reduce_subbins(counters, pattern))?;
    }
    Ok(total)
}

/// Runs `kernel` over every slice in a single invocation, one histogram per slice.
pub fn batch_histograms(
    slices: &[PackedChunk],
    kernel: KernelKind,
    pattern: &BinningPattern,
    cfg: &WorkerGroupConfig,
) -> Result<Vec<Histogram256>> {
    if !kernel.produces_histogram() {
        return Err(Error::NotAHistogramKernel(kernel.name()));
    }
    exec::map_collect(slices, cfg.parallel, |slice| match kernel {
        KernelKind::Naive => naive_histogram(slice, cfg),
        _ => adaptive_histogram(slice, pattern, cfg),
    })
    .into_iter()
    .collect()
}

/// Maps (lane, bin) to a counter slot.
pub(crate) trait SlotMap: Sync {
    fn slot(&self, lane: usize, bin: usize) -> usize;
}

pub(crate) struct DirectMap;

impl SlotMap for DirectMap {
    #[inline(always)]
    fn slot(&self, _lane: usize, bin: usize) -> usize {
        bin
    }
}

/// Per-lane slot index table derived from a pattern: entry `lane * 256 + b`
/// holds `offset[b] + lane % count[b]`.
pub(crate) struct LaneTable {
    table: Vec<u32>,
}

impl LaneTable {
    pub(crate) fn new(pattern: &BinningPattern, group_size: usize) -> Self {
        let mut table = Vec::with_capacity(group_size * BINS);
        for lane in 0..group_size {
            table.extend((0..BINS).map(|b| pattern.slot_for(b, lane) as u32));
        }
        Self { table }
    }
}

impl SlotMap for LaneTable {
    #[inline(always)]
    fn slot(&self, lane: usize, bin: usize) -> usize {
        self.table[lane * BINS + bin] as usize
    }
}

pub(crate) trait Probe: Sync {
    fn hit(&self, group: usize, lane: usize, slot: usize);
}

pub(crate) struct NoProbe;

impl Probe for NoProbe {
    #[inline(always)]
    fn hit(&self, _group: usize, _lane: usize, _slot: usize) {}
}

/// Per (group, lane, slot) increment totals recorded by an instrumented run.
pub struct SlotTrace {
    group_size: usize,
    slots: usize,
    hits: Vec<AtomicU64>,
}

impl SlotTrace {
    fn new(groups: usize, group_size: usize, slots: usize) -> Self {
        Self {
            group_size,
            slots,
            hits: (0..groups * group_size * slots)
                .map(|_| AtomicU64::new(0))
                .collect(),
        }
    }

    pub fn hits(&self, group: usize, lane: usize, slot: usize) -> u64 {
        self.hits[(group * self.group_size + lane) * self.slots + slot].load(Ordering::Relaxed)
    }

    /// Increments received by each slot of `group`, summed over lanes.
    pub fn slot_totals(&self, group: usize) -> Vec<u64> {
        (0..self.slots)
            .map(|s| (0..self.group_size).map(|l| self.hits(group, l, s)).sum())
            .collect()
    }
}

impl Probe for SlotTrace {
    fn hit(&self, group: usize, lane: usize, slot: usize) {
        self.hits[(group * self.group_size + lane) * self.slots + slot]
            .fetch_add(1, Ordering::Relaxed);
    }
}

/// Splits each group's warp steps over the worker threads and runs them.
///
/// Task `t` handles group `t % group_count`, so tasks scheduled side by side
/// share a counter array.
pub(crate) fn for_each_group_task<F>(words: usize, cfg: &WorkerGroupConfig, body: F)
where
    F: Fn(usize, std::ops::Range<usize>) + Sync + Send,
{
    let steps_max = words
        .div_ceil(cfg.group_count)
        .div_ceil(cfg.group_size)
        .max(1);
    let per_group = exec::worker_threads(cfg.parallel).min(steps_max);
    exec::for_each_index(cfg.group_count * per_group, cfg.parallel, |t| {
        let g = t % cfg.group_count;
        let part = t / cfg.group_count;
        let range = cfg.group_range(g, words);
        let steps = range.len().div_ceil(cfg.group_size);
        let first = part * steps / per_group;
        let last = (part + 1) * steps / per_group;
        let start = (range.start + first * cfg.group_size).min(range.end);
        let end = (range.start + last * cfg.group_size).min(range.end);
        body(g, start..end);
    });
}

fn run_groups<C, M, P>(
    words: &[u32],
    cfg: &WorkerGroupConfig,
    slot_count: usize,
    map: &M,
    probe: &P,
) -> Result<Vec<SubCounterArray<C>>>
where
    C: CounterCell,
    M: SlotMap,
    P: Probe,
{
    let groups: Vec<SubCounterArray<C>> = (0..cfg.group_count)
        .map(|_| SubCounterArray::new(slot_count))
        .collect();
    let overflow = AtomicBool::new(false);
    let gs = cfg.group_size;
    for_each_group_task(words.len(), cfg, |g, range| {
        let counters = &groups[g];
        let mut ok = true;
        for warp in words[range].chunks(gs) {
            for k in 0..PIXELS_PER_WORD {
                let shift = 8 * k;
                for (lane, &w) in warp.iter().enumerate() {
                    let bin = ((w >> shift) & 0xFF) as usize;
                    let slot = map.slot(lane, bin);
                    probe.hit(g, lane, slot);
                    ok &= counters.increment(slot);
                }
            }
        }
        if !ok {
            overflow.store(true, Ordering::Relaxed);
        }
    });
    if overflow.into_inner() {
        return Err(Error::SubCounterOverflow);
    }
    Ok(groups)
}
