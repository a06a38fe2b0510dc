//! Streaming histograms: an accumulator over the whole stream, a moving window
//! over the last `W` chunks, and a five-stage iteration loop that can overlap
//! consecutive iterations.
//!
//! Every iteration runs, in order:
//!
//! | stage          | side   | work                                                   |
//! |----------------|--------|--------------------------------------------------------|
//! | `cpu_pre`      | host   | recompute the binning pattern (every `recompute_pattern_every` iterations) |
//! | `transfer_in`  | host   | pull the batch from the source into a staging buffer   |
//! | `compute`      | device | run the selected kernel over every slice of the batch  |
//! | `transfer_out` | device | copy the per-slice histograms out                      |
//! | `cpu_post`     | host   | fold into accumulator and window, degeneracy, next kernel |
//!
//! In pipelined mode the device stages run on a separate thread, and the host
//! prepares iteration `i + 1` while the device works on iteration `i`. Two
//! staging buffers alternate between the sides. The host waits for iteration
//! `i` to come back (one barrier per iteration) before folding it in and
//! submitting iteration `i + 1`.
//!
//! Data dependencies are fixed by iteration index so both modes compute the
//! same thing: the kernel of iteration `i + 1` is selected from the window
//! after iteration `i`, and the pattern of iteration `j` is learned from the
//! window after iteration `j - 2` (the newest one the host has while the
//! device is still busy with `j - 1`).

mod pipeline;
mod source;
mod state;

use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use pipeline::{run_pipeline, run_sequential, StreamOutcome};
pub use source::{Schedule, ScheduledSource};
pub use state::{accumulator_push, window_push, AccumulatorState, WindowState, DEFAULT_WINDOW};

use crate::error::{Error, Result};
use crate::kernels::{KernelKind, WorkerGroupConfig};
use crate::pattern::{DEFAULT_CAP, DEFAULT_TOTAL_SLOTS};

/// Per-iteration target durations for the synthetic stages, in microseconds.
///
/// A stage that finishes its real work early waits until its target has
/// elapsed. Absent fields leave the stage at its natural duration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageProfile {
    #[serde(default)]
    pub cpu_pre_us: Option<f64>,
    #[serde(default)]
    pub transfer_in_us: Option<f64>,
    #[serde(default)]
    pub compute_us: Option<f64>,
    #[serde(default)]
    pub transfer_out_us: Option<f64>,
    #[serde(default)]
    pub cpu_post_us: Option<f64>,
}

impl StageProfile {
    /// Splits `per_iteration` across the stages by percentage.
    pub fn from_percentages(per_iteration: Duration, pct: [f64; 5]) -> Self {
        let us = per_iteration.as_secs_f64() * 1e6;
        let at = |i: usize| Some(us * pct[i] / 100.0);
        Self {
            cpu_pre_us: at(0),
            transfer_in_us: at(1),
            compute_us: at(2),
            transfer_out_us: at(3),
            cpu_post_us: at(4),
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.cpu_pre_us,
            self.transfer_in_us,
            self.compute_us,
            self.transfer_out_us,
            self.cpu_post_us,
        ];
        if all.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidPipelineConfig(
                "profile durations must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

fn micros(us: Option<f64>) -> Option<Duration> {
    us.map(|v| Duration::from_secs_f64(v / 1e6))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Iterations to run (the "number of streams" axis).
    pub num_iterations: usize,
    /// Pixels per slice, used when the engine's source is generated.
    pub chunk_pixels: usize,
    /// Slices handled by one kernel invocation.
    pub batch_size: usize,
    /// Moving-window length in chunks.
    pub window: usize,
    pub recompute_pattern_every: usize,
    /// Bytes per second of the synthetic host-to-device transfer; 0 disables it.
    pub bandwidth_in: f64,
    /// Bytes per second of the synthetic device-to-host transfer; 0 disables it.
    pub bandwidth_out: f64,
    pub total_slots: usize,
    pub cap: usize,
    pub workers: WorkerGroupConfig,
    pub profile: Option<StageProfile>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            num_iterations: 16,
            chunk_pixels: 1 << 16,
            batch_size: 1,
            window: DEFAULT_WINDOW,
            recompute_pattern_every: 1,
            bandwidth_in: 0.0,
            bandwidth_out: 0.0,
            total_slots: DEFAULT_TOTAL_SLOTS,
            cap: DEFAULT_CAP,
            workers: WorkerGroupConfig::default(),
            profile: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m| Err(Error::InvalidPipelineConfig(m));
        if self.num_iterations == 0 {
            return bad("num_iterations must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.window == 0 {
            return bad("window size must be at least 1");
        }
        if self.recompute_pattern_every == 0 {
            return bad("recompute_pattern_every must be at least 1");
        }
        if !(self.bandwidth_in >= 0.0 && self.bandwidth_out >= 0.0) {
            return bad("bandwidths must be non-negative");
        }
        if let Some(p) = &self.profile {
            p.validate()?;
        }
        self.workers.validate()
    }

    fn target(&self, stage: Stage, bytes: usize) -> Option<Duration> {
        let p = self.profile.unwrap_or_default();
        let from_bw = |bw: f64| (bw > 0.0).then(|| Duration::from_secs_f64(bytes as f64 / bw));
        match stage {
            Stage::CpuPre => micros(p.cpu_pre_us),
            Stage::TransferIn => micros(p.transfer_in_us).or_else(|| from_bw(self.bandwidth_in)),
            Stage::Compute => micros(p.compute_us),
            Stage::TransferOut => micros(p.transfer_out_us).or_else(|| from_bw(self.bandwidth_out)),
            Stage::CpuPost => micros(p.cpu_post_us),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stage {
    CpuPre,
    TransferIn,
    Compute,
    TransferOut,
    CpuPost,
}

pub const STAGE_NAMES: [&str; 5] = [
    "cpu_pre",
    "transfer_in",
    "compute",
    "transfer_out",
    "cpu_post",
];

/// Stage durations of one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageTiming {
    pub iteration: usize,
    pub cpu_pre: Duration,
    pub transfer_in: Duration,
    pub compute: Duration,
    pub transfer_out: Duration,
    pub cpu_post: Duration,
    pub kernel: KernelKind,
}

impl StageTiming {
    pub fn stages(&self) -> [Duration; 5] {
        [
            self.cpu_pre,
            self.transfer_in,
            self.compute,
            self.transfer_out,
            self.cpu_post,
        ]
    }

    pub fn total(&self) -> Duration {
        self.stages().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub iterations: Vec<StageTiming>,
    /// Sum of every stage duration over every iteration.
    pub total_sequential: Duration,
    /// Wall time of the run.
    pub total_pipelined: Duration,
    /// Staging-buffer writes that found the previous reader still active.
    pub buffer_violations: u64,
}

impl PipelineReport {
    pub(crate) fn new(iterations: Vec<StageTiming>, wall: Duration, violations: u64) -> Self {
        let total_sequential = iterations.iter().map(StageTiming::total).sum();
        Self {
            iterations,
            total_sequential,
            total_pipelined: wall,
            buffer_violations: violations,
        }
    }

    /// Pipelined time over sequential time.
    pub fn ratio(&self) -> f64 {
        let seq = self.total_sequential.as_secs_f64();
        if seq == 0.0 {
            1.0
        } else {
            self.total_pipelined.as_secs_f64() / seq
        }
    }

    pub fn pipelined_pct(&self) -> f64 {
        100.0 * self.ratio()
    }

    /// Per-stage durations summed over all iterations.
    pub fn stage_totals(&self) -> [Duration; 5] {
        let mut out = [Duration::ZERO; 5];
        for it in &self.iterations {
            for (o, d) in out.iter_mut().zip(it.stages()) {
                *o += d;
            }
        }
        out
    }

    /// Per-stage totals as percentages of the sequential total.
    pub fn stage_percentages(&self) -> [f64; 5] {
        let seq = self.total_sequential.as_secs_f64();
        self.stage_totals().map(|d| {
            if seq == 0.0 {
                0.0
            } else {
                100.0 * d.as_secs_f64() / seq
            }
        })
    }

    /// Per-iteration rows followed by a blank line and the summary row.
    pub fn to_csv(&self) -> String {
        let us = |d: Duration| d.as_secs_f64() * 1e6;
        let mut out = String::from(
            "iteration,cpu_pre_us,transfer_in_us,compute_us,transfer_out_us,cpu_post_us,kernel_kind\n",
        );
        for it in &self.iterations {
            let _ = writeln!(
                out,
                "{},{:.3},{:.3},{:.3},{:.3},{:.3},{}",
                it.iteration,
                us(it.cpu_pre),
                us(it.transfer_in),
                us(it.compute),
                us(it.transfer_out),
                us(it.cpu_post),
                it.kernel
            );
        }
        out.push('\n');
        out.push_str("total_sequential_us,total_pipelined_us,pipelined_pct\n");
        let _ = writeln!(
            out,
            "{:.3},{:.3},{:.3}",
            us(self.total_sequential),
            us(self.total_pipelined),
            self.pipelined_pct()
        );
        out
    }

    /// Stage percentages in the layout of a timing-breakdown table.
    pub fn percentage_csv(&self, label: &str) -> String {
        let p = self.stage_percentages();
        format!(
            "label,cpu_pre_pct,transfer_in_pct,compute_pct,transfer_out_pct,cpu_post_pct,sequential_pct,pipelined_pct\n\
             {label},{:.2},{:.2},{:.2},{:.2},{:.2},100,{:.2}\n",
            p[0],
            p[1],
            p[2],
            p[3],
            p[4],
            self.pipelined_pct()
        )
    }
}
