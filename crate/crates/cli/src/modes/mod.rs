//! One module per experiment. Each returns its CSV text and the self-checks
//! it ran; the binary decides what to do with failures.

mod compare;
mod genealogy;
mod pipeline;
mod stream;
mod sweep;

use adhist::datagen::{generate, SourceSpec};
use adhist::kernels::reference_histogram;
use adhist::pattern::{compute_binning_pattern, BinningPattern};
use adhist::PackedChunk;
use anyhow::Result;

use crate::config::{Mode, RunConfig};
use crate::harness::Check;

pub use compare::{run_compare, DISTRIBUTIONS};
pub use genealogy::run_genealogy;
pub use pipeline::{run_both, run_pipeline_mode, SCHEDULER_SLACK};
pub use stream::{run_stream, DIVERGENCE_FLOOR};
pub use sweep::{crossover, measure_sweep, run_sweep, sweep_value, SweepPoint, SWEEP_STEPS};

#[derive(Debug, Clone)]
pub struct ModeOutput {
    pub csv: String,
    pub checks: Vec<Check>,
    /// Pattern the mode trained, for `--pattern-dump`.
    pub pattern: Option<BinningPattern>,
}

impl ModeOutput {
    pub fn failed(&self) -> bool {
        self.checks.iter().any(Check::failed)
    }
}

pub fn run(cfg: &RunConfig) -> Result<ModeOutput> {
    match cfg.mode {
        Mode::Genealogy => run_genealogy(cfg),
        Mode::Compare => run_compare(cfg),
        Mode::Sweep => run_sweep(cfg),
        Mode::Pipeline => run_pipeline_mode(cfg),
        Mode::Stream => run_stream(cfg),
    }
}

/// The measured chunk and a held-out chunk of the same distribution.
pub(crate) fn chunk_and_prior(spec: &SourceSpec) -> Result<(PackedChunk, PackedChunk)> {
    Ok((generate(&spec.for_chunk(0))?, generate(&spec.for_chunk(1))?))
}

/// Pattern learned from the histogram of `prior`.
pub(crate) fn train(prior: &PackedChunk, cfg: &RunConfig) -> Result<BinningPattern> {
    Ok(compute_binning_pattern(
        &reference_histogram(prior),
        cfg.slots,
        cfg.cap,
    )?)
}
