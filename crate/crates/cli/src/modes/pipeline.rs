use adhist::kernels::reference_histogram;
use adhist::pattern::compute_binning_pattern;
use adhist::stream::{run_pipeline, run_sequential, ScheduledSource, StreamOutcome};
use anyhow::{ensure, Result};

use super::ModeOutput;
use crate::config::RunConfig;
use crate::harness::Check;

/// Allowance for thread handoff when comparing wall time with the stage sum.
pub const SCHEDULER_SLACK: f64 = 0.01;

fn source(cfg: &RunConfig) -> Result<ScheduledSource> {
    Ok(ScheduledSource::new(
        cfg.stream_schedule(),
        cfg.seed,
        cfg.pixels,
        cfg.batch,
    )?)
}

/// Runs the stream sequentially and then pipelined on the same input.
pub fn run_both(cfg: &RunConfig) -> Result<(StreamOutcome, StreamOutcome)> {
    let pc = cfg.pipeline_config();
    let seq = run_sequential(source(cfg)?, &pc, &cfg.policy)?;
    let pip = run_pipeline(source(cfg)?, &pc, &cfg.policy)?;
    Ok((seq, pip))
}

/// Checks every slice histogram against the reference computed from a fresh
/// copy of the source.
pub(crate) fn verify_slices(cfg: &RunConfig, outcome: &StreamOutcome) -> Result<()> {
    let chunks = source(cfg)?.take(cfg.iterations).flatten();
    let mut n = 0;
    for (h, chunk) in outcome.slice_histograms.iter().zip(chunks) {
        ensure!(
            *h == reference_histogram(&chunk),
            "slice {n} disagrees with the reference histogram"
        );
        n += 1;
    }
    ensure!(n == outcome.slice_histograms.len(), "slice count mismatch");
    Ok(())
}

pub(crate) fn state_checks(seq: &StreamOutcome, pip: &StreamOutcome) -> Vec<Check> {
    vec![
        Check::pass_if(
            "pipelined state equals sequential",
            seq.same_state(pip),
            "accumulator, window, slice histograms, kernel log",
        ),
        Check::pass_if(
            "double-buffer safety",
            pip.report.buffer_violations == 0 && seq.report.buffer_violations == 0,
            format!("{} violation(s)", pip.report.buffer_violations),
        ),
    ]
}

/// CSV: the pipelined run's per-iteration report and summary, a blank line,
/// then the stage-percentage table for both runs.
pub fn run_pipeline_mode(cfg: &RunConfig) -> Result<ModeOutput> {
    let (seq, pip) = run_both(cfg)?;
    verify_slices(cfg, &pip)?;

    let mut csv = pip.report.to_csv();
    csv.push('\n');
    csv.push_str(&seq.report.percentage_csv("sequential"));
    let pct = pip.report.percentage_csv("pipelined");
    csv.push_str(pct.lines().nth(1).unwrap_or_default());
    csv.push('\n');

    let mut checks = state_checks(&seq, &pip);
    let ratio = pip.report.ratio();
    checks.push(Check::pass_if(
        "pipelined <= sequential",
        ratio <= 1.0 + SCHEDULER_SLACK,
        format!("ratio {ratio:.4}"),
    ));
    let pattern = compute_binning_pattern(pip.window.windowed(), cfg.slots, cfg.cap)?;
    Ok(ModeOutput {
        csv,
        checks,
        pattern: Some(pattern),
    })
}
