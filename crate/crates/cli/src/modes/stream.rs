use std::fmt::Write as _;

use adhist::pattern::compute_binning_pattern;
use anyhow::Result;

use super::pipeline::{run_both, state_checks, verify_slices};
use super::ModeOutput;
use crate::config::RunConfig;
use crate::harness::Check;

/// Accumulator/window divergence expected right after a kernel-flipping change.
pub const DIVERGENCE_FLOOR: f64 = 0.4;

/// End-to-end stream with live switching.
///
/// CSV: `iteration,source,kernel,degeneracy,divergence`, where `degeneracy`
/// and `divergence` describe the state after the iteration.
pub fn run_stream(cfg: &RunConfig) -> Result<ModeOutput> {
    let (seq, pip) = run_both(cfg)?;
    verify_slices(cfg, &pip)?;
    let schedule = cfg.stream_schedule();

    let mut csv = String::from("iteration,source,kernel,degeneracy,divergence\n");
    for i in 0..pip.kernel_log.len() {
        let src = schedule
            .kind_at(i)
            .map(ToString::to_string)
            .unwrap_or_default();
        writeln!(
            csv,
            "{i},{src},{},{:.6},{:.6}",
            pip.kernel_log[i], pip.degeneracy_log[i].max_bin_fraction, pip.divergence_log[i]
        )?;
    }

    let mut checks = state_checks(&seq, &pip);
    let log = &pip.kernel_log;
    let r = cfg.recompute_every;
    let settle = cfg.window + r;
    let mut start = 0;
    for (k, (len, kind)) in schedule.segments().iter().enumerate() {
        let end = (start + len).min(log.len());
        if end <= start {
            break;
        }
        let steady = log[end - 1];
        if k > 0 && start > 0 && log[start - 1] != steady {
            let flip = (start..end).find(|&t| log[t] == steady).unwrap_or(end);
            checks.push(Check::pass_if(
                format!("switch to {steady} after iteration {start}"),
                flip - start <= r + 1,
                format!(
                    "flipped at {flip}, {} iteration(s) after the change (limit {})",
                    flip - start,
                    r + 1
                ),
            ));
            checks.push(Check::pass_if(
                format!("no flapping after the switch at {start}"),
                log[flip..end].iter().all(|&x| x == steady),
                format!("kernel log over {flip}..{end}"),
            ));
            let peak = pip.divergence_log[start..(start + settle + 1).min(end)]
                .iter()
                .copied()
                .fold(0.0, f64::max);
            checks.push(Check::pass_if(
                format!("divergence spike at {start}"),
                peak > DIVERGENCE_FLOOR,
                format!("peak {peak:.3} (floor {DIVERGENCE_FLOOR})"),
            ));
        } else if start + settle < end {
            checks.push(Check::pass_if(
                format!("steady kernel on {kind}"),
                log[start + settle..end].iter().all(|&x| x == steady),
                format!("kernel log over {}..{end}", start + settle),
            ));
        }
        start = end;
    }
    let pattern = compute_binning_pattern(pip.window.windowed(), cfg.slots, cfg.cap)?;
    Ok(ModeOutput {
        csv,
        checks,
        pattern: Some(pattern),
    })
}
