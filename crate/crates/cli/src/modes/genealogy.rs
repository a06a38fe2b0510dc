use std::fmt::Write as _;
use std::time::Duration;

use adhist::kernels::{reference_histogram, run_ablation, throughput, GENEALOGY};
use anyhow::{ensure, Result};

use super::{chunk_and_prior, train, ModeOutput};
use crate::config::RunConfig;
use crate::harness::{expect_greater_by, median, Check, Ordering, NOISE_GUARD};

/// Below this size timer noise dominates and orderings get a wider guard.
const SMALL_CHUNK_PIXELS: usize = 1 << 20;
const SMALL_CHUNK_GUARD: f64 = 2.0;

/// Times the five cumulative stages. CSV: `stage,throughput_bytes_per_sec`.
pub fn run_genealogy(cfg: &RunConfig) -> Result<ModeOutput> {
    let (chunk, prior) = chunk_and_prior(&cfg.source_spec())?;
    let pattern = train(&prior, cfg)?;

    let full = run_ablation(&chunk, GENEALOGY[4], &pattern, &cfg.workers)?;
    ensure!(
        full.histogram.as_ref() == Some(&reference_histogram(&chunk)),
        "full kernel disagrees with the reference histogram"
    );

    // One untimed warm-up round.
    for variant in GENEALOGY {
        run_ablation(&chunk, variant, &pattern, &cfg.workers)?;
    }
    let mut samples: Vec<Vec<Duration>> = vec![Vec::new(); GENEALOGY.len()];
    // Rotate the starting variant each round so no stage always runs first.
    for rep in 0..cfg.repetitions {
        for i in 0..GENEALOGY.len() {
            let k = (i + rep) % GENEALOGY.len();
            samples[k].push(run_ablation(&chunk, GENEALOGY[k], &pattern, &cfg.workers)?.elapsed);
        }
    }
    let tps: Vec<f64> = samples
        .into_iter()
        .map(|s| throughput(chunk.byte_len(), median(s)))
        .collect();

    let mut csv = String::from("stage,throughput_bytes_per_sec\n");
    for (variant, tp) in GENEALOGY.iter().zip(&tps) {
        writeln!(csv, "{variant},{tp:.0}")?;
    }

    let guard = if chunk.pixel_count() < SMALL_CHUNK_PIXELS {
        SMALL_CHUNK_GUARD
    } else {
        NOISE_GUARD
    };
    let checks = GENEALOGY
        .windows(2)
        .zip(tps.windows(2))
        .map(|(v, t)| {
            // Non-increasing: only a later stage beating an earlier one fails.
            let ord = expect_greater_by(t[0], t[1], guard);
            Check::pass_if(
                format!("{} >= {}", v[0], v[1]),
                ord != Ordering::Inverted,
                format!("{:.3e} vs {:.3e} B/s ({ord})", t[0], t[1]),
            )
        })
        .collect();
    Ok(ModeOutput {
        csv,
        checks,
        pattern: Some(pattern),
    })
}
