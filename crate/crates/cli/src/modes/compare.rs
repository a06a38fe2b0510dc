use std::fmt::Write as _;
use std::time::{Duration, Instant};

use adhist::datagen::{SourceKind, SourceSpec};
use adhist::kernels::{
    adaptive_histogram, naive_histogram, reference_histogram, throughput, KernelKind,
};
use adhist::pattern::{compute_binning_pattern, BinningPattern};
use adhist::{Histogram256, PackedChunk};
use anyhow::{ensure, Result};

use super::{chunk_and_prior, ModeOutput};
use crate::config::RunConfig;
use crate::harness::{expect_greater, median, Check, Ordering};

/// The five input distributions, labelled as in the CSV.
pub const DISTRIBUTIONS: [(&str, fn() -> SourceKind); 5] = [
    ("random", || SourceKind::UniformRandom),
    ("sequential", || SourceKind::Sequential),
    ("constant-127", || SourceKind::Constant(127)),
    ("constant-1", || SourceKind::Constant(1)),
    ("normal-xray-standin", SourceKind::xray_standin),
];

/// Naive vs adaptive on every distribution.
///
/// CSV: `distribution,kernel,throughput,end_to_end,flag`. `throughput` is
/// kernel-only; `end_to_end` also covers pattern training, staging the input
/// and copying the histogram out. `flag` is the noise-guarded ordering for the
/// two rows with an expected winner and `-` elsewhere.
pub fn run_compare(cfg: &RunConfig) -> Result<ModeOutput> {
    let mut csv = String::from("distribution,kernel,throughput,end_to_end,flag\n");
    let mut checks = Vec::new();
    let mut pattern_out = None;

    for (label, kind) in DISTRIBUTIONS {
        let spec = SourceSpec::new(kind(), cfg.seed, cfg.pixels);
        let (chunk, prior) = chunk_and_prior(&spec)?;
        let prior_hist = reference_histogram(&prior);
        let pattern = compute_binning_pattern(&prior_hist, cfg.slots, cfg.cap)?;

        let expected = reference_histogram(&chunk);
        ensure!(
            naive_histogram(&chunk, &cfg.workers)? == expected,
            "{label}: naive kernel disagrees with the reference histogram"
        );
        ensure!(
            adaptive_histogram(&chunk, &pattern, &cfg.workers)? == expected,
            "{label}: adaptive kernel disagrees with the reference histogram"
        );

        let mut kernel = [Vec::new(), Vec::new()];
        let mut e2e = [Vec::new(), Vec::new()];
        for _ in 0..cfg.repetitions {
            for (k, which) in [KernelKind::Naive, KernelKind::Adaptive]
                .into_iter()
                .enumerate()
            {
                let (kt, et) = time_once(&chunk, &prior_hist, which, cfg)?;
                kernel[k].push(kt);
                e2e[k].push(et);
            }
        }
        let bytes = chunk.byte_len();
        let tp = kernel.map(|s| throughput(bytes, median(s)));
        let etp = e2e.map(|s| throughput(bytes, median(s)));

        let flag = match label {
            "constant-127" => {
                let ord = expect_greater(tp[1], tp[0]);
                checks.push(Check::ordering(
                    "constant-127: adaptive > naive",
                    ord,
                    format!("adaptive {:.3e} vs naive {:.3e} B/s", tp[1], tp[0]),
                ));
                Some(ord)
            }
            "random" => {
                let ord = expect_greater(tp[0], tp[1]);
                checks.push(Check::ordering(
                    "random: naive >= adaptive",
                    ord,
                    format!("naive {:.3e} vs adaptive {:.3e} B/s", tp[0], tp[1]),
                ));
                Some(ord)
            }
            _ => None,
        };
        let flag = flag.map_or("-", Ordering::as_str);
        for (k, name) in ["naive", "adaptive"].into_iter().enumerate() {
            writeln!(csv, "{label},{name},{:.0},{:.0},{flag}", tp[k], etp[k])?;
        }
        if label == "normal-xray-standin" {
            pattern_out = Some(pattern);
        }
    }
    Ok(ModeOutput {
        csv,
        checks,
        pattern: pattern_out,
    })
}

/// One timed run: (kernel-only, end-to-end).
fn time_once(
    chunk: &PackedChunk,
    prior: &Histogram256,
    kernel: KernelKind,
    cfg: &RunConfig,
) -> Result<(Duration, Duration)> {
    let start = Instant::now();
    let pattern: Option<BinningPattern> = match kernel {
        KernelKind::Naive => None,
        _ => Some(compute_binning_pattern(prior, cfg.slots, cfg.cap)?),
    };
    let staged = chunk.clone();
    let t = Instant::now();
    let h = match &pattern {
        None => naive_histogram(&staged, &cfg.workers)?,
        Some(p) => adaptive_histogram(&staged, p, &cfg.workers)?,
    };
    let kernel_time = t.elapsed();
    let out = std::hint::black_box(h.clone());
    drop(out);
    Ok((kernel_time, start.elapsed()))
}
