use std::fmt::Write as _;
use std::time::Instant;

use adhist::datagen::{generate, SourceKind, SourceSpec};
use adhist::kernels::{
    adaptive_histogram, naive_histogram, reference_histogram, throughput, KernelKind,
};
use adhist::pattern::{compute_binning_pattern, BinningPattern};
use adhist::policy::{degeneracy, select_kernel};
use adhist::BINS;
use anyhow::{ensure, Result};

use super::{chunk_and_prior, train, ModeOutput};
use crate::config::RunConfig;
use crate::harness::{expect_greater, median, spearman, Check, Ordering, Status};

pub const SWEEP_STEPS: usize = 10;
const SPEARMAN_FLOOR: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    /// Mixture degeneracy in [0, 1].
    pub degeneracy: f64,
    pub naive_tp: f64,
    pub adaptive_tp: f64,
    pub selected: KernelKind,
}

impl SweepPoint {
    pub fn advantage(&self) -> f64 {
        self.adaptive_tp - self.naive_tp
    }
}

/// Value the sweep concentrates on: the bin with the most sub-bins in the
/// pattern trained on `--source`, ties going to the larger prior count.
pub fn sweep_value(cfg: &RunConfig) -> Result<(u8, BinningPattern)> {
    let (_, prior) = chunk_and_prior(&cfg.source_spec())?;
    let pattern = train(&prior, cfg)?;
    let hist = reference_histogram(&prior);
    let best = (0..BINS)
        .max_by_key(|&b| (pattern.count(b), hist.counts()[b], std::cmp::Reverse(b)))
        .expect("256 bins");
    Ok((best as u8, pattern))
}

/// Times both kernels on mixtures of degeneracy 0%, 10%, ..., 100%.
pub fn measure_sweep(cfg: &RunConfig, value: u8) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::with_capacity(SWEEP_STEPS + 1);
    for step in 0..=SWEEP_STEPS {
        let d = step as f64 / SWEEP_STEPS as f64;
        let spec = SourceSpec::new(
            SourceKind::Mixture {
                degeneracy: d,
                value,
            },
            cfg.seed,
            cfg.pixels,
        );
        let chunk = generate(&spec.for_chunk(0))?;
        let prior = generate(&spec.for_chunk(1))?;
        let pattern = compute_binning_pattern(&reference_histogram(&prior), cfg.slots, cfg.cap)?;
        let expected = reference_histogram(&chunk);
        ensure!(
            naive_histogram(&chunk, &cfg.workers)? == expected
                && adaptive_histogram(&chunk, &pattern, &cfg.workers)? == expected,
            "kernel disagrees with the reference histogram at degeneracy {d}"
        );

        let (mut naive, mut adaptive) = (Vec::new(), Vec::new());
        for _ in 0..cfg.repetitions {
            let t = Instant::now();
            std::hint::black_box(naive_histogram(&chunk, &cfg.workers)?);
            naive.push(t.elapsed());
            let t = Instant::now();
            std::hint::black_box(adaptive_histogram(&chunk, &pattern, &cfg.workers)?);
            adaptive.push(t.elapsed());
        }
        points.push(SweepPoint {
            degeneracy: d,
            naive_tp: throughput(chunk.byte_len(), median(naive)),
            adaptive_tp: throughput(chunk.byte_len(), median(adaptive)),
            selected: select_kernel(&degeneracy(&expected), &cfg.policy),
        });
    }
    Ok(points)
}

/// First degeneracy at which adaptive is at least as fast as naive.
pub fn crossover(points: &[SweepPoint]) -> Option<f64> {
    points
        .iter()
        .find(|p| p.adaptive_tp >= p.naive_tp)
        .map(|p| p.degeneracy)
}

/// CSV: `degeneracy,naive_tp,adaptive_tp,selected_kernel`, a blank line, then
/// `value,crossover_degeneracy,spearman`.
pub fn run_sweep(cfg: &RunConfig) -> Result<ModeOutput> {
    let (value, pattern) = sweep_value(cfg)?;
    let points = measure_sweep(cfg, value)?;

    let mut csv = String::from("degeneracy,naive_tp,adaptive_tp,selected_kernel\n");
    for p in &points {
        writeln!(
            csv,
            "{:.1},{:.0},{:.0},{}",
            p.degeneracy, p.naive_tp, p.adaptive_tp, p.selected
        )?;
    }
    let ds: Vec<f64> = points.iter().map(|p| p.degeneracy).collect();
    let adv: Vec<f64> = points.iter().map(SweepPoint::advantage).collect();
    let rho = spearman(&ds, &adv);
    let cross = crossover(&points);
    writeln!(
        csv,
        "\nvalue,crossover_degeneracy,spearman\n{value},{},{rho:.4}",
        cross.map_or("none".to_string(), |c| format!("{c:.1}"))
    )?;

    let mut checks = vec![Check::pass_if(
        "advantage rises with degeneracy",
        rho >= SPEARMAN_FLOOR,
        format!("spearman {rho:.3} (floor {SPEARMAN_FLOOR})"),
    )];
    let (first, last) = (points[0], points[SWEEP_STEPS]);
    let ends = (
        expect_greater(first.naive_tp, first.adaptive_tp),
        expect_greater(last.adaptive_tp, last.naive_tp),
    );
    checks.push(if ends == (Ordering::Holds, Ordering::Holds) {
        Check::pass_if(
            "crossover inside (0, 100)%",
            cross.is_some_and(|c| c > 0.0 && c < 1.0),
            format!("crossover at {cross:?}"),
        )
    } else {
        Check::new(
            "crossover inside (0, 100)%",
            Status::Inconclusive,
            format!(
                "endpoints do not separate: d=0 {}, d=100 {}",
                ends.0, ends.1
            ),
        )
    });
    checks.push(Check::pass_if(
        "uniform input selects naive",
        first.selected == KernelKind::Naive,
        format!("selected {}", first.selected),
    ));
    Ok(ModeOutput {
        csv,
        checks,
        pattern: Some(pattern),
    })
}
