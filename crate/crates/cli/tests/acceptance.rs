//! Acceptance suite. Runs every criterion in order, prints one line per
//! criterion and exits non-zero if any failed.
//!
//! Timing criteria run one at a time on purpose, so this target uses its own
//! `main` instead of the parallel libtest harness.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use adhist::datagen::{generate, SourceKind, SourceSpec};
use adhist::kernels::{
    adaptive_histogram, batch_histograms, naive_histogram, reference_histogram, KernelKind,
    WorkerGroupConfig,
};
use adhist::pattern::{compute_binning_pattern, ideal_floors, validate_pattern};
use adhist::policy::{degeneracy, SwitchPolicy};
use adhist::stream::{
    run_pipeline, run_sequential, PipelineConfig, ScheduledSource, StageProfile, WindowState,
};
use adhist::{Histogram256, BINS};
use adhist_cli::config::{Args, FileConfig, RunConfig};
use adhist_cli::harness::{expect_greater, spearman, Ordering};
use adhist_cli::modes::{self, SweepPoint, SCHEDULER_SLACK};
use clap::Parser;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// When set, the process only writes a generated chunk to this path.
const CHILD_ENV: &str = "ADHIST_ACCEPTANCE_CHILD_OUT";
const BIG: usize = 16 * 1024 * 1024;

type Outcome = Result<String, String>;

fn main() -> ExitCode {
    if let Ok(path) = std::env::var(CHILD_ENV) {
        std::fs::write(path, chunk_bytes(reproducible_chunk().unwrap())).expect("child write");
        return ExitCode::SUCCESS;
    }

    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("oracle equivalence", oracle_equivalence),
        ("pattern invariants", pattern_invariants),
        ("genealogy ordering", genealogy_ordering),
        ("naive/adaptive orderings", compare_orderings),
        ("degeneracy crossover", sweep_crossover),
        ("pipeline arithmetic", pipeline_arithmetic),
        ("overlap trend", overlap_trend),
        ("moving-window exactness", window_exactness),
        ("pipelined/sequential equality", state_equality),
        ("switching behavior", switching_behavior),
        ("generator reproducibility", generator_reproducibility),
    ];

    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({secs:.1}s) {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({secs:.1}s) {detail}", n + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cli(args: &[&str]) -> RunConfig {
    let argv = std::iter::once("adhist").chain(args.iter().copied());
    RunConfig::resolve(Args::parse_from(argv), FileConfig::default()).expect("valid config")
}

fn random_kind(rng: &mut StdRng) -> SourceKind {
    match rng.gen_range(0..5) {
        0 => SourceKind::UniformRandom,
        1 => SourceKind::Sequential,
        2 => SourceKind::Constant(rng.gen()),
        3 => SourceKind::xray_standin(),
        _ => SourceKind::Mixture {
            degeneracy: rng.gen(),
            value: rng.gen(),
        },
    }
}

fn random_prior(rng: &mut StdRng) -> Histogram256 {
    let mut counts = [0u64; BINS];
    match rng.gen_range(0..4) {
        0 => {}
        1 => counts[rng.gen_range(0..BINS)] = rng.gen_range(1..1 << 40),
        2 => counts.iter_mut().for_each(|c| *c = rng.gen_range(0..1000)),
        _ => {
            for _ in 0..rng.gen_range(1..20) {
                counts[rng.gen_range(0..BINS)] = rng.gen_range(0..u64::MAX / 1024);
            }
        }
    }
    Histogram256::from_counts(counts)
}

fn oracle_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let mut pixels_total = 0usize;
    for trial in 0..1000 {
        // Log-uniform size between 1 and 2^18 words (4 to 2^20 pixels).
        let words = (2f64.powf(rng.gen_range(0.0..=18.0)) as usize).clamp(1, 1 << 18);
        let spec = SourceSpec::new(random_kind(&mut rng), rng.gen(), words * 4);
        let chunk = generate(&spec).map_err(|e| e.to_string())?;
        let slots = rng.gen_range(BINS..=2048);
        let pattern = compute_binning_pattern(&random_prior(&mut rng), slots, 8)
            .map_err(|e| e.to_string())?;
        let mut cfg = WorkerGroupConfig::new(rng.gen_range(1..=64), rng.gen_range(1..=8));
        cfg.parallel = rng.gen();

        let expected = reference_histogram(&chunk);
        let naive = naive_histogram(&chunk, &cfg).map_err(|e| e.to_string())?;
        let adaptive = adaptive_histogram(&chunk, &pattern, &cfg).map_err(|e| e.to_string())?;
        let kernel = if rng.gen() {
            KernelKind::Naive
        } else {
            KernelKind::Adaptive
        };
        let batch = batch_histograms(&[chunk.clone()], kernel, &pattern, &cfg)
            .map_err(|e| e.to_string())?;
        ensure(
            naive == expected && adaptive == expected && batch[0] == expected,
            || {
                format!(
                    "trial {trial}: mismatch ({} pixels, {cfg:?}, S={slots})",
                    chunk.pixel_count()
                )
            },
        )?;
        pixels_total += chunk.pixel_count();
    }
    Ok(format!("1000 triples, {pixels_total} pixels, exact"))
}

fn pattern_invariants() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    for trial in 0..10_000 {
        let prior = random_prior(&mut rng);
        let cap = rng.gen_range(1..=16usize);
        let slots = rng.gen_range(BINS..=(cap * BINS).min(4096));
        let p = compute_binning_pattern(&prior, slots, cap).map_err(|e| e.to_string())?;
        let fail = |what: &str| format!("trial {trial} (S={slots}, cap={cap}): {what}");
        validate_pattern(&p).map_err(|e| fail(&e.to_string()))?;
        ensure(
            p.counts().iter().map(|&c| c as usize).sum::<usize>() == slots,
            || fail("sum"),
        )?;
        ensure(
            p.counts().iter().all(|&c| c >= 1 && c as usize <= cap),
            || fail("range"),
        )?;
        let mut next = 0;
        for b in 0..BINS {
            ensure(p.offset(b) == next, || fail("offsets"))?;
            next += p.count(b);
        }
        // Floor-monotonicity: walking bins by descending prior, floors never rise.
        let floors = ideal_floors(&prior, slots);
        let mut order: Vec<usize> = (0..BINS).collect();
        order.sort_by_key(|&b| std::cmp::Reverse(prior.counts()[b]));
        ensure(
            order.windows(2).all(|w| floors[w[0]] >= floors[w[1]]),
            || fail("floor order"),
        )?;
        ensure(
            (0..BINS).all(|b| p.count(b) as u64 >= (1 + floors[b]).min(cap as u64)),
            || fail("count below capped floor"),
        )?;
        let again = compute_binning_pattern(&prior, slots, cap).map_err(|e| e.to_string())?;
        ensure(again == p, || fail("not deterministic"))?;
    }
    Ok("10000 priors".into())
}

fn genealogy_ordering() -> Outcome {
    let pixels = BIG.to_string();
    let out = modes::run_genealogy(&cli(&[
        "--mode",
        "genealogy",
        "--pixels",
        &pixels,
        "--repetitions",
        "15",
    ]))
    .map_err(|e| e.to_string())?;
    let summary = out.csv.lines().skip(1).collect::<Vec<_>>().join(" ");
    ensure(!out.failed(), || {
        let bad: Vec<_> = out
            .checks
            .iter()
            .filter(|c| c.failed())
            .map(ToString::to_string)
            .collect();
        format!("{} | {summary}", bad.join("; "))
    })?;
    Ok(summary)
}

fn compare_orderings() -> Outcome {
    let pixels = BIG.to_string();
    let out = modes::run_compare(&cli(&[
        "--mode",
        "compare",
        "--pixels",
        &pixels,
        "--repetitions",
        "5",
    ]))
    .map_err(|e| e.to_string())?;
    let detail: Vec<String> = out.checks.iter().map(ToString::to_string).collect();
    ensure(!out.failed(), || detail.join("; "))?;
    Ok(detail.join("; "))
}

fn sweep_crossover() -> Outcome {
    let pixels = BIG.to_string();
    let cfg = cli(&["--mode", "sweep", "--pixels", &pixels, "--repetitions", "5"]);
    let (value, _) = modes::sweep_value(&cfg).map_err(|e| e.to_string())?;
    let points = modes::measure_sweep(&cfg, value).map_err(|e| e.to_string())?;
    let ds: Vec<f64> = points.iter().map(|p| p.degeneracy).collect();
    let adv: Vec<f64> = points.iter().map(SweepPoint::advantage).collect();
    let rho = spearman(&ds, &adv);
    let cross = modes::crossover(&points);
    let series: Vec<String> = points
        .iter()
        .map(|p| format!("{:+.2e}", p.advantage()))
        .collect();
    let detail = format!(
        "v={value} spearman={rho:.3} crossover={cross:?} advantage=[{}]",
        series.join(" ")
    );
    ensure(rho >= 0.8, || format!("spearman below 0.8: {detail}"))?;
    let (first, last) = (points[0], points[points.len() - 1]);
    let separated = expect_greater(first.naive_tp, first.adaptive_tp) == Ordering::Holds
        && expect_greater(last.adaptive_tp, last.naive_tp) == Ordering::Holds;
    if separated {
        ensure(cross.is_some_and(|c| c > 0.0 && c < 1.0), || {
            format!("no interior crossover: {detail}")
        })?;
    }
    Ok(detail)
}

fn random_profile() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("profiles/random-20ms.json")
}

fn ratio_for(iterations: usize, profile: &Path) -> Result<f64, String> {
    let n = iterations.to_string();
    let cfg = cli(&[
        "--mode",
        "pipeline",
        "--iterations",
        &n,
        "--profile",
        profile.to_str().unwrap(),
    ]);
    let (seq, pip) = modes::run_both(&cfg).map_err(|e| e.to_string())?;
    ensure(seq.same_state(&pip), || {
        format!("state mismatch at {iterations} iterations")
    })?;
    Ok(pip.report.ratio())
}

fn pipeline_arithmetic() -> Outcome {
    let profile = random_profile();
    let r256 = ratio_for(256, &profile)?;
    let r1 = ratio_for(1, &profile)?;
    let detail = format!("ratio(256)={r256:.4} ratio(1)={r1:.4}");
    ensure((0.60..=0.68).contains(&r256) && r1 >= 0.95, || {
        detail.clone()
    })?;
    Ok(detail)
}

fn overlap_trend() -> Outcome {
    // Fixed per-iteration profile of 20 ms.
    let profile = StageProfile {
        cpu_pre_us: Some(4000.0),
        transfer_in_us: Some(3500.0),
        compute_us: Some(12500.0),
        transfer_out_us: Some(0.0),
        cpu_post_us: Some(0.0),
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("profile.json");
    std::fs::write(&path, serde_json::to_string(&profile).unwrap()).map_err(|e| e.to_string())?;
    let mut ratios = Vec::new();
    for n in [1, 4, 16, 64, 256] {
        ratios.push(ratio_for(n, &path)?);
    }
    let detail = format!(
        "ratios {:?}",
        ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>()
    );
    ensure(
        ratios.windows(2).all(|w| w[1] <= w[0] + SCHEDULER_SLACK),
        || format!("not non-increasing: {detail}"),
    )?;
    ensure((0.95..=1.0 + SCHEDULER_SLACK).contains(&ratios[0]), || {
        format!("1-iteration endpoint: {detail}")
    })?;
    ensure((0.60..=0.68).contains(&ratios[4]), || {
        format!("256-iteration endpoint: {detail}")
    })?;
    Ok(detail)
}

fn window_exactness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    for w in [1, 2, 32, 128, 256] {
        let mut state = WindowState::new(w).map_err(|e| e.to_string())?;
        let mut history: Vec<Histogram256> = Vec::with_capacity(1000);
        for step in 0..1000 {
            let spec = SourceSpec::new(random_kind(&mut rng), rng.gen(), 256);
            let h = reference_histogram(&generate(&spec).map_err(|e| e.to_string())?);
            state
                .push(&h)
                .map_err(|e| format!("W={w} step {step}: {e}"))?;
            history.push(h);
            let mut expect = Histogram256::zero();
            for h in &history[history.len().saturating_sub(w)..] {
                expect.merge_from(h).unwrap();
            }
            let recompute = state.recompute().map_err(|e| e.to_string())?;
            ensure(
                state.windowed() == &expect && recompute == expect && state.len() <= w,
                || format!("W={w} step {step}: incremental window differs from recompute"),
            )?;
        }
    }
    Ok("W in {1,2,32,128,256}, 1000 steps each".into())
}

fn state_equality() -> Outcome {
    let policy = SwitchPolicy::default();
    let schedules = [
        "20*uniform,20*constant:127",
        "15*constant:127,15*uniform",
        "10*xray,10*mixture:0.7:3,10*sequential",
        "30*mixture:0.5:127",
    ];
    for scenario in 0..20u64 {
        let sched = schedules[scenario as usize % schedules.len()];
        let batch = 1 + scenario as usize % 3;
        let cfg = PipelineConfig {
            num_iterations: sched
                .parse::<adhist::stream::Schedule>()
                .unwrap()
                .iterations(),
            chunk_pixels: 4096,
            batch_size: batch,
            window: [1, 2, 7, 32][scenario as usize % 4],
            recompute_pattern_every: 1 + scenario as usize % 3,
            ..Default::default()
        };
        let src = || ScheduledSource::new(sched.parse().unwrap(), scenario, 4096, batch).unwrap();
        let seq = run_sequential(src(), &cfg, &policy).map_err(|e| e.to_string())?;
        let pip = run_pipeline(src(), &cfg, &policy).map_err(|e| e.to_string())?;
        ensure(seq.same_state(&pip), || {
            format!("scenario {scenario} ({sched}) differs")
        })?;
        ensure(pip.report.buffer_violations == 0, || {
            format!("scenario {scenario}: buffer reuse")
        })?;
    }
    Ok("20 scenarios identical".into())
}

fn switching_behavior() -> Outcome {
    let mut detail = Vec::new();
    for r in [1usize, 3, 7] {
        let every = r.to_string();
        let cfg = cli(&[
            "--mode",
            "stream",
            "--threshold",
            "0.45",
            "--recompute-every",
            &every,
        ]);
        let (_, pip) = modes::run_both(&cfg).map_err(|e| e.to_string())?;
        let log = &pip.kernel_log;
        ensure(log[..100].iter().all(|&k| k == KernelKind::Naive), || {
            format!("r={r}: adaptive before the change")
        })?;
        let flip = (100..log.len())
            .find(|&t| log[t] == KernelKind::Adaptive)
            .unwrap_or(log.len());
        ensure(flip - 100 <= r + 1, || {
            format!("r={r}: flipped {} iterations after the change", flip - 100)
        })?;
        ensure(
            log[flip..].iter().all(|&k| k == KernelKind::Adaptive),
            || format!("r={r}: flapping"),
        )?;
        let out = modes::run_stream(&cfg).map_err(|e| e.to_string())?;
        ensure(!out.failed(), || {
            format!("r={r}: stream self-checks failed")
        })?;
        detail.push(format!("r={r}: +{}", flip - 100));
    }
    Ok(detail.join(", "))
}

fn reproducible_chunk() -> adhist::Result<adhist::PackedChunk> {
    generate(&SourceSpec::new(
        "mixture:0.3:77".parse()?,
        0xC0FFEE,
        1 << 16,
    ))
}

fn chunk_bytes(chunk: adhist::PackedChunk) -> Vec<u8> {
    chunk
        .into_words()
        .iter()
        .flat_map(|w| w.to_le_bytes())
        .collect()
}

fn child_bytes(path: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(std::env::current_exe().map_err(|e| e.to_string())?)
        .env(CHILD_ENV, path)
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("child exited with {status}"))?;
    std::fs::read(path).map_err(|e| e.to_string())
}

fn generator_reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = child_bytes(&dir.path().join("a.bin"))?;
    let b = child_bytes(&dir.path().join("b.bin"))?;
    let here = chunk_bytes(reproducible_chunk().map_err(|e| e.to_string())?);
    ensure(a == b && a == here, || {
        "chunks differ between processes".into()
    })?;

    let n = 1_000_000usize;
    let spec = SourceSpec::new(
        SourceKind::Mixture {
            degeneracy: 0.5,
            value: 127,
        },
        11,
        n,
    );
    let report = degeneracy(&reference_histogram(
        &generate(&spec).map_err(|e| e.to_string())?,
    ));
    let q = 0.5 + 0.5 / 256.0;
    let sigma = (q * (1.0 - q) / n as f64).sqrt();
    let z = (report.max_bin_fraction - q) / sigma;
    ensure(report.argmax_bin == 127 && z.abs() <= 3.0, || {
        format!(
            "degeneracy {:.6} vs {q:.6} ({z:.2} sigma)",
            report.max_bin_fraction
        )
    })?;
    Ok(format!(
        "two processes byte-identical; mixture degeneracy {:.6} ({z:+.2} sigma)",
        report.max_bin_fraction
    ))
}
