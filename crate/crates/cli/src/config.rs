//! Run configuration: defaults, overlaid by a JSON config file, overlaid by flags.

use std::path::{Path, PathBuf};

use adhist::datagen::{SourceKind, SourceSpec};
use adhist::kernels::{CounterWidth, WorkerGroupConfig, DEFAULT_GROUP_COUNT, DEFAULT_GROUP_SIZE};
use adhist::pattern::{DEFAULT_CAP, DEFAULT_TOTAL_SLOTS};
use adhist::policy::{SwitchPolicy, DEFAULT_THRESHOLD};
use adhist::stream::{PipelineConfig, Schedule, StageProfile};
use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

/// Default chunk for the kernel benchmarks: 8192 x 8192 pixels.
pub const DEFAULT_KERNEL_PIXELS: usize = 8192 * 8192;
/// Default slice size for the streaming modes.
pub const DEFAULT_STREAM_PIXELS: usize = 1 << 16;
pub const DEFAULT_STREAM_SCHEDULE: &str = "100*uniform,100*constant:127";
/// Window used by `stream` mode unless overridden; short enough that one
/// chunk of a new regime dominates it.
pub const DEFAULT_STREAM_WINDOW: usize = 2;
pub const DEFAULT_PIPELINE_WINDOW: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Genealogy,
    Compare,
    Sweep,
    Pipeline,
    Stream,
}

#[derive(Debug, Parser)]
#[command(
    name = "adhist",
    version,
    about = "Histogram kernel and streaming benchmarks"
)]
pub struct Args {
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// JSON file with any of the options below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// uniform | sequential | constant:V | normal[:MEAN:SIGMA] | xray | mixture:P:V | file:PATH
    #[arg(long)]
    pub source: Option<String>,
    /// Stream schedule for pipeline/stream modes, e.g. `100*uniform,100*constant:127`.
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub pixels: Option<usize>,
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long)]
    pub group_count: Option<usize>,
    #[arg(long)]
    pub slots: Option<usize>,
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Synthetic host-to-device bandwidth in bytes per second (0 disables).
    #[arg(long)]
    pub bandwidth_in: Option<f64>,
    /// Synthetic device-to-host bandwidth in bytes per second (0 disables).
    #[arg(long)]
    pub bandwidth_out: Option<f64>,
    #[arg(long)]
    pub recompute_every: Option<usize>,
    /// JSON stage profile: {"cpu_pre_us":..,"transfer_in_us":..,"compute_us":..,"transfer_out_us":..,"cpu_post_us":..}
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the trained binning pattern (`bin offset count`) to stderr.
    #[arg(long)]
    pub pattern_dump: bool,
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// 16-bit sub-counters with overflow detection.
    #[arg(long)]
    pub narrow: bool,
    /// Run kernels on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
}

/// Every option optional, as read from a JSON config file.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<Mode>,
    pub source: Option<String>,
    pub schedule: Option<String>,
    pub seed: Option<u64>,
    pub pixels: Option<usize>,
    pub group_size: Option<usize>,
    pub group_count: Option<usize>,
    pub slots: Option<usize>,
    pub cap: Option<usize>,
    pub threshold: Option<f64>,
    pub window: Option<usize>,
    pub iterations: Option<usize>,
    pub batch: Option<usize>,
    pub bandwidth_in: Option<f64>,
    pub bandwidth_out: Option<f64>,
    pub recompute_every: Option<usize>,
    pub profile: Option<StageProfile>,
    pub out: Option<PathBuf>,
    pub pattern_dump: Option<bool>,
    pub repetitions: Option<usize>,
    pub narrow: Option<bool>,
    pub sequential: Option<bool>,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub source: SourceKind,
    pub schedule: Option<Schedule>,
    pub seed: u64,
    pub pixels: usize,
    pub workers: WorkerGroupConfig,
    pub slots: usize,
    pub cap: usize,
    pub policy: SwitchPolicy,
    pub window: usize,
    pub iterations: usize,
    pub batch: usize,
    pub bandwidth_in: f64,
    pub bandwidth_out: f64,
    pub recompute_every: usize,
    pub profile: Option<StageProfile>,
    pub out: Option<PathBuf>,
    pub pattern_dump: bool,
    pub repetitions: usize,
}

pub fn load_profile(path: &Path) -> Result<StageProfile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading profile {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing profile {}", path.display()))
}

impl RunConfig {
    pub fn from_args(args: Args) -> Result<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => FileConfig::default(),
        };
        Self::resolve(args, file)
    }

    pub fn resolve(args: Args, file: FileConfig) -> Result<Self> {
        let mode = args
            .mode
            .or(file.mode)
            .context("no mode given (use --mode or the config file)")?;
        let streaming = matches!(mode, Mode::Pipeline | Mode::Stream);

        let source: SourceKind = args
            .source
            .or(file.source)
            .unwrap_or_else(|| {
                if mode == Mode::Sweep {
                    "xray"
                } else {
                    "uniform"
                }
                .into()
            })
            .parse()?;
        let schedule = args
            .schedule
            .or(file.schedule)
            .or_else(|| (mode == Mode::Stream).then(|| DEFAULT_STREAM_SCHEDULE.to_string()))
            .map(|s| s.parse::<Schedule>())
            .transpose()?;

        let pixels = args.pixels.or(file.pixels).unwrap_or(if streaming {
            DEFAULT_STREAM_PIXELS
        } else {
            DEFAULT_KERNEL_PIXELS
        });

        let mut workers = WorkerGroupConfig::new(
            args.group_size
                .or(file.group_size)
                .unwrap_or(DEFAULT_GROUP_SIZE),
            args.group_count
                .or(file.group_count)
                .unwrap_or(DEFAULT_GROUP_COUNT),
        );
        if args.narrow || file.narrow.unwrap_or(false) {
            workers.counter_width = CounterWidth::Narrow;
        }
        if args.sequential || file.sequential.unwrap_or(false) {
            workers.parallel = false;
        }
        workers.validate()?;

        let profile = match args.profile {
            Some(path) => Some(load_profile(&path)?),
            None => file.profile,
        };

        let default_window = if mode == Mode::Stream {
            DEFAULT_STREAM_WINDOW
        } else {
            DEFAULT_PIPELINE_WINDOW
        };
        let iterations = args
            .iterations
            .or(file.iterations)
            .or_else(|| schedule.as_ref().map(Schedule::iterations))
            .unwrap_or(16);

        let cfg = Self {
            mode,
            source,
            schedule,
            seed: args.seed.or(file.seed).unwrap_or(0x5EED),
            pixels,
            workers,
            slots: args.slots.or(file.slots).unwrap_or(DEFAULT_TOTAL_SLOTS),
            cap: args.cap.or(file.cap).unwrap_or(DEFAULT_CAP),
            policy: SwitchPolicy::new(
                args.threshold
                    .or(file.threshold)
                    .unwrap_or(DEFAULT_THRESHOLD),
            )?,
            window: args.window.or(file.window).unwrap_or(default_window),
            iterations,
            batch: args.batch.or(file.batch).unwrap_or(1),
            bandwidth_in: args.bandwidth_in.or(file.bandwidth_in).unwrap_or(0.0),
            bandwidth_out: args.bandwidth_out.or(file.bandwidth_out).unwrap_or(0.0),
            recompute_every: args.recompute_every.or(file.recompute_every).unwrap_or(1),
            profile,
            out: args.out.or(file.out),
            pattern_dump: args.pattern_dump || file.pattern_dump.unwrap_or(false),
            repetitions: args.repetitions.or(file.repetitions).unwrap_or(5),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            bail!("repetitions must be at least 1");
        }
        if !matches!(self.source, SourceKind::File(_)) && self.pixels % 4 != 0 {
            bail!("--pixels must be a multiple of 4, got {}", self.pixels);
        }
        adhist::pattern::uniform_pattern(self.slots, self.cap)?;
        self.pipeline_config().validate()?;
        Ok(())
    }

    pub fn source_spec(&self) -> SourceSpec {
        SourceSpec::new(self.source.clone(), self.seed, self.pixels)
    }

    /// The stream schedule, defaulting to `iterations` of `--source`.
    pub fn stream_schedule(&self) -> Schedule {
        self.schedule
            .clone()
            .unwrap_or_else(|| Schedule::constant(self.iterations, self.source.clone()))
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            num_iterations: self.iterations,
            chunk_pixels: self.pixels,
            batch_size: self.batch,
            window: self.window,
            recompute_pattern_every: self.recompute_every,
            bandwidth_in: self.bandwidth_in,
            bandwidth_out: self.bandwidth_out,
            total_slots: self.slots,
            cap: self.cap,
            workers: self.workers,
            profile: self.profile,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Args {
        Args::parse_from(std::iter::once("adhist").chain(list.iter().copied()))
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let file: FileConfig = serde_json::from_str(
            r#"{"mode": "compare", "seed": 7, "pixels": 4096, "threshold": 0.4}"#,
        )
        .unwrap();
        let cfg = RunConfig::resolve(args(&["--seed", "9"]), file).unwrap();
        assert_eq!(cfg.mode, Mode::Compare);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.pixels, 4096);
        assert_eq!(cfg.policy.threshold(), 0.4);
        assert_eq!(cfg.slots, DEFAULT_TOTAL_SLOTS);
        assert_eq!(cfg.repetitions, 5);
    }

    #[test]
    fn mode_dependent_defaults() {
        let k = RunConfig::resolve(args(&["--mode", "genealogy"]), FileConfig::default()).unwrap();
        assert_eq!(k.pixels, DEFAULT_KERNEL_PIXELS);
        let s = RunConfig::resolve(args(&["--mode", "stream"]), FileConfig::default()).unwrap();
        assert_eq!(s.pixels, DEFAULT_STREAM_PIXELS);
        assert_eq!(s.iterations, 200);
        assert_eq!(s.window, DEFAULT_STREAM_WINDOW);
    }

    #[test]
    fn rejects_bad_values() {
        let f = FileConfig::default;
        assert!(RunConfig::resolve(args(&[]), f()).is_err());
        assert!(RunConfig::resolve(args(&["--mode", "compare", "--pixels", "6"]), f()).is_err());
        assert!(
            RunConfig::resolve(args(&["--mode", "compare", "--threshold", "1.5"]), f()).is_err()
        );
        assert!(RunConfig::resolve(args(&["--mode", "compare", "--slots", "100"]), f()).is_err());
        assert!(RunConfig::resolve(args(&["--mode", "compare", "--source", "nope"]), f()).is_err());
        assert!(serde_json::from_str::<FileConfig>(r#"{"colour": 1}"#).is_err());
    }
}
