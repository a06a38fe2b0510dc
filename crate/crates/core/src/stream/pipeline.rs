use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::{AccumulatorState, PipelineConfig, PipelineReport, Stage, StageTiming, WindowState};
use crate::error::{Error, Result};
use crate::kernels::{batch_histograms, KernelKind};
use crate::pattern::{compute_binning_pattern, BinningPattern};
use crate::policy::{degeneracy, divergence, select_kernel, DegeneracyReport, SwitchPolicy};
use crate::types::{Histogram256, PackedChunk};

/// Everything a stream run produces.
#[derive(Debug, Clone)]
pub struct StreamOutcome {
    pub accumulator: AccumulatorState,
    pub window: WindowState,
    pub report: PipelineReport,
    /// Kernel used by each iteration.
    pub kernel_log: Vec<KernelKind>,
    /// Every slice histogram in stream order.
    pub slice_histograms: Vec<Histogram256>,
    /// Window degeneracy after each iteration.
    pub degeneracy_log: Vec<DegeneracyReport>,
    /// Divergence between accumulator and window after each iteration.
    pub divergence_log: Vec<f64>,
}

impl StreamOutcome {
    /// True when the histogram state and decisions match; timings are ignored.
    pub fn same_state(&self, other: &StreamOutcome) -> bool {
        self.accumulator == other.accumulator
            && self.window == other.window
            && self.kernel_log == other.kernel_log
            && self.slice_histograms == other.slice_histograms
    }
}

/// Runs the stream with every stage of every iteration strictly in order.
pub fn run_sequential<I>(
    source: I,
    cfg: &PipelineConfig,
    policy: &SwitchPolicy,
) -> Result<StreamOutcome>
where
    I: IntoIterator<Item = Vec<PackedChunk>>,
{
    cfg.validate()?;
    let mut host = Host::new(source.into_iter(), cfg, policy)?;
    let audit = BufferAudit::default();
    let mut buffers = vec![StagingBuffer::new(0), StagingBuffer::new(1)];
    let mut rows = Vec::with_capacity(cfg.num_iterations);

    let start = Instant::now();
    for i in 0..cfg.num_iterations {
        let mut buffer = buffers.remove(0);
        let front = host.front(i, &mut buffer, &audit)?;
        let back = device_stage(
            cfg,
            &audit,
            Job {
                iteration: i,
                buffer,
                kernel: host.next_kernel,
                pattern: front.pattern.clone(),
            },
        )?;
        buffers.push(back.buffer);
        let post = host.post(i, &back.histograms)?;
        rows.push(StageTiming {
            iteration: i,
            cpu_pre: front.cpu_pre,
            transfer_in: front.transfer_in,
            compute: back.compute,
            transfer_out: back.transfer_out,
            cpu_post: post,
            kernel: back.kernel,
        });
    }
    let wall = start.elapsed();
    Ok(host.finish(PipelineReport::new(rows, wall, audit.violations())))
}

/// Runs the stream with the device stages of iteration `i` overlapping the
/// host preparation of iteration `i + 1`.
pub fn run_pipeline<I>(
    source: I,
    cfg: &PipelineConfig,
    policy: &SwitchPolicy,
) -> Result<StreamOutcome>
where
    I: IntoIterator<Item = Vec<PackedChunk>>,
{
    cfg.validate()?;
    let mut host = Host::new(source.into_iter(), cfg, policy)?;
    let audit = BufferAudit::default();
    let n = cfg.num_iterations;

    thread::scope(|scope| {
        let (job_tx, job_rx) = mpsc::sync_channel::<Job>(1);
        let (done_tx, done_rx) = mpsc::sync_channel::<Result<Done>>(1);
        let audit_ref = &audit;
        scope.spawn(move || {
            for job in job_rx {
                if done_tx.send(device_stage(cfg, audit_ref, job)).is_err() {
                    break;
                }
            }
        });

        let mut free = vec![StagingBuffer::new(1)];
        let mut rows = Vec::with_capacity(n);
        let start = Instant::now();

        let mut buffer = StagingBuffer::new(0);
        let mut front = host.front(0, &mut buffer, &audit)?;
        submit(
            &job_tx,
            Job {
                iteration: 0,
                buffer,
                kernel: host.next_kernel,
                pattern: front.pattern.clone(),
            },
        )?;

        for i in 0..n {
            // Prepare the next iteration while the device is busy with this one.
            let next = if i + 1 < n {
                let mut buffer = free.pop().expect("a staging buffer is free");
                let f = host.front(i + 1, &mut buffer, &audit)?;
                Some((f, buffer))
            } else {
                None
            };

            let back = done_rx
                .recv()
                .map_err(|_| Error::InvalidPipelineConfig("device stage terminated"))??;
            free.push(back.buffer);
            let post = host.post(i, &back.histograms)?;
            rows.push(StageTiming {
                iteration: i,
                cpu_pre: front.cpu_pre,
                transfer_in: front.transfer_in,
                compute: back.compute,
                transfer_out: back.transfer_out,
                cpu_post: post,
                kernel: back.kernel,
            });

            if let Some((f, buffer)) = next {
                submit(
                    &job_tx,
                    Job {
                        iteration: i + 1,
                        buffer,
                        kernel: host.next_kernel,
                        pattern: f.pattern.clone(),
                    },
                )?;
                front = f;
            }
        }
        let wall = start.elapsed();
        drop(job_tx);
        Ok(host.finish(PipelineReport::new(rows, wall, audit.violations())))
    })
}

fn submit(tx: &mpsc::SyncSender<Job>, job: Job) -> Result<()> {
    tx.send(job)
        .map_err(|_| Error::InvalidPipelineConfig("device stage terminated"))
}

/// Slices staged for one kernel invocation.
struct StagingBuffer {
    id: usize,
    slices: Vec<PackedChunk>,
}

impl StagingBuffer {
    fn new(id: usize) -> Self {
        Self {
            id,
            slices: Vec::new(),
        }
    }
}

/// Counts staging writes and releases per buffer. A write while the previous
/// reader still holds the buffer is a violation.
#[derive(Default)]
struct BufferAudit {
    writes: [AtomicU64; 2],
    releases: [AtomicU64; 2],
    violations: AtomicU64,
}

impl BufferAudit {
    fn on_write(&self, id: usize) {
        if self.writes[id].load(Ordering::SeqCst) != self.releases[id].load(Ordering::SeqCst) {
            self.violations.fetch_add(1, Ordering::SeqCst);
        }
        self.writes[id].fetch_add(1, Ordering::SeqCst);
    }

    fn on_release(&self, id: usize) {
        self.releases[id].fetch_add(1, Ordering::SeqCst);
    }

    fn violations(&self) -> u64 {
        self.violations.load(Ordering::SeqCst)
    }
}

struct Job {
    iteration: usize,
    buffer: StagingBuffer,
    kernel: KernelKind,
    pattern: Arc<BinningPattern>,
}

struct Done {
    buffer: StagingBuffer,
    histograms: Vec<Histogram256>,
    kernel: KernelKind,
    compute: Duration,
    transfer_out: Duration,
}

struct Front {
    pattern: Arc<BinningPattern>,
    cpu_pre: Duration,
    transfer_in: Duration,
}

fn device_stage(cfg: &PipelineConfig, audit: &BufferAudit, job: Job) -> Result<Done> {
    let bytes_in: usize = job.buffer.slices.iter().map(PackedChunk::byte_len).sum();
    let t = Instant::now();
    let result = batch_histograms(&job.buffer.slices, job.kernel, &job.pattern, &cfg.workers);
    audit.on_release(job.buffer.id);
    let device_hists = result?;
    let compute = pad(t, cfg.target(Stage::Compute, bytes_in));
    log::trace!("iteration {} computed with {}", job.iteration, job.kernel);

    let t = Instant::now();
    let mut histograms = Vec::with_capacity(device_hists.len());
    histograms.extend(device_hists.iter().cloned());
    let transfer_out = pad(
        t,
        cfg.target(
            Stage::TransferOut,
            histograms.len() * Histogram256::byte_len(),
        ),
    );
    Ok(Done {
        buffer: job.buffer,
        histograms,
        kernel: job.kernel,
        compute,
        transfer_out,
    })
}

/// Host-side state: the source, the histogram states and the decision logs.
struct Host<'a, I> {
    source: I,
    cfg: &'a PipelineConfig,
    policy: &'a SwitchPolicy,
    accumulator: AccumulatorState,
    window: WindowState,
    /// Window after each of the two most recent completed iterations.
    history: VecDeque<(usize, Histogram256)>,
    pattern: Option<Arc<BinningPattern>>,
    next_kernel: KernelKind,
    kernel_log: Vec<KernelKind>,
    slice_histograms: Vec<Histogram256>,
    degeneracy_log: Vec<DegeneracyReport>,
    divergence_log: Vec<f64>,
}

impl<'a, I: Iterator<Item = Vec<PackedChunk>>> Host<'a, I> {
    fn new(source: I, cfg: &'a PipelineConfig, policy: &'a SwitchPolicy) -> Result<Self> {
        Ok(Self {
            source,
            cfg,
            policy,
            accumulator: AccumulatorState::new(),
            window: WindowState::new(cfg.window)?,
            history: VecDeque::with_capacity(3),
            pattern: None,
            next_kernel: select_kernel(&degeneracy(&Histogram256::zero()), policy),
            kernel_log: Vec::with_capacity(cfg.num_iterations),
            slice_histograms: Vec::with_capacity(cfg.num_iterations * cfg.batch_size),
            degeneracy_log: Vec::with_capacity(cfg.num_iterations),
            divergence_log: Vec::with_capacity(cfg.num_iterations),
        })
    }

    /// Window state used to learn the pattern of iteration `j`.
    fn prior_for(&self, j: usize) -> Histogram256 {
        j.checked_sub(2)
            .and_then(|want| self.history.iter().find(|(i, _)| *i == want))
            .map(|(_, h)| h.clone())
            .unwrap_or_default()
    }

    /// `cpu_pre` and `transfer_in` of iteration `j`.
    fn front(
        &mut self,
        j: usize,
        buffer: &mut StagingBuffer,
        audit: &BufferAudit,
    ) -> Result<Front> {
        let t = Instant::now();
        let recompute = self.pattern.is_none() || j % self.cfg.recompute_pattern_every == 0;
        if recompute {
            let prior = self.prior_for(j);
            self.pattern = Some(Arc::new(compute_binning_pattern(
                &prior,
                self.cfg.total_slots,
                self.cfg.cap,
            )?));
        }
        let pattern = self.pattern.clone().expect("pattern set above");
        let cpu_pre = pad(t, self.cfg.target(Stage::CpuPre, 0));

        let t = Instant::now();
        let batch = self.source.next().ok_or(Error::SourceExhausted(j))?;
        if batch.len() != self.cfg.batch_size {
            return Err(Error::BatchSizeMismatch {
                iteration: j,
                got: batch.len(),
                expected: self.cfg.batch_size,
            });
        }
        audit.on_write(buffer.id);
        buffer.slices.resize_with(batch.len(), PackedChunk::default);
        for (dst, src) in buffer.slices.iter_mut().zip(&batch) {
            dst.assign_from(src);
        }
        let bytes: usize = batch.iter().map(PackedChunk::byte_len).sum();
        let transfer_in = pad(t, self.cfg.target(Stage::TransferIn, bytes));
        Ok(Front {
            pattern,
            cpu_pre,
            transfer_in,
        })
    }

    /// `cpu_post` of iteration `i`: fold results in and pick the next kernel.
    fn post(&mut self, i: usize, histograms: &[Histogram256]) -> Result<Duration> {
        let t = Instant::now();
        self.kernel_log.push(self.next_kernel);
        for h in histograms {
            self.accumulator.push(h)?;
            self.window.push(h)?;
        }
        self.slice_histograms.extend_from_slice(histograms);
        let report = degeneracy(self.window.windowed());
        if i % self.cfg.recompute_pattern_every == 0 {
            self.next_kernel = select_kernel(&report, self.policy);
        }
        self.degeneracy_log.push(report);
        self.divergence_log
            .push(divergence(self.accumulator.running(), self.window.windowed()).unwrap_or(0.0));
        self.history.push_back((i, self.window.windowed().clone()));
        while self.history.len() > 2 {
            self.history.pop_front();
        }
        Ok(pad(t, self.cfg.target(Stage::CpuPost, 0)))
    }

    fn finish(self, report: PipelineReport) -> StreamOutcome {
        StreamOutcome {
            accumulator: self.accumulator,
            window: self.window,
            report,
            kernel_log: self.kernel_log,
            slice_histograms: self.slice_histograms,
            degeneracy_log: self.degeneracy_log,
            divergence_log: self.divergence_log,
        }
    }
}

/// Waits until `target` has elapsed since `start` and returns the stage duration.
fn pad(start: Instant, target: Option<Duration>) -> Duration {
    if let Some(target) = target {
        wait_until(start + target);
    }
    start.elapsed()
}

/// Sleeps for most of the interval, then yields until the deadline passes.
fn wait_until(deadline: Instant) {
    const SPIN: Duration = Duration::from_micros(150);
    loop {
        let now = Instant::now();
        if now >= deadline {
            return;
        }
        let left = deadline - now;
        if left > SPIN {
            thread::sleep(left - SPIN);
        } else {
            thread::yield_now();
        }
    }
}
