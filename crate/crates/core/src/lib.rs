//! Contention-aware 256-bin histograms.
//!
//! The crate provides a serial reference kernel, a naive kernel where every
//! worker of a group shares one counter per bin, and an adaptive kernel that
//! spreads hot bins over several sub-counters according to a binning pattern
//! learned from earlier data. On top of the kernels sits a streaming engine
//! that keeps an accumulated and a moving-window histogram, overlaps the
//! stages of consecutive iterations with double-buffered staging, and picks
//! the kernel for each iteration from the degeneracy of the window.

pub mod datagen;
pub mod error;
mod exec;
pub mod kernels;
pub mod pattern;
pub mod policy;
pub mod stream;
pub mod types;

pub use error::{Error, Result};
pub use exec::parallel_available;
pub use kernels::{
    adaptive_histogram, batch_histograms, naive_histogram, reduce_subbins, reference_histogram,
    KernelKind, WorkerGroupConfig,
};
pub use pattern::{compute_binning_pattern, uniform_pattern, validate_pattern, BinningPattern};
pub use policy::{degeneracy, divergence, select_kernel, DegeneracyReport, SwitchPolicy};
pub use types::{merge, pack_pixels, unpack_word, Histogram256, PackedChunk, Pixel, BINS};
