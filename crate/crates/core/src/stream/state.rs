use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::types::Histogram256;

pub const DEFAULT_WINDOW: usize = 128;

/// Running sum of every chunk histogram seen so far.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccumulatorState {
    running: Histogram256,
    chunks_seen: u64,
}

impl AccumulatorState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, h: &Histogram256) -> Result<()> {
        self.running.merge_from(h)?;
        self.chunks_seen += 1;
        Ok(())
    }

    pub fn running(&self) -> &Histogram256 {
        &self.running
    }

    pub fn chunks_seen(&self) -> u64 {
        self.chunks_seen
    }
}

/// Sum over the most recent `capacity` chunk histograms, kept incrementally:
/// each push adds the new histogram and subtracts the evicted one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowState {
    capacity: usize,
    ring: VecDeque<Histogram256>,
    windowed: Histogram256,
}

impl WindowState {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidPipelineConfig(
                "window size must be at least 1",
            ));
        }
        Ok(Self {
            capacity,
            ring: VecDeque::with_capacity(capacity + 1),
            windowed: Histogram256::zero(),
        })
    }

    pub fn push(&mut self, h: &Histogram256) -> Result<()> {
        self.windowed.merge_from(h)?;
        self.ring.push_back(h.clone());
        if self.ring.len() > self.capacity {
            let evicted = self.ring.pop_front().expect("ring is non-empty");
            self.windowed.subtract(&evicted)?;
        }
        Ok(())
    }

    pub fn windowed(&self) -> &Histogram256 {
        &self.windowed
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn ring(&self) -> impl Iterator<Item = &Histogram256> {
        self.ring.iter()
    }

    /// Sum of the ring contents computed from scratch.
    pub fn recompute(&self) -> Result<Histogram256> {
        self.ring
            .iter()
            .try_fold(Histogram256::zero(), |acc, h| acc.merge(h))
    }
}

/// Folds `h` into `state`, returning the new state.
pub fn accumulator_push(mut state: AccumulatorState, h: &Histogram256) -> Result<AccumulatorState> {
    state.push(h)?;
    Ok(state)
}

/// Pushes `h` into the window, returning the new state.
pub fn window_push(mut state: WindowState, h: &Histogram256) -> Result<WindowState> {
    state.push(h)?;
    Ok(state)
}
