use std::str::FromStr;

use crate::datagen::{generate, read_raw, SourceKind, SourceSpec};
use crate::error::{Error, Result};
use crate::types::PackedChunk;

/// A piecewise stream description: `iterations` of each kind in turn.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    segments: Vec<(usize, SourceKind)>,
}

impl Schedule {
    pub fn new(segments: Vec<(usize, SourceKind)>) -> Self {
        Self { segments }
    }

    pub fn constant(iterations: usize, kind: SourceKind) -> Self {
        Self::new(vec![(iterations, kind)])
    }

    pub fn segments(&self) -> &[(usize, SourceKind)] {
        &self.segments
    }

    pub fn iterations(&self) -> usize {
        self.segments.iter().map(|(n, _)| n).sum()
    }

    pub fn kind_at(&self, iteration: usize) -> Option<&SourceKind> {
        let mut start = 0;
        for (n, kind) in &self.segments {
            if iteration < start + n {
                return Some(kind);
            }
            start += n;
        }
        None
    }
}

impl FromStr for Schedule {
    type Err = Error;

    /// `N*KIND[,N*KIND...]`, e.g. `100*uniform,100*constant:127`. A bare
    /// `KIND` counts as one iteration.
    fn from_str(s: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (n, kind) = match part.split_once('*') {
                Some((n, k)) => (
                    n.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::SpecInvalid(format!("bad repeat count in `{part}`")))?,
                    k.trim(),
                ),
                None => (1, part),
            };
            segments.push((n, kind.parse()?));
        }
        if segments.is_empty() {
            return Err(Error::SpecInvalid("empty schedule".into()));
        }
        Ok(Self { segments })
    }
}

/// Deterministic chunk stream following a [`Schedule`].
///
/// Slice `s` of iteration `i` is generated from `seed ^ (i * batch + s)`.
#[derive(Debug, Clone)]
pub struct ScheduledSource {
    schedule: Schedule,
    seed: u64,
    pixels: usize,
    batch: usize,
    next: usize,
    files: Vec<Option<PackedChunk>>,
}

impl ScheduledSource {
    pub fn new(schedule: Schedule, seed: u64, pixels: usize, batch: usize) -> Result<Self> {
        if batch == 0 {
            return Err(Error::InvalidPipelineConfig(
                "batch size must be at least 1",
            ));
        }
        let mut files = Vec::with_capacity(schedule.segments.len());
        for (_, kind) in &schedule.segments {
            SourceSpec::new(kind.clone(), seed, pixels).validate()?;
            files.push(match kind {
                SourceKind::File(path) => Some(read_raw(path)?),
                _ => None,
            });
        }
        Ok(Self {
            schedule,
            seed,
            pixels,
            batch,
            next: 0,
            files,
        })
    }

    fn segment_of(&self, iteration: usize) -> Option<usize> {
        let mut start = 0;
        for (idx, (n, _)) in self.schedule.segments.iter().enumerate() {
            if iteration < start + n {
                return Some(idx);
            }
            start += n;
        }
        None
    }
}

impl Iterator for ScheduledSource {
    type Item = Vec<PackedChunk>;

    fn next(&mut self) -> Option<Self::Item> {
        let i = self.next;
        let seg = self.segment_of(i)?;
        self.next += 1;
        if let Some(chunk) = &self.files[seg] {
            return Some(vec![chunk.clone(); self.batch]);
        }
        let kind = &self.schedule.segments[seg].1;
        Some(
            (0..self.batch)
                .map(|s| {
                    let spec = SourceSpec::new(kind.clone(), self.seed, self.pixels)
                        .for_chunk((i * self.batch + s) as u64);
                    generate(&spec).expect("spec validated at construction")
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_schedule() {
        let s: Schedule = "100*uniform, 100*constant:127".parse().unwrap();
        assert_eq!(s.iterations(), 200);
        assert_eq!(s.kind_at(99), Some(&SourceKind::UniformRandom));
        assert_eq!(s.kind_at(100), Some(&SourceKind::Constant(127)));
        assert_eq!(s.kind_at(200), None);
        assert!("".parse::<Schedule>().is_err());
        assert!("x*uniform".parse::<Schedule>().is_err());
    }

    #[test]
    fn source_is_deterministic_and_finite() {
        let sched: Schedule = "2*uniform,1*constant:3".parse().unwrap();
        let a: Vec<_> = ScheduledSource::new(sched.clone(), 5, 64, 2)
            .unwrap()
            .collect();
        let b: Vec<_> = ScheduledSource::new(sched, 5, 64, 2).unwrap().collect();
        assert_eq!(a.len(), 3);
        assert_eq!(a, b);
        assert!(a.iter().all(|batch| batch.len() == 2));
        assert_ne!(a[0][0], a[0][1]);
        assert_eq!(a[2][0].unpack(), vec![3; 64]);
    }
}
