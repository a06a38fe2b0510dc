//! Seeded input generators and raw-file ingestion.
//!
//! All random kinds draw from xoshiro256** seeded through SplitMix64
//! (`Xoshiro256StarStar::seed_from_u64`). Draws are consumed in pixel order:
//!
//! * uniform byte: the top 8 bits of one `u64`;
//! * unit real `u`: `(x >> 11) * 2^-53` for one `u64` `x`, so `u` lies in `[0, 1)`;
//! * Bernoulli(p): one unit real, success iff `u < p`;
//! * normal: Box-Muller on two draws, `u1 = ((x1 >> 11) + 1) * 2^-53`,
//!   `u2` a unit real, `z = sqrt(-2 ln u1) * cos(2 pi u2)`, pixel
//!   `round(mean + sigma * z)` clamped to `[0, 255]`;
//! * mixture: one Bernoulli(p) draw; on success the pixel is `v`, otherwise one
//!   uniform byte is drawn.
//!
//! Streams of chunks derive per-chunk seeds as `base_seed ^ chunk_index`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{PackedChunk, Pixel, PIXELS_PER_WORD};

/// Mean of the normal stand-in for X-ray slices.
pub const XRAY_STANDIN_MEAN: f64 = 127.0;
/// Standard deviation of the normal stand-in for X-ray slices.
pub const XRAY_STANDIN_SIGMA: f64 = 24.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    UniformRandom,
    Sequential,
    Constant(u8),
    Normal {
        mean: f64,
        sigma: f64,
    },
    /// Each pixel is `value` with probability `degeneracy`, otherwise uniform.
    Mixture {
        degeneracy: f64,
        value: u8,
    },
    /// Headerless raw bytes, truncated to a multiple of four.
    File(PathBuf),
}

impl SourceKind {
    pub fn xray_standin() -> Self {
        SourceKind::Normal {
            mean: XRAY_STANDIN_MEAN,
            sigma: XRAY_STANDIN_SIGMA,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SourceKind::Normal { mean, sigma } => {
                if !(sigma > 0.0 && sigma.is_finite() && mean.is_finite()) {
                    return Err(Error::SpecInvalid(format!(
                        "normal needs finite mean and sigma > 0, got {mean}/{sigma}"
                    )));
                }
            }
            SourceKind::Mixture { degeneracy, .. } => {
                if !(0.0..=1.0).contains(&degeneracy) {
                    return Err(Error::SpecInvalid(format!(
                        "mixture degeneracy {degeneracy} outside [0, 1]"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceKind::UniformRandom => write!(f, "uniform"),
            SourceKind::Sequential => write!(f, "sequential"),
            SourceKind::Constant(v) => write!(f, "constant:{v}"),
            SourceKind::Normal { mean, sigma } => write!(f, "normal:{mean}:{sigma}"),
            SourceKind::Mixture { degeneracy, value } => write!(f, "mixture:{degeneracy}:{value}"),
            SourceKind::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    /// Accepts `uniform`, `sequential`, `constant:V`, `normal[:MEAN:SIGMA]`,
    /// `xray` (the normal stand-in), `mixture:P:V` and `file:PATH`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::SpecInvalid(format!("cannot parse source `{s}`"));
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let kind = match (head, rest) {
            ("uniform" | "random", None) => SourceKind::UniformRandom,
            ("sequential", None) => SourceKind::Sequential,
            ("constant", Some(v)) => SourceKind::Constant(v.parse().map_err(|_| bad())?),
            ("normal" | "xray", None) => SourceKind::xray_standin(),
            ("normal", Some(r)) => {
                let (m, sd) = r.split_once(':').ok_or_else(bad)?;
                SourceKind::Normal {
                    mean: m.parse().map_err(|_| bad())?,
                    sigma: sd.parse().map_err(|_| bad())?,
                }
            }
            ("mixture", Some(r)) => {
                let (p, v) = r.split_once(':').ok_or_else(bad)?;
                SourceKind::Mixture {
                    degeneracy: p.parse().map_err(|_| bad())?,
                    value: v.parse().map_err(|_| bad())?,
                }
            }
            ("file", Some(p)) if !p.is_empty() => SourceKind::File(PathBuf::from(p)),
            _ => return Err(bad()),
        };
        kind.validate()?;
        Ok(kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub seed: u64,
    /// Pixels to generate; ignored by [`SourceKind::File`].
    pub pixels: usize,
}

impl SourceSpec {
    pub fn new(kind: SourceKind, seed: u64, pixels: usize) -> Self {
        Self { kind, seed, pixels }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.kind, SourceKind::File(_)) && self.pixels % PIXELS_PER_WORD != 0 {
            return Err(Error::SpecInvalid(format!(
                "pixel count {} is not a multiple of 4",
                self.pixels
            )));
        }
        self.kind.validate()
    }

    /// The same spec with the seed of chunk `index` of a stream.
    pub fn for_chunk(&self, index: u64) -> Self {
        Self {
            seed: chunk_seed(self.seed, index),
            ..self.clone()
        }
    }
}

pub fn chunk_seed(base: u64, index: u64) -> u64 {
    base ^ index
}

/// Produces the chunk described by `spec`; identical specs give identical bytes.
pub fn generate(spec: &SourceSpec) -> Result<PackedChunk> {
    spec.validate()?;
    let n = spec.pixels;
    let mut rng = PixelRng::new(spec.seed);
    let pixels: Vec<Pixel> = match spec.kind {
        SourceKind::UniformRandom => (0..n).map(|_| rng.byte()).collect(),
        SourceKind::Sequential => (0..n).map(|i| (i % 256) as u8).collect(),
        SourceKind::Constant(v) => vec![v; n],
        SourceKind::Normal { mean, sigma } => (0..n).map(|_| rng.normal(mean, sigma)).collect(),
        SourceKind::Mixture { degeneracy, value } => (0..n)
            .map(|_| {
                if rng.unit() < degeneracy {
                    value
                } else {
                    rng.byte()
                }
            })
            .collect(),
        SourceKind::File(ref path) => return read_raw(path),
    };
    PackedChunk::pack(&pixels)
}

/// Reads a headerless byte file, dropping any trailing partial word.
pub fn read_raw(path: &std::path::Path) -> Result<PackedChunk> {
    let mut bytes = std::fs::read(path).map_err(|e| Error::FileUnreadable {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let keep = bytes.len() - bytes.len() % PIXELS_PER_WORD;
    if keep != bytes.len() {
        log::warn!(
            "{}: dropping {} trailing byte(s) to keep whole 4-pixel words",
            path.display(),
            bytes.len() - keep
        );
        bytes.truncate(keep);
    }
    PackedChunk::pack(&bytes)
}

struct PixelRng(Xoshiro256StarStar);

impl PixelRng {
    fn new(seed: u64) -> Self {
        Self(Xoshiro256StarStar::seed_from_u64(seed))
    }

    #[inline]
    fn byte(&mut self) -> u8 {
        (self.0.next_u64() >> 56) as u8
    }

    #[inline]
    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn normal(&mut self, mean: f64, sigma: f64) -> u8 {
        let u1 = ((self.0.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.unit();
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        (mean + sigma * z).round().clamp(0.0, 255.0) as u8
    }
}
