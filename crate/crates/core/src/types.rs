//! Packed pixel chunks and the 256-bin histogram value type.

use std::fmt;

use crate::error::{Error, Result};

/// Number of bins in every histogram; one per 8-bit pixel value.
pub const BINS: usize = 256;

/// Pixels packed into one 32-bit word.
pub const PIXELS_PER_WORD: usize = 4;

/// An 8-bit intensity. The bin index of a pixel is its value.
pub type Pixel = u8;

/// A pixel stream packed four pixels per 32-bit word.
///
/// Byte `k` of word `i` (least-significant byte is `k = 0`) holds pixel `4i + k`.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct PackedChunk {
    words: Vec<u32>,
}

impl PackedChunk {
    pub fn from_words(words: Vec<u32>) -> Self {
        Self { words }
    }

    /// Packs `pixels`, whose length must be a multiple of four.
    pub fn pack(pixels: &[Pixel]) -> Result<Self> {
        if pixels.len() % PIXELS_PER_WORD != 0 {
            return Err(Error::LengthNotMultipleOfFour(pixels.len()));
        }
        let words = pixels
            .chunks_exact(PIXELS_PER_WORD)
            .map(|p| u32::from_le_bytes([p[0], p[1], p[2], p[3]]))
            .collect();
        Ok(Self { words })
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    pub fn into_words(self) -> Vec<u32> {
        self.words
    }

    pub fn pixel_count(&self) -> usize {
        self.words.len() * PIXELS_PER_WORD
    }

    pub fn byte_len(&self) -> usize {
        self.pixel_count()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn unpack(&self) -> Vec<Pixel> {
        self.words.iter().flat_map(|&w| unpack_word(w)).collect()
    }

    /// Overwrites `self` with a copy of `other`, reusing the allocation.
    pub(crate) fn assign_from(&mut self, other: &PackedChunk) {
        self.words.clear();
        self.words.extend_from_slice(&other.words);
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.words.iter().flat_map(|&w| unpack_word(w))
    }
}

impl fmt::Debug for PackedChunk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PackedChunk")
            .field("pixel_count", &self.pixel_count())
            .finish()
    }
}

/// Inverse of the packing rule: least-significant byte first.
#[inline]
pub fn unpack_word(word: u32) -> [Pixel; 4] {
    word.to_le_bytes()
}

/// Packs `pixels`; see [`PackedChunk::pack`].
pub fn pack_pixels(pixels: &[Pixel]) -> Result<PackedChunk> {
    PackedChunk::pack(pixels)
}

/// 256 occurrence counts, one per pixel value.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Histogram256 {
    counts: [u64; BINS],
}

impl Default for Histogram256 {
    fn default() -> Self {
        Self::zero()
    }
}

impl Histogram256 {
    pub const fn zero() -> Self {
        Self { counts: [0; BINS] }
    }

    pub const fn from_counts(counts: [u64; BINS]) -> Self {
        Self { counts }
    }

    /// Builds a histogram from sparse `(bin, count)` pairs; later pairs add to earlier ones.
    pub fn from_pairs(pairs: &[(u8, u64)]) -> Self {
        let mut h = Self::zero();
        for &(bin, count) in pairs {
            h.counts[bin as usize] += count;
        }
        h
    }

    pub fn counts(&self) -> &[u64; BINS] {
        &self.counts
    }

    pub fn get(&self, bin: u8) -> u64 {
        self.counts[bin as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// Componentwise sum; fails on 64-bit overflow.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    /// In-place merge. On error `self` is left unchanged.
    pub fn merge_from(&mut self, other: &Self) -> Result<()> {
        let mut sum = [0u64; BINS];
        for (bin, slot) in sum.iter_mut().enumerate() {
            *slot = self.counts[bin]
                .checked_add(other.counts[bin])
                .ok_or(Error::CountOverflow { bin })?;
        }
        self.counts = sum;
        Ok(())
    }

    /// In-place componentwise difference. On error `self` is left unchanged.
    pub fn subtract(&mut self, other: &Self) -> Result<()> {
        let mut diff = [0u64; BINS];
        for (bin, slot) in diff.iter_mut().enumerate() {
            *slot = self.counts[bin]
                .checked_sub(other.counts[bin])
                .ok_or(Error::NegativeCount { bin })?;
        }
        self.counts = diff;
        Ok(())
    }

    /// Unchecked add for serial code paths whose totals are bounded by a chunk size.
    #[inline]
    pub(crate) fn bump(&mut self, bin: usize, by: u64) {
        self.counts[bin] += by;
    }

    /// Bytes occupied by the counts, used to size synthetic transfers.
    pub const fn byte_len() -> usize {
        BINS * std::mem::size_of::<u64>()
    }
}

impl fmt::Debug for Histogram256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nonzero: Vec<_> = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(b, c)| format!("{b}:{c}"))
            .collect();
        write!(f, "Histogram256{{{}}}", nonzero.join(", "))
    }
}

/// Componentwise sum of `a` and `b`.
pub fn merge(a: &Histogram256, b: &Histogram256) -> Result<Histogram256> {
    a.merge(b)
}
