//! Causal-only context model for coding bitmaps without a reference: the ten
//! previously coded neighbours of a pixel, and the ideal code length of an
//! adaptive count-based estimator over those contexts.

use crate::image::BinaryImage;

pub const GENERIC_CONTEXT_BITS: usize = 10;
pub const GENERIC_CONTEXTS: usize = 1 << GENERIC_CONTEXT_BITS;

/// Offsets `(drow, dcol)` of the causal template, LSB first: two pixels to the
/// left on the current row, five on the row above, three two rows up.
pub const GENERIC_TEMPLATE: [(isize, isize); GENERIC_CONTEXT_BITS] = [
    (0, -1),
    (0, -2),
    (-1, -2),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (-1, 2),
    (-2, -1),
    (-2, 0),
    (-2, 1),
];

/// Causal context of `(row, col)`; reads outside `img` are background.
#[inline]
pub fn generic_context(img: &BinaryImage, row: usize, col: usize) -> u16 {
    let (r, c) = (row as isize, col as isize);
    let mut ctx = 0u16;
    for (bit, &(dr, dc)) in GENERIC_TEMPLATE.iter().enumerate() {
        ctx |= (img.get(r + dr, c + dc) as u16) << bit;
    }
    ctx
}

/// Adaptive per-context counts starting at (1, 1); the probability of a bit
/// is its count over the context total, and counts grow after every bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptiveCounts {
    counts: Vec<[u32; 2]>,
}

impl AdaptiveCounts {
    pub fn new(contexts: usize) -> Self {
        Self {
            counts: vec![[1, 1]; contexts],
        }
    }

    /// Current `(c0, c1)` for a context.
    #[inline]
    pub fn get(&self, context: usize) -> (u32, u32) {
        let [a, b] = self.counts[context];
        (a, b)
    }

    #[inline]
    pub fn update(&mut self, context: usize, bit: u8) {
        self.counts[context][bit as usize] += 1;
    }

    /// Ideal code length of `bit` in bits, then update.
    #[inline]
    pub fn cost_and_update(&mut self, context: usize, bit: u8) -> f64 {
        let [c0, c1] = self.counts[context];
        let p = self.counts[context][bit as usize] as f64 / (c0 + c1) as f64;
        self.update(context, bit);
        -p.log2()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Ideal adaptive code length (bits) of every pixel of `img` in raster order
/// under the causal template, starting from fresh counts.
pub fn generic_code_length(img: &BinaryImage) -> f64 {
    let mut model = AdaptiveCounts::new(GENERIC_CONTEXTS);
    let mut bits = 0.0;
    for r in 0..img.height() {
        for c in 0..img.width() {
            bits += model.cost_and_update(generic_context(img, r, c) as usize, img.at(r, c));
        }
    }
    bits
}
