//! Reference contexts between a symbol and a dictionary entry, the Bernoulli
//! context model with its Beta-prior MAP estimate, conditional-entropy code
//! lengths, and the weighted-XOR dissimilarity.
//!
//! # Context template
//!
//! A symbol pixel at `(row, col)` is conditioned on ten bits, packed LSB first:
//!
//! | bit | source | offset (drow, dcol) |
//! |-----|--------|---------------------|
//! | 0   | symbol | W  (0, -1)          |
//! | 1   | symbol | NW (-1, -1)         |
//! | 2   | symbol | N  (-1, 0)          |
//! | 3   | symbol | NE (-1, +1)         |
//! | 4   | entry  | centre (0, 0)       |
//! | 5   | entry  | W  (0, -1)          |
//! | 6   | entry  | E  (0, +1)          |
//! | 7   | entry  | N  (-1, 0)          |
//! | 8   | entry  | S  (+1, 0)          |
//! | 9   | entry  | NW (-1, -1)         |
//!
//! Entry offsets are taken around the aligned position `(row + dy, col + dx)`.
//! Reads outside either bitmap are background. The learner, the restoration
//! prior and the refinement coder all use [`TEMPLATE`].

use crate::error::{Error, Result};
use crate::image::BinaryImage;

pub const CONTEXT_BITS: usize = 10;
pub const NUM_CONTEXTS: usize = 1 << CONTEXT_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateSource {
    Symbol,
    Entry,
}

/// The frozen reference-context template, in bit order.
pub const TEMPLATE: [(TemplateSource, isize, isize); CONTEXT_BITS] = [
    (TemplateSource::Symbol, 0, -1),
    (TemplateSource::Symbol, -1, -1),
    (TemplateSource::Symbol, -1, 0),
    (TemplateSource::Symbol, -1, 1),
    (TemplateSource::Entry, 0, 0),
    (TemplateSource::Entry, 0, -1),
    (TemplateSource::Entry, 0, 1),
    (TemplateSource::Entry, -1, 0),
    (TemplateSource::Entry, 1, 0),
    (TemplateSource::Entry, -1, -1),
];

/// Symbol pixels whose context reads a given symbol pixel, as offsets from
/// that pixel (the mirror of the causal part of [`TEMPLATE`]).
pub const CAUSAL_DEPENDENTS: [(isize, isize); 4] = [(0, 1), (1, 1), (1, 0), (1, -1)];

/// Offset mapping symbol coordinates onto entry coordinates:
/// entry `(row + dy, col + dx)` lines up with symbol `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Alignment {
    pub dy: i32,
    pub dx: i32,
}

/// Ink centroid as exact rationals `(row_sum / n, col_sum / n)`; empty
/// bitmaps use the box centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Centroid {
    row_sum: i64,
    col_sum: i64,
    n: i64,
}

impl Centroid {
    pub fn of(b: &BinaryImage) -> Self {
        let (mut row_sum, mut col_sum, mut n) = (0i64, 0i64, 0i64);
        for (i, &p) in b.pixels().iter().enumerate() {
            if p != 0 {
                row_sum += (i / b.width()) as i64;
                col_sum += (i % b.width()) as i64;
                n += 1;
            }
        }
        if n == 0 {
            Self {
                row_sum: b.height() as i64 - 1,
                col_sum: b.width() as i64 - 1,
                n: 2,
            }
        } else {
            Self { row_sum, col_sum, n }
        }
    }

    /// Offset putting `entry`'s centroid on top of `self`.
    pub fn align_to(&self, entry: &Centroid) -> Alignment {
        let den = self.n * entry.n;
        Alignment {
            dy: round_half_down(entry.row_sum * self.n - self.row_sum * entry.n, den),
            dx: round_half_down(entry.col_sum * self.n - self.col_sum * entry.n, den),
        }
    }
}

/// Rounds `num / den` (den > 0) to the nearest integer, halves downward.
fn round_half_down(num: i64, den: i64) -> i32 {
    // ceil((2 num - den) / (2 den))
    let p = 2 * num - den;
    let q = 2 * den;
    (-((-p).div_euclid(q))) as i32
}

/// Aligns centroids, rounding to the nearest integer offset; exact half-pixel
/// ties go toward the top-left.
pub fn centroid_alignment(sym: &BinaryImage, entry: &BinaryImage) -> Alignment {
    Centroid::of(sym).align_to(&Centroid::of(entry))
}

/// Packed context for one pixel; assumes `(row, col)` is inside `sym`.
#[inline]
fn context_at(sym: &BinaryImage, entry: &BinaryImage, row: isize, col: isize, al: Alignment) -> u16 {
    let er = row + al.dy as isize;
    let ec = col + al.dx as isize;
    (sym.get(row, col - 1) as u16)
        | (sym.get(row - 1, col - 1) as u16) << 1
        | (sym.get(row - 1, col) as u16) << 2
        | (sym.get(row - 1, col + 1) as u16) << 3
        | (entry.get(er, ec) as u16) << 4
        | (entry.get(er, ec - 1) as u16) << 5
        | (entry.get(er, ec + 1) as u16) << 6
        | (entry.get(er - 1, ec) as u16) << 7
        | (entry.get(er + 1, ec) as u16) << 8
        | (entry.get(er - 1, ec - 1) as u16) << 9
}

/// The 10-bit reference context of symbol pixel `(row, col)`.
pub fn reference_context(
    sym: &BinaryImage,
    entry: &BinaryImage,
    row: usize,
    col: usize,
    alignment: Alignment,
) -> Result<u16> {
    if row >= sym.height() || col >= sym.width() {
        return Err(Error::OutOfBounds {
            index: row * sym.width() + col,
            len: sym.len(),
        });
    }
    Ok(context_at(sym, entry, row as isize, col as isize, alignment))
}

/// Calls `f(context, bit)` for every symbol pixel in raster order.
pub fn for_each_context(sym: &BinaryImage, entry: &BinaryImage, alignment: Alignment, mut f: impl FnMut(u16, u8)) {
    let (w, h) = (sym.width(), sym.height());
    let pw = w + 2;
    // symbol rows -1..h and entry rows -1..=h, both in symbol coordinates
    // with a one-pixel frame, so the inner loop needs no bounds logic
    let mut s = vec![0u8; (h + 1) * pw];
    for r in 0..h {
        s[(r + 1) * pw + 1..(r + 1) * pw + 1 + w].copy_from_slice(&sym.pixels()[r * w..(r + 1) * w]);
    }
    let mut e = vec![0u8; (h + 2) * pw];
    let (dy, dx) = (alignment.dy as isize, alignment.dx as isize);
    let (ew, eh) = (entry.width() as isize, entry.height() as isize);
    let c_lo = (1 - dx).max(0);
    let c_hi = (ew + 1 - dx).min(pw as isize);
    if c_lo < c_hi {
        for r in 0..h + 2 {
            let er = r as isize - 1 + dy;
            if er < 0 || er >= eh {
                continue;
            }
            let src = (er * ew + c_lo - 1 + dx) as usize;
            let len = (c_hi - c_lo) as usize;
            let dst = r * pw + c_lo as usize;
            e[dst..dst + len].copy_from_slice(&entry.pixels()[src..src + len]);
        }
    }
    for r in 0..h {
        for c in 0..w {
            let k = (r + 1) * pw + c + 1;
            let ctx = s[k - 1] as u16
                | (s[k - pw - 1] as u16) << 1
                | (s[k - pw] as u16) << 2
                | (s[k - pw + 1] as u16) << 3
                | (e[k] as u16) << 4
                | (e[k - 1] as u16) << 5
                | (e[k + 1] as u16) << 6
                | (e[k - pw] as u16) << 7
                | (e[k + pw] as u16) << 8
                | (e[k - pw - 1] as u16) << 9;
            f(ctx, s[k]);
        }
    }
}

/// Per-context counts of observed 0 and 1 pixels.
#[derive(Clone, PartialEq, Eq)]
pub struct ContextCounts {
    counts: Vec<[u64; 2]>,
}

impl Default for ContextCounts {
    fn default() -> Self {
        Self {
            counts: vec![[0; 2]; NUM_CONTEXTS],
        }
    }
}

impl std::fmt::Debug for ContextCounts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ContextCounts {{ total: {} }}", self.total())
    }
}

impl ContextCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: &[[u64; 2]]) -> Self {
        assert_eq!(pairs.len(), NUM_CONTEXTS);
        Self { counts: pairs.to_vec() }
    }

    #[inline]
    pub fn add(&mut self, context: u16, bit: u8) {
        self.counts[context as usize][bit as usize] += 1;
    }

    /// Counts every pixel of `sym` against `entry`.
    pub fn add_pair(&mut self, sym: &BinaryImage, entry: &BinaryImage, alignment: Alignment) {
        for_each_context(sym, entry, alignment, |c, b| self.add(c, b));
    }

    pub fn merge(&mut self, other: &ContextCounts) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a[0] += b[0];
            a[1] += b[1];
        }
    }

    /// `(n0, n1)` for one context.
    pub fn get(&self, context: usize) -> (u64, u64) {
        let [n0, n1] = self.counts[context];
        (n0, n1)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|c| c[0] + c[1]).sum()
    }
}

/// Bernoulli context model: `phi[c]` is the probability that a pixel under
/// context `c` is **background (0)**.
#[derive(Clone, PartialEq)]
pub struct ContextModel {
    phi: Vec<f64>,
    hyper_a: f64,
    hyper_b: f64,
    /// `-log2 phi`, `-log2 (1 - phi)` per context.
    bits: Vec<[f64; 2]>,
}

impl std::fmt::Debug for ContextModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContextModel")
            .field("a", &self.hyper_a)
            .field("b", &self.hyper_b)
            .finish_non_exhaustive()
    }
}

impl ContextModel {
    /// Model from explicit probabilities; each must lie strictly in (0, 1).
    pub fn from_phi(phi: Vec<f64>, hyper_a: f64, hyper_b: f64) -> Result<Self> {
        if phi.len() != NUM_CONTEXTS {
            return Err(Error::Config(format!(
                "context model needs {NUM_CONTEXTS} entries, got {}",
                phi.len()
            )));
        }
        if let Some(bad) = phi.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::Config(format!("phi {bad} outside (0, 1)")));
        }
        let bits = phi.iter().map(|&p| [-p.log2(), -(1.0 - p).log2()]).collect();
        Ok(Self {
            phi,
            hyper_a,
            hyper_b,
            bits,
        })
    }

    /// Every context at probability one half.
    pub fn uniform() -> Self {
        Self::from_phi(vec![0.5; NUM_CONTEXTS], 2.0, 2.0).expect("valid")
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn hyper(&self) -> (f64, f64) {
        (self.hyper_a, self.hyper_b)
    }

    /// Code length in bits of `bit` under `context`.
    #[inline]
    pub fn bits(&self, context: u16, bit: u8) -> f64 {
        self.bits[context as usize][bit as usize]
    }

    /// `-ln Beta(phi_c | a, b)` summed over all contexts, in nats.
    pub fn neg_log_prior(&self) -> f64 {
        let (a, b) = (self.hyper_a, self.hyper_b);
        let log_norm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
        self.phi
            .iter()
            .map(|&p| -(log_norm + (a - 1.0) * p.ln() + (b - 1.0) * (1.0 - p).ln()))
            .sum()
    }

    /// Versioned little-endian blob: `b"MBCM"`, version byte, a, b, then the
    /// 1024 probabilities in context order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + 16 + 8 * NUM_CONTEXTS);
        out.extend_from_slice(b"MBCM");
        out.push(1);
        out.extend_from_slice(&self.hyper_a.to_le_bytes());
        out.extend_from_slice(&self.hyper_b.to_le_bytes());
        for p in &self.phi {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        if data.len() < 5 || &data[..4] != b"MBCM" {
            return Err(Error::BadMagic);
        }
        if data[4] != 1 {
            return Err(Error::UnsupportedVersion(data[4]));
        }
        let expected = 5 + 16 + 8 * NUM_CONTEXTS;
        if data.len() < expected {
            return Err(Error::Truncated(format!("context model needs {expected} bytes")));
        }
        if data.len() > expected {
            return Err(Error::TrailingBytes(data.len() - expected));
        }
        let f = |i: usize| f64::from_le_bytes(data[i..i + 8].try_into().expect("8 bytes"));
        let phi = (0..NUM_CONTEXTS).map(|c| f(21 + 8 * c)).collect();
        Self::from_phi(phi, f(5), f(13))
    }
}

/// Lanczos approximation of `ln Γ(x)` for `x > 0`.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// MAP estimate of the context model under a Beta(a, b) prior:
/// `phi_c = (n0 + a - 1) / (n0 + n1 + a + b - 2)`. Requires `a, b > 1`.
pub fn estimate_phi(counts: &ContextCounts, a: f64, b: f64) -> Result<ContextModel> {
    if !(a > 1.0 && b > 1.0) {
        return Err(Error::Config(format!(
            "Beta shapes must exceed 1 for an interior MAP estimate, got a={a}, b={b}"
        )));
    }
    let phi = counts
        .counts
        .iter()
        .map(|&[n0, n1]| (n0 as f64 + a - 1.0) / ((n0 + n1) as f64 + a + b - 2.0))
        .collect();
    ContextModel::from_phi(phi, a, b)
}

/// Conditional-entropy code length of `sym` given `entry`, in bits.
pub fn cee_bits(sym: &BinaryImage, entry: &BinaryImage, alignment: Alignment, model: &ContextModel) -> f64 {
    let mut total = 0.0;
    for_each_context(sym, entry, alignment, |c, b| total += model.bits(c, b));
    total
}

/// How mismatched pixels are weighted by [`wxor_dissimilarity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WxorScheme {
    /// `true`: weight = 1 + mismatched 8-neighbours. `false`: plain XOR.
    pub clustered: bool,
    /// Divide by the number of compared pixels.
    pub normalize: bool,
}

impl WxorScheme {
    pub const WXOR: Self = Self {
        clustered: true,
        normalize: false,
    };
    pub const XOR: Self = Self {
        clustered: false,
        normalize: false,
    };
}

impl Default for WxorScheme {
    fn default() -> Self {
        Self::WXOR
    }
}

/// Weighted Hamming distance over the union of the symbol box and the aligned
/// entry box.
pub fn wxor_dissimilarity(sym: &BinaryImage, entry: &BinaryImage, alignment: Alignment, scheme: WxorScheme) -> f64 {
    let (dy, dx) = (alignment.dy as isize, alignment.dx as isize);
    // union region in symbol coordinates
    let r0 = 0.min(-dy);
    let c0 = 0.min(-dx);
    let r1 = (sym.height() as isize).max(entry.height() as isize - dy);
    let c1 = (sym.width() as isize).max(entry.width() as isize - dx);
    let (h, w) = ((r1 - r0) as usize, (c1 - c0) as usize);
    let mut diff = vec![0u8; w * h];
    for r in 0..h {
        for c in 0..w {
            let (sr, sc) = (r as isize + r0, c as isize + c0);
            diff[r * w + c] = sym.get(sr, sc) ^ entry.get(sr + dy, sc + dx);
        }
    }
    let mut total = 0.0;
    for r in 0..h {
        for c in 0..w {
            if diff[r * w + c] == 0 {
                continue;
            }
            let mut weight = 1.0;
            if scheme.clustered {
                for rr in r.saturating_sub(1)..(r + 2).min(h) {
                    for cc in c.saturating_sub(1)..(c + 2).min(w) {
                        if (rr, cc) != (r, c) && diff[rr * w + cc] != 0 {
                            weight += 1.0;
                        }
                    }
                }
            }
            total += weight;
        }
    }
    if scheme.normalize {
        total / (w * h) as f64
    } else {
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(rows: &[&str]) -> BinaryImage {
        BinaryImage::from_ascii(rows).unwrap()
    }

    /// Independent template evaluation straight from the offset table.
    fn context_from_table(sym: &BinaryImage, entry: &BinaryImage, r: isize, c: isize, al: Alignment) -> u16 {
        TEMPLATE
            .iter()
            .enumerate()
            .map(|(bit, &(src, dr, dc))| {
                let v = match src {
                    TemplateSource::Symbol => sym.get(r + dr, c + dc),
                    TemplateSource::Entry => entry.get(r + al.dy as isize + dr, c + al.dx as isize + dc),
                };
                (v as u16) << bit
            })
            .sum()
    }

    #[test]
    fn all_zero_context_is_zero() {
        let s = BinaryImage::new(4, 3).unwrap();
        let e = BinaryImage::new(4, 3).unwrap();
        for r in 0..3 {
            for c in 0..4 {
                assert_eq!(reference_context(&s, &e, r, c, Alignment::default()).unwrap(), 0);
            }
        }
    }

    #[test]
    fn all_one_interior_context_is_1023() {
        let s = BinaryImage::new(5, 5).unwrap().complement();
        let e = s.clone();
        assert_eq!(reference_context(&s, &e, 2, 2, Alignment::default()).unwrap(), 1023);
    }

    #[test]
    fn hand_packed_3x3_contexts() {
        let s = img(&["#.#", ".#.", "##."]);
        let e = img(&[".#.", "###", ".#."]);
        let al = Alignment::default();
        // (row, col) -> bits written out by hand:
        // sym W, NW, N, NE | entry C, W, E, N, S, NW
        let expected: [((usize, usize), [u8; 10]); 4] = [
            ((0, 0), [0, 0, 0, 0, 0, 0, 1, 0, 1, 0]),
            ((1, 1), [0, 1, 0, 1, 1, 1, 1, 1, 1, 0]),
            ((2, 1), [1, 0, 1, 0, 1, 0, 0, 1, 0, 1]),
            ((1, 2), [1, 0, 1, 0, 1, 1, 0, 0, 0, 1]),
        ];
        for ((r, c), bits) in expected {
            let packed: u16 = bits.iter().enumerate().map(|(i, &b)| (b as u16) << i).sum();
            assert_eq!(reference_context(&s, &e, r, c, al).unwrap(), packed, "pixel ({r},{c})");
        }
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(
                    reference_context(&s, &e, r, c, al).unwrap(),
                    context_from_table(&s, &e, r as isize, c as isize, al)
                );
            }
        }
        assert!(reference_context(&s, &e, 3, 0, al).is_err());
    }

    #[test]
    fn phi_closed_form_examples() {
        let mut pairs = vec![[0u64; 2]; NUM_CONTEXTS];
        pairs[1] = [3, 1];
        pairs[2] = [1_000_000, 0];
        let m = estimate_phi(&ContextCounts::from_pairs(&pairs), 2.0, 2.0).unwrap();
        assert_eq!(m.phi()[0], 0.5);
        assert!((m.phi()[1] - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.phi()[2], 1_000_001.0 / 1_000_002.0);
        assert!(m.phi()[2] < 1.0);
        assert!(estimate_phi(&ContextCounts::new(), 1.0, 2.0).is_err());
    }

    #[test]
    fn phi_is_probability_of_background() {
        let s = BinaryImage::new(3, 3).unwrap();
        let mut counts = ContextCounts::new();
        counts.add_pair(&s, &s, Alignment::default());
        let m = estimate_phi(&counts, 2.0, 2.0).unwrap();
        // nine zeros under context 0 -> phi_0 = 10/11 and background is cheap
        assert!((m.phi()[0] - 10.0 / 11.0).abs() < 1e-15);
        assert!(m.bits(0, 0) < m.bits(0, 1));
    }

    #[test]
    fn accumulate_two_by_two_zero_symbol() {
        let s = BinaryImage::new(2, 2).unwrap();
        let mut counts = ContextCounts::new();
        counts.add_pair(&s, &s, Alignment::default());
        assert_eq!(counts.get(0), (4, 0));
        assert_eq!(counts.total(), 4);
    }

    #[test]
    fn uniform_model_costs_one_bit_per_pixel() {
        let s = img(&["#.#.", ".##.", "####"]);
        let e = img(&["##", "#."]);
        let bits = cee_bits(&s, &e, centroid_alignment(&s, &e), &ContextModel::uniform());
        assert_eq!(bits, 12.0);
    }

    #[test]
    fn trained_model_prefers_the_identical_entry() {
        let s = img(&[".##.", "#..#", "####", "#..#"]);
        let mut counts = ContextCounts::new();
        counts.add_pair(&s, &s, Alignment::default());
        let m = estimate_phi(&counts, 2.0, 2.0).unwrap();
        let trained = cee_bits(&s, &s, Alignment::default(), &m);
        assert!(trained < 16.0);
        assert!(trained > 0.0);
    }

    #[test]
    fn wxor_examples() {
        let a = img(&["....", ".##.", ".##.", "...."]);
        let zero = BinaryImage::new(4, 4).unwrap();
        let al = Alignment::default();
        assert_eq!(wxor_dissimilarity(&a, &a, al, WxorScheme::WXOR), 0.0);
        assert_eq!(wxor_dissimilarity(&a, &zero, al, WxorScheme::WXOR), 16.0);
        assert_eq!(wxor_dissimilarity(&a, &zero, al, WxorScheme::XOR), 4.0);
        let b = img(&["#...", ".##.", ".##.", "...."]);
        assert_eq!(wxor_dissimilarity(&a, &b, al, WxorScheme::WXOR), 1.0);
        let norm = WxorScheme {
            clustered: true,
            normalize: true,
        };
        assert_eq!(wxor_dissimilarity(&a, &zero, al, norm), 1.0);
    }

    #[test]
    fn wxor_compares_over_the_union_of_boxes() {
        let a = img(&["#"]);
        let b = img(&["##"]);
        // b is wider; its extra column counts as one mismatch
        assert_eq!(wxor_dissimilarity(&a, &b, Alignment::default(), WxorScheme::WXOR), 1.0);
        assert_eq!(wxor_dissimilarity(&b, &a, Alignment::default(), WxorScheme::WXOR), 1.0);
    }

    #[test]
    fn centroid_alignment_rounding() {
        let a = img(&["#.."]);
        let b = img(&["..#"]);
        assert_eq!(centroid_alignment(&a, &b), Alignment { dy: 0, dx: 2 });
        assert_eq!(centroid_alignment(&b, &a), Alignment { dy: 0, dx: -2 });
        // half-pixel offsets round toward the top-left
        let c = img(&["##."]);
        assert_eq!(centroid_alignment(&a, &c), Alignment { dy: 0, dx: 0 });
        assert_eq!(centroid_alignment(&c, &a), Alignment { dy: 0, dx: -1 });
        assert_eq!(round_half_down(5, 2), 2);
        assert_eq!(round_half_down(-5, 2), -3);
        assert_eq!(round_half_down(7, 3), 2);
        assert_eq!(round_half_down(-7, 3), -2);
    }

    #[test]
    fn model_blob_round_trip() {
        let mut pairs = vec![[0u64; 2]; NUM_CONTEXTS];
        pairs[7] = [9, 2];
        let m = estimate_phi(&ContextCounts::from_pairs(&pairs), 2.0, 3.0).unwrap();
        let bytes = m.to_bytes();
        assert_eq!(ContextModel::from_bytes(&bytes).unwrap(), m);
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(
            ContextModel::from_bytes(&v2),
            Err(Error::UnsupportedVersion(2))
        ));
        assert!(matches!(
            ContextModel::from_bytes(&bytes[..100]),
            Err(Error::Truncated(_))
        ));
    }

    #[test]
    fn ln_gamma_reference_values() {
        assert!(ln_gamma(1.0).abs() < 1e-12);
        assert!(ln_gamma(2.0).abs() < 1e-12);
        assert!((ln_gamma(4.0) - 6f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    /// The per-context MAP objective: n0 ln p + n1 ln(1-p) + (a-1) ln p + (b-1) ln(1-p).
    fn map_objective(n0: f64, n1: f64, a: f64, b: f64, p: f64) -> f64 {
        (n0 + a - 1.0) * p.ln() + (n1 + b - 1.0) * (1.0 - p).ln()
    }

    #[test]
    fn closed_form_beats_grid_search() {
        let mut state = 0x9E37_79B9_7F4A_7C15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state % 200
        };
        let mut pairs = vec![[0u64; 2]; NUM_CONTEXTS];
        for p in pairs.iter_mut().take(64) {
            *p = [next(), next()];
        }
        let m = estimate_phi(&ContextCounts::from_pairs(&pairs), 2.0, 2.0).unwrap();
        for (c, &[n0, n1]) in pairs.iter().enumerate().take(64) {
            let best = map_objective(n0 as f64, n1 as f64, 2.0, 2.0, m.phi()[c]);
            for k in 1..1000 {
                let p = k as f64 / 1000.0;
                assert!(map_objective(n0 as f64, n1 as f64, 2.0, 2.0, p) <= best + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn cee_matches_per_pixel_oracle(
            sbits in prop::collection::vec(any::<bool>(), 30),
            ebits in prop::collection::vec(any::<bool>(), 24),
            dy in -2i32..3, dx in -2i32..3,
            seed in any::<u64>(),
        ) {
            let s = BinaryImage::from_pixels(6, 5, sbits.iter().map(|&b| b as u8).collect()).unwrap();
            let e = BinaryImage::from_pixels(4, 6, ebits.iter().map(|&b| b as u8).collect()).unwrap();
            let mut st = seed | 1;
            let phi: Vec<f64> = (0..NUM_CONTEXTS).map(|_| {
                st ^= st << 13; st ^= st >> 7; st ^= st << 17;
                0.01 + 0.98 * ((st >> 11) as f64 / (1u64 << 53) as f64)
            }).collect();
            let m = ContextModel::from_phi(phi.clone(), 2.0, 2.0).unwrap();
            let al = Alignment { dy, dx };
            let mut oracle = 0.0;
            for r in 0..5 {
                for c in 0..6 {
                    let ctx = context_from_table(&s, &e, r, c, al) as usize;
                    let v = s.get(r, c);
                    let p = if v == 0 { phi[ctx] } else { 1.0 - phi[ctx] };
                    oracle -= p.log2();
                }
            }
            prop_assert!((cee_bits(&s, &e, al, &m) - oracle).abs() < 1e-9);
            prop_assert_eq!(cee_bits(&s, &e, al, &ContextModel::uniform()), 30.0);
            let again = cee_bits(&s, &e, al, &m);
            prop_assert_eq!(again, cee_bits(&s, &e, al, &m));
        }

        #[test]
        fn training_never_costs_more_than_uniform(
            sbits in prop::collection::vec(any::<bool>(), 3 * 20),
        ) {
            let syms: Vec<BinaryImage> = sbits.chunks(20)
                .map(|ch| BinaryImage::from_pixels(5, 4, ch.iter().map(|&b| b as u8).collect()).unwrap())
                .collect();
            let entry = &syms[0];
            let mut counts = ContextCounts::new();
            for s in &syms {
                counts.add_pair(s, entry, centroid_alignment(s, entry));
            }
            prop_assert_eq!(counts.total(), 60);
            let m = estimate_phi(&counts, 2.0, 2.0).unwrap();
            let trained: f64 = syms.iter().map(|s| cee_bits(s, entry, centroid_alignment(s, entry), &m)).sum();
            prop_assert!(trained <= 60.0 + 1e-9);
        }
    }
}
