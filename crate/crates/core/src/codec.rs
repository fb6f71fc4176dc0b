//! Lossless symbol-dictionary bitstream.
//!
//! Layout (integers little-endian):
//!
//! ```text
//! "MBDL" | version u8 | width u32 | height u32 | symbols u32 | entries u32
//! dictionary  u32 length | u32 entry count, then coded entries
//! placements  u32 length | coded entry ids, positions, sizes, alignments
//! refinements u32 length | coded symbol pixels against their entries
//! residual    u32 length | flag u8, then coded pixels outside symbol boxes
//! ```
//!
//! All coded data uses the adaptive binary range coder of [`crate::arith`].

use std::fmt;
use std::str::FromStr;

use crate::arith::{ArithDecoder, ArithEncoder, IntContexts, INT_CONTEXTS};
use crate::context::{cee_bits, for_each_context, reference_context, Alignment, NUM_CONTEXTS};
use crate::dictionary::{
    build_dictionary_wxor, entry_cost, fit_context_model, learn_dictionary, remap_symbols, Dictionary, SymbolMapping,
};
use crate::error::{Error, Result};
use crate::generic::{generic_context, AdaptiveCounts, GENERIC_CONTEXTS};
use crate::image::BinaryImage;
use crate::restore::{restore, restore_mrf, RestorationConfig, RestorationState, TraceRow};
use crate::symbols::{Segmentation, Symbol};

pub const MAGIC: &[u8; 4] = b"MBDL";
pub const VERSION: u8 = 1;
/// Pages larger than this are refused by the decoder.
pub const MAX_DECODE_PIXELS: usize = 1 << 26;
const HEADER_LEN: usize = 4 + 1 + 16;
const SEGMENT_NAMES: [&str; 4] = ["dictionary", "placements", "refinements", "residual"];

/// Byte sizes of the four segments, excluding their length prefixes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SegmentSizes {
    pub dictionary: usize,
    pub placements: usize,
    pub refinements: usize,
    pub residual: usize,
}

/// Final adaptive-context state of each stream-wide coder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoderCounts {
    pub placements: AdaptiveCounts,
    pub refinements: AdaptiveCounts,
    pub residual: AdaptiveCounts,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Config(format!("{v} does not fit in 32 bits")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Truncated(format!(
                "{what}: need {n} bytes, {} left",
                self.data.len() - self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

/// Coded length check: a segment must be consumed exactly.
fn check_consumed(segment: &'static str, declared: usize, consumed: usize) -> Result<()> {
    if declared != consumed {
        return Err(Error::SegmentLength {
            segment,
            declared,
            consumed,
        });
    }
    Ok(())
}

/// Entry count, then per entry its 16-bit width and height and its pixels
/// under the causal template, with fresh adaptive counts for each entry.
pub fn encode_dictionary(dict: &Dictionary) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    put_u32(&mut out, dict.len())?;
    if dict.is_empty() {
        return Ok(out);
    }
    let mut enc = ArithEncoder::new(GENERIC_CONTEXTS);
    for e in dict.entries() {
        let b = &e.bitmap;
        if b.width() > u16::MAX as usize || b.height() > u16::MAX as usize {
            return Err(Error::EntryTooLarge {
                width: b.width(),
                height: b.height(),
            });
        }
        enc.reset_counts();
        enc.encode_raw(b.width() as u32, 16);
        enc.encode_raw(b.height() as u32, 16);
        for r in 0..b.height() {
            for c in 0..b.width() {
                enc.encode_bit(b.at(r, c), generic_context(b, r, c) as usize);
            }
        }
    }
    out.extend(enc.finish());
    Ok(out)
}

/// Inverse of [`encode_dictionary`]; the segment must be consumed exactly.
pub fn decode_dictionary(segment: &[u8], max_pixels: usize) -> Result<Dictionary> {
    let mut rd = Reader { data: segment, pos: 0 };
    let count = rd.u32("dictionary count")?;
    if count == 0 {
        return check_consumed("dictionary", segment.len(), 4).map(|_| Dictionary::default());
    }
    let mut dec = ArithDecoder::new(&segment[4..], GENERIC_CONTEXTS)?;
    let mut bitmaps = Vec::new();
    for _ in 0..count {
        dec.reset_counts();
        let w = dec.decode_raw(16)? as usize;
        let h = dec.decode_raw(16)? as usize;
        if w == 0 || h == 0 || w * h > max_pixels {
            return Err(Error::Corrupt(format!("dictionary entry of size {w}x{h}")));
        }
        let mut b = BinaryImage::new(w, h)?;
        for r in 0..h {
            for c in 0..w {
                if dec.decode_bit(generic_context(&b, r, c) as usize)? == 1 {
                    b.set(r, c, true);
                }
            }
        }
        bitmaps.push(b);
    }
    check_consumed("dictionary", segment.len(), 4 + dec.consumed())?;
    Ok(Dictionary::new(bitmaps))
}

/// Context layout of the placement coder: an entry-id tree followed by six
/// integer fields.
struct PlacementContexts {
    id_bits: u32,
    fields: [IntContexts; 6],
    total: usize,
}

impl PlacementContexts {
    fn new(entries: usize) -> Self {
        let id_bits = usize::BITS - entries.saturating_sub(1).leading_zeros();
        let tree = 1usize << id_bits;
        Self {
            id_bits,
            fields: std::array::from_fn(|k| IntContexts::new(tree + k * INT_CONTEXTS)),
            total: tree + 6 * INT_CONTEXTS,
        }
    }

    fn encode_id(&self, enc: &mut ArithEncoder, id: usize) {
        let mut node = 1;
        for k in (0..self.id_bits).rev() {
            let bit = ((id >> k) & 1) as u8;
            enc.encode_bit(bit, node);
            node = (node << 1) | bit as usize;
        }
    }

    fn decode_id(&self, dec: &mut ArithDecoder) -> Result<usize> {
        let mut node = 1;
        for _ in 0..self.id_bits {
            node = (node << 1) | dec.decode_bit(node)? as usize;
        }
        Ok(node - (1 << self.id_bits))
    }
}

struct Placement {
    entry: usize,
    row: usize,
    col: usize,
    width: usize,
    height: usize,
    alignment: Alignment,
}

/// Codes `x` with the given dictionary; `mapping` must cover the symbols of
/// `x` as extracted with `max_symbol_area`.
pub fn encode_image(
    x: &BinaryImage,
    dict: &Dictionary,
    mapping: &SymbolMapping,
    max_symbol_area: usize,
) -> Result<Vec<u8>> {
    encode_image_traced(x, dict, mapping, max_symbol_area).map(|(bytes, _, _)| bytes)
}

/// [`encode_image`], also returning segment sizes and final coder state.
pub fn encode_image_traced(
    x: &BinaryImage,
    dict: &Dictionary,
    mapping: &SymbolMapping,
    max_symbol_area: usize,
) -> Result<(Vec<u8>, SegmentSizes, CoderCounts)> {
    let seg = Segmentation::new(x, max_symbol_area);
    let symbols = &seg.symbols;
    if mapping.assign.len() != symbols.len() || mapping.alignment.len() != symbols.len() {
        return Err(Error::InconsistentMapping(format!(
            "{} symbols but {} mapped",
            symbols.len(),
            mapping.assign.len()
        )));
    }
    if let Some(i) = mapping.assign.iter().position(|&j| j >= dict.len()) {
        return Err(Error::InconsistentMapping(format!(
            "symbol {i} maps to entry {} of {}",
            mapping.assign[i],
            dict.len()
        )));
    }

    let dictionary = encode_dictionary(dict)?;
    let (placements, placement_counts) = encode_placements(symbols, dict, mapping);
    let (refinements, refinement_counts) = encode_refinements(symbols, dict, mapping);
    let (residual, residual_counts) = encode_residual(x, symbols);

    let mut out =
        Vec::with_capacity(HEADER_LEN + 16 + dictionary.len() + placements.len() + refinements.len() + residual.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    for v in [x.width(), x.height(), symbols.len(), dict.len()] {
        put_u32(&mut out, v)?;
    }
    for s in [&dictionary, &placements, &refinements, &residual] {
        put_u32(&mut out, s.len())?;
        out.extend_from_slice(s);
    }
    let sizes = SegmentSizes {
        dictionary: dictionary.len(),
        placements: placements.len(),
        refinements: refinements.len(),
        residual: residual.len(),
    };
    let counts = CoderCounts {
        placements: placement_counts,
        refinements: refinement_counts,
        residual: residual_counts,
    };
    Ok((out, sizes, counts))
}

fn encode_placements(symbols: &[Symbol], dict: &Dictionary, mapping: &SymbolMapping) -> (Vec<u8>, AdaptiveCounts) {
    let ctx = PlacementContexts::new(dict.len());
    if symbols.is_empty() {
        return (Vec::new(), AdaptiveCounts::new(ctx.total));
    }
    let mut enc = ArithEncoder::new(ctx.total);
    let (mut prev_row, mut prev_col) = (0i64, 0i64);
    for (i, s) in symbols.iter().enumerate() {
        let j = mapping.assign[i];
        let entry = dict.bitmap(j);
        let al = mapping.alignment[i];
        ctx.encode_id(&mut enc, j);
        let values = [
            s.row as i64 - prev_row,
            s.col as i64 - prev_col,
            s.width() as i64 - entry.width() as i64,
            s.height() as i64 - entry.height() as i64,
            al.dy as i64,
            al.dx as i64,
        ];
        for (field, v) in ctx.fields.iter().zip(values) {
            field.encode(&mut enc, v);
        }
        (prev_row, prev_col) = (s.row as i64, s.col as i64);
    }
    enc.finish_with_counts()
}

fn encode_refinements(symbols: &[Symbol], dict: &Dictionary, mapping: &SymbolMapping) -> (Vec<u8>, AdaptiveCounts) {
    if symbols.is_empty() {
        return (Vec::new(), AdaptiveCounts::new(NUM_CONTEXTS));
    }
    let mut enc = ArithEncoder::new(NUM_CONTEXTS);
    for (i, s) in symbols.iter().enumerate() {
        let entry = dict.bitmap(mapping.assign[i]);
        for_each_context(&s.bitmap, entry, mapping.alignment[i], |c, bit| {
            enc.encode_bit(bit, c as usize)
        });
    }
    enc.finish_with_counts()
}

/// Union of symbol boxes, and the OR of the symbol bitmaps.
fn box_cover(width: usize, height: usize, symbols: &[Symbol]) -> (Vec<bool>, BinaryImage) {
    let mut mask = vec![false; width * height];
    let mut painted = BinaryImage::new(width, height).expect("non-empty page");
    for s in symbols {
        for r in s.row..s.row + s.height() {
            mask[r * width + s.col..r * width + s.col + s.width()].fill(true);
        }
        painted.paste_or(&s.bitmap, s.row, s.col);
    }
    (mask, painted)
}

/// Pixels the residual coder visits: everything outside the symbol boxes,
/// plus (if `corrections`) box pixels the symbols leave blank.
#[inline]
fn in_residual(mask: &[bool], painted: &BinaryImage, corrections: bool, p: usize) -> bool {
    !mask[p] || (corrections && painted.pixels()[p] == 0)
}

fn encode_residual(x: &BinaryImage, symbols: &[Symbol]) -> (Vec<u8>, AdaptiveCounts) {
    let (mask, painted) = box_cover(x.width(), x.height(), symbols);
    // ink of oversized components can fall inside symbol boxes
    let corrections = (0..x.len()).any(|p| mask[p] && x.pixels()[p] == 1 && painted.pixels()[p] == 0);
    let mut enc = ArithEncoder::new(GENERIC_CONTEXTS);
    let w = x.width();
    for p in 0..x.len() {
        if in_residual(&mask, &painted, corrections, p) {
            enc.encode_bit(x.pixels()[p], generic_context(x, p / w, p % w) as usize);
        }
    }
    let (coded, counts) = enc.finish_with_counts();
    let mut out = vec![corrections as u8];
    out.extend(coded);
    (out, counts)
}

/// Reconstructs the page coded in `bytes`.
pub fn decode(bytes: &[u8]) -> Result<BinaryImage> {
    decode_traced(bytes).map(|(img, _)| img)
}

/// [`decode`], also returning the final coder state.
pub fn decode_traced(bytes: &[u8]) -> Result<(BinaryImage, CoderCounts)> {
    let mut rd = Reader { data: bytes, pos: 0 };
    if rd.take(4, "magic").map_err(|_| Error::BadMagic)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = rd.take(1, "version")?[0];
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let width = rd.u32("width")?;
    let height = rd.u32("height")?;
    let n_symbols = rd.u32("symbol count")?;
    let n_entries = rd.u32("entry count")?;
    if width == 0 || height == 0 || width.saturating_mul(height) > MAX_DECODE_PIXELS {
        return Err(Error::Corrupt(format!("page size {width}x{height}")));
    }
    // every symbol and entry holds at least one pixel
    if n_symbols > width * height || n_entries > width * height {
        return Err(Error::Corrupt(format!("{n_symbols} symbols, {n_entries} entries")));
    }
    let mut segments = [&[][..]; 4];
    for (k, name) in SEGMENT_NAMES.iter().enumerate() {
        let len = rd.u32(name)?;
        segments[k] = rd.take(len, name)?;
    }
    if rd.pos != bytes.len() {
        return Err(Error::TrailingBytes(bytes.len() - rd.pos));
    }

    let dict = decode_dictionary(segments[0], width * height)?;
    if dict.len() != n_entries {
        return Err(Error::Corrupt(format!(
            "header says {n_entries} entries, dictionary has {}",
            dict.len()
        )));
    }
    if n_symbols > 0 && dict.is_empty() {
        return Err(Error::Corrupt("symbols without a dictionary".into()));
    }
    let (placements, placement_counts) = decode_placements(segments[1], n_symbols, &dict, width, height)?;
    let (mut img, refinement_counts) = decode_refinements(segments[2], &placements, &dict, width, height)?;
    let residual_counts = decode_residual(segments[3], &mut img, &placements)?;
    let counts = CoderCounts {
        placements: placement_counts,
        refinements: refinement_counts,
        residual: residual_counts,
    };
    Ok((img, counts))
}

fn decode_placements(
    segment: &[u8],
    n: usize,
    dict: &Dictionary,
    width: usize,
    height: usize,
) -> Result<(Vec<Placement>, AdaptiveCounts)> {
    let ctx = PlacementContexts::new(dict.len());
    if n == 0 {
        check_consumed("placements", segment.len(), 0)?;
        return Ok((Vec::new(), AdaptiveCounts::new(ctx.total)));
    }
    let mut dec = ArithDecoder::new(segment, ctx.total)?;
    let mut out = Vec::with_capacity(n.min(width * height));
    let (mut prev_row, mut prev_col) = (0i64, 0i64);
    for _ in 0..n {
        let entry = ctx.decode_id(&mut dec)?;
        if entry >= dict.len() {
            return Err(Error::Corrupt(format!("entry id {entry} out of range")));
        }
        let mut v = [0i64; 6];
        for (field, slot) in ctx.fields.iter().zip(v.iter_mut()) {
            *slot = field.decode(&mut dec)?;
        }
        let e = dict.bitmap(entry);
        let row = prev_row + v[0];
        let col = prev_col + v[1];
        let w = e.width() as i64 + v[2];
        let h = e.height() as i64 + v[3];
        if row < 0 || col < 0 || w < 1 || h < 1 || row + h > height as i64 || col + w > width as i64 {
            return Err(Error::Corrupt(format!(
                "symbol box {w}x{h} at ({row}, {col}) off the page"
            )));
        }
        let (dy, dx) = (i32::try_from(v[4]), i32::try_from(v[5]));
        let (Ok(dy), Ok(dx)) = (dy, dx) else {
            return Err(Error::Corrupt("alignment out of range".into()));
        };
        out.push(Placement {
            entry,
            row: row as usize,
            col: col as usize,
            width: w as usize,
            height: h as usize,
            alignment: Alignment { dy, dx },
        });
        (prev_row, prev_col) = (row, col);
    }
    check_consumed("placements", segment.len(), dec.consumed())?;
    Ok((out, dec.into_counts()))
}

fn decode_refinements(
    segment: &[u8],
    placements: &[Placement],
    dict: &Dictionary,
    width: usize,
    height: usize,
) -> Result<(BinaryImage, AdaptiveCounts)> {
    let mut img = BinaryImage::new(width, height)?;
    if placements.is_empty() {
        check_consumed("refinements", segment.len(), 0)?;
        return Ok((img, AdaptiveCounts::new(NUM_CONTEXTS)));
    }
    let mut dec = ArithDecoder::new(segment, NUM_CONTEXTS)?;
    for p in placements {
        let entry = dict.bitmap(p.entry);
        let mut b = BinaryImage::new(p.width, p.height)?;
        for r in 0..p.height {
            for c in 0..p.width {
                let ctx = reference_context(&b, entry, r, c, p.alignment)?;
                if dec.decode_bit(ctx as usize)? == 1 {
                    b.set(r, c, true);
                }
            }
        }
        img.paste_or(&b, p.row, p.col);
    }
    check_consumed("refinements", segment.len(), dec.consumed())?;
    Ok((img, dec.into_counts()))
}

fn decode_residual(segment: &[u8], img: &mut BinaryImage, placements: &[Placement]) -> Result<AdaptiveCounts> {
    let Some((&flag, coded)) = segment.split_first() else {
        return Err(Error::Truncated("residual flag".into()));
    };
    if flag > 1 {
        return Err(Error::Corrupt(format!("residual flag {flag}")));
    }
    let (w, h) = (img.width(), img.height());
    let mut mask = vec![false; w * h];
    for p in placements {
        for r in p.row..p.row + p.height {
            mask[r * w + p.col..r * w + p.col + p.width].fill(true);
        }
    }
    let painted = img.clone();
    let mut dec = ArithDecoder::new(coded, GENERIC_CONTEXTS)?;
    for p in 0..w * h {
        if in_residual(&mask, &painted, flag == 1, p) {
            let (r, c) = (p / w, p % w);
            if dec.decode_bit(generic_context(img, r, c) as usize)? == 1 {
                img.set(r, c, true);
            }
        }
    }
    check_consumed("residual", coded.len(), dec.consumed())?;
    Ok(dec.into_counts())
}

/// `Σ cee_bits` of the coded symbols under the MAP context model estimated
/// from those same symbols and mapping (Beta(2, 2) prior).
pub fn refinement_estimate_bits(symbols: &[BinaryImage], dict: &Dictionary, mapping: &SymbolMapping) -> Result<f64> {
    if symbols.is_empty() {
        return Ok(0.0);
    }
    let model = fit_context_model(symbols, dict, mapping, 2.0, 2.0)?;
    Ok(symbols
        .iter()
        .enumerate()
        .map(|(i, s)| cee_bits(s, dict.bitmap(mapping.assign[i]), mapping.alignment[i], &model))
        .sum())
}

/// Ideal code length, in bits, of the refinement coder's adaptive model on
/// these symbols: what the segment costs without range-coder overhead.
pub fn refinement_adaptive_bits(symbols: &[BinaryImage], dict: &Dictionary, mapping: &SymbolMapping) -> f64 {
    let mut counts = AdaptiveCounts::new(NUM_CONTEXTS);
    let mut bits = 0.0;
    for (i, s) in symbols.iter().enumerate() {
        for_each_context(s, dict.bitmap(mapping.assign[i]), mapping.alignment[i], |c, bit| {
            bits += counts.cost_and_update(c as usize, bit)
        });
    }
    bits
}

/// `Σ entry_cost` over the dictionary, in bits.
pub fn dictionary_estimate_bits(dict: &Dictionary) -> f64 {
    dict.entries().iter().map(|e| entry_cost(&e.bitmap)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    WxorLossless,
    CeeLossless,
    MbirMrf,
    MbirDl,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::WxorLossless, Mode::CeeLossless, Mode::MbirMrf, Mode::MbirDl];

    pub fn name(self) -> &'static str {
        match self {
            Mode::WxorLossless => "wxor-lossless",
            Mode::CeeLossless => "cee-lossless",
            Mode::MbirMrf => "mbir-mrf",
            Mode::MbirDl => "mbir-dl",
        }
    }

    /// Whether the mode changes pixels before coding.
    pub fn restores(self) -> bool {
        matches!(self, Mode::MbirMrf | Mode::MbirDl)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressConfig {
    pub mode: Mode,
    pub restoration: RestorationConfig,
    /// Model re-estimation and re-clustering rounds for the conditional-
    /// entropy dictionary.
    pub cee_rounds: usize,
}

impl Default for CompressConfig {
    fn default() -> Self {
        Self {
            mode: Mode::CeeLossless,
            restoration: RestorationConfig::default(),
            cee_rounds: 2,
        }
    }
}

impl CompressConfig {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompressReport {
    pub mode: Mode,
    pub width: usize,
    pub height: usize,
    pub bytes: usize,
    pub segments: SegmentSizes,
    pub symbols: usize,
    pub dictionary_entries: usize,
    /// The image actually coded: the input, or the restored image.
    pub image: BinaryImage,
    /// Final restoration state in the restoring modes.
    pub restoration: Option<RestorationState>,
    /// `Σ cee_bits` under the MAP model fitted to the coded symbols.
    pub refinement_estimate_bits: f64,
    /// Ideal adaptive code length of the refinements.
    pub refinement_adaptive_bits: f64,
    pub dictionary_estimate_bits: f64,
}

impl CompressReport {
    /// Raw 1-bit-per-pixel size over coded size.
    pub fn compression_ratio(&self) -> f64 {
        (self.width * self.height) as f64 / 8.0 / self.bytes as f64
    }

    pub fn trace(&self) -> Option<&[TraceRow]> {
        self.restoration.as_ref().map(|s| s.trace.as_slice())
    }
}

/// Dictionary and mapping for the symbols of `x`, reusing a restoration's
/// dictionary where its segmentation still matches.
fn dictionary_for_restored(
    x: &BinaryImage,
    state: &RestorationState,
    config: &CompressConfig,
) -> Result<(Dictionary, SymbolMapping)> {
    let seg = Segmentation::new(x, config.restoration.max_symbol_area);
    let symbols: Vec<BinaryImage> = seg.symbols.iter().map(|s| s.bitmap.clone()).collect();
    if symbols.is_empty() {
        return Ok((Dictionary::default(), SymbolMapping::default()));
    }
    if seg.same_layout(&state.segmentation) && !state.dictionary.is_empty() {
        return Ok((state.dictionary.clone(), state.mapping.clone()));
    }
    if state.dictionary.is_empty() {
        let (d, m, _) = learn(&symbols, config)?;
        return Ok((d, m));
    }
    Ok(remap_symbols(&symbols, &state.dictionary, &state.model))
}

fn learn(
    symbols: &[BinaryImage],
    config: &CompressConfig,
) -> Result<(Dictionary, SymbolMapping, crate::context::ContextModel)> {
    let r = &config.restoration;
    learn_dictionary(symbols, &r.wxor, &r.cluster, (r.hyper_a, r.hyper_b), config.cee_rounds)
}

/// Runs the mode's pipeline on `y` and codes the result.
pub fn compress(y: &BinaryImage, config: &CompressConfig) -> Result<(Vec<u8>, CompressReport)> {
    let max_area = config.restoration.max_symbol_area;
    let (image, dict, mapping, restoration) = match config.mode {
        Mode::WxorLossless | Mode::CeeLossless => {
            let seg = Segmentation::new(y, max_area);
            let symbols: Vec<BinaryImage> = seg.symbols.iter().map(|s| s.bitmap.clone()).collect();
            let (dict, mapping) = if symbols.is_empty() {
                (Dictionary::default(), SymbolMapping::default())
            } else if config.mode == Mode::WxorLossless {
                build_dictionary_wxor(&symbols, &config.restoration.wxor)
            } else {
                let (d, m, _) = learn(&symbols, config)?;
                (d, m)
            };
            (y.clone(), dict, mapping, None)
        }
        Mode::MbirMrf | Mode::MbirDl => {
            let state = if config.mode == Mode::MbirDl {
                restore(y, &config.restoration)?
            } else {
                restore_mrf(y, &config.restoration)?
            };
            let (dict, mapping) = dictionary_for_restored(&state.image, &state, config)?;
            (state.image.clone(), dict, mapping, Some(state))
        }
    };
    let (bytes, segments, _) = encode_image_traced(&image, &dict, &mapping, max_area)?;
    let symbols: Vec<BinaryImage> = Segmentation::new(&image, max_area)
        .symbols
        .into_iter()
        .map(|s| s.bitmap)
        .collect();
    let report = CompressReport {
        mode: config.mode,
        width: image.width(),
        height: image.height(),
        bytes: bytes.len(),
        segments,
        symbols: symbols.len(),
        dictionary_entries: dict.len(),
        refinement_estimate_bits: refinement_estimate_bits(&symbols, &dict, &mapping)?,
        refinement_adaptive_bits: refinement_adaptive_bits(&symbols, &dict, &mapping),
        dictionary_estimate_bits: dictionary_estimate_bits(&dict),
        image,
        restoration,
    };
    Ok((bytes, report))
}
