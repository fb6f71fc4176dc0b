//! Connected-component symbol extraction and the pixel-ownership map used by
//! restoration and coding.

use crate::image::BinaryImage;

/// Components whose bounding box exceeds this many pixels are treated as
/// generic content rather than glyphs.
pub const DEFAULT_MAX_SYMBOL_AREA: usize = 10_000;

/// One 8-connected foreground component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbol {
    pub id: usize,
    /// Top row of the tight bounding box in the parent image.
    pub row: usize,
    /// Left column of the tight bounding box in the parent image.
    pub col: usize,
    /// The component's own pixels; other ink inside the box is cleared.
    pub bitmap: BinaryImage,
}

impl Symbol {
    pub fn width(&self) -> usize {
        self.bitmap.width()
    }

    pub fn height(&self) -> usize {
        self.bitmap.height()
    }

    pub fn box_area(&self) -> usize {
        self.bitmap.len()
    }

    #[inline]
    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.row && col >= self.col && row < self.row + self.height() && col < self.col + self.width()
    }
}

const NEIGHBORS_8: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Per-pixel component labels (`u32::MAX` for background) and the components
/// as symbols, in raster order of their bounding boxes' top-left corners.
fn label_components(img: &BinaryImage) -> (Vec<u32>, Vec<Symbol>) {
    let (w, h) = (img.width(), img.height());
    let px = img.pixels();
    let mut labels = vec![u32::MAX; px.len()];
    let mut stack = Vec::new();
    let mut members = Vec::new();
    // (top, left, first index, pixel list, bottom, right)
    let mut comps: Vec<(usize, usize, usize, Vec<usize>, usize, usize)> = Vec::new();

    for start in 0..px.len() {
        if px[start] == 0 || labels[start] != u32::MAX {
            continue;
        }
        let label = comps.len() as u32;
        labels[start] = label;
        stack.push(start);
        members.clear();
        let (mut top, mut left, mut bottom, mut right) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(p) = stack.pop() {
            members.push(p);
            let (r, c) = (p / w, p % w);
            top = top.min(r);
            bottom = bottom.max(r);
            left = left.min(c);
            right = right.max(c);
            for (dr, dc) in NEIGHBORS_8 {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if rr < 0 || cc < 0 || rr as usize >= h || cc as usize >= w {
                    continue;
                }
                let q = rr as usize * w + cc as usize;
                if px[q] != 0 && labels[q] == u32::MAX {
                    labels[q] = label;
                    stack.push(q);
                }
            }
        }
        comps.push((top, left, start, members.clone(), bottom, right));
    }

    let mut order: Vec<usize> = (0..comps.len()).collect();
    order.sort_by_key(|&i| (comps[i].0, comps[i].1, comps[i].2));
    let mut remap = vec![0u32; comps.len()];
    let mut symbols = Vec::with_capacity(comps.len());
    for (id, &i) in order.iter().enumerate() {
        remap[i] = id as u32;
        let (top, left, _, ref pixels, bottom, right) = comps[i];
        let mut bitmap = BinaryImage::new(right - left + 1, bottom - top + 1).expect("non-empty component");
        for &p in pixels {
            bitmap.set(p / w - top, p % w - left, true);
        }
        symbols.push(Symbol {
            id,
            row: top,
            col: left,
            bitmap,
        });
    }
    for l in labels.iter_mut() {
        if *l != u32::MAX {
            *l = remap[*l as usize];
        }
    }
    (labels, symbols)
}

/// The 8-connected foreground components of `img`, ordered by the raster
/// position of each bounding box's top-left corner.
pub fn extract_symbols(img: &BinaryImage) -> Vec<Symbol> {
    label_components(img).1
}

/// Marker for pixels owned by no symbol.
pub const UNOWNED: u32 = u32::MAX;

/// A frozen split of a page into glyph symbols and oversized generic
/// components, with every pixel inside a symbol box attributed to exactly one
/// symbol.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub width: usize,
    pub height: usize,
    pub symbols: Vec<Symbol>,
    pub generic: Vec<Symbol>,
    owner: Vec<u32>,
}

impl Segmentation {
    /// Segments `img`; components with bounding-box area above `max_area`
    /// become generic content.
    ///
    /// Ownership inside symbol boxes: ink belongs to its own component
    /// (generic ink to nobody); background covered by several boxes goes to
    /// the symbol with the nearest ink pixel, ties to the lower id.
    pub fn new(img: &BinaryImage, max_area: usize) -> Self {
        let (w, h) = (img.width(), img.height());
        let (labels, all) = label_components(img);
        let mut comp_to_symbol = vec![UNOWNED; all.len()];
        let mut symbols = Vec::new();
        let mut generic = Vec::new();
        for mut s in all {
            if s.box_area() > max_area {
                s.id = generic.len();
                generic.push(s);
            } else {
                comp_to_symbol[s.id] = symbols.len() as u32;
                s.id = symbols.len();
                symbols.push(s);
            }
        }

        let mut owner = vec![UNOWNED; w * h];
        let mut cover = vec![0u16; w * h];
        for s in &symbols {
            for r in s.row..s.row + s.height() {
                for c in s.col..s.col + s.width() {
                    let p = r * w + c;
                    cover[p] = cover[p].saturating_add(1);
                    if img.pixels()[p] == 0 && owner[p] == UNOWNED {
                        owner[p] = s.id as u32;
                    }
                }
            }
        }
        for p in 0..w * h {
            if img.pixels()[p] != 0 {
                owner[p] = comp_to_symbol[labels[p] as usize];
            } else if cover[p] > 1 {
                owner[p] = Self::nearest_ink_owner(&symbols, p / w, p % w);
            }
        }
        Self {
            width: w,
            height: h,
            symbols,
            generic,
            owner,
        }
    }

    fn nearest_ink_owner(symbols: &[Symbol], row: usize, col: usize) -> u32 {
        let mut best = (usize::MAX, UNOWNED);
        for s in symbols.iter().filter(|s| s.contains(row, col)) {
            for r in 0..s.height() {
                for c in 0..s.width() {
                    if s.bitmap.at(r, c) == 0 {
                        continue;
                    }
                    let dr = (s.row + r).abs_diff(row);
                    let dc = (s.col + c).abs_diff(col);
                    let d = dr * dr + dc * dc;
                    // symbols are visited in id order, so strict < keeps the lower id
                    if d < best.0 {
                        best = (d, s.id as u32);
                    }
                }
            }
        }
        best.1
    }

    /// Symbol owning pixel `index`, if any.
    #[inline]
    pub fn owner(&self, index: usize) -> Option<usize> {
        let o = self.owner[index];
        (o != UNOWNED).then_some(o as usize)
    }

    /// The patch of `img` inside symbol `i`'s box, keeping only pixels the
    /// symbol owns.
    pub fn patch(&self, img: &BinaryImage, i: usize) -> BinaryImage {
        let s = &self.symbols[i];
        let mut out = BinaryImage::new(s.width(), s.height()).expect("non-empty box");
        for r in 0..s.height() {
            for c in 0..s.width() {
                let p = (s.row + r) * self.width + s.col + c;
                if self.owner[p] == i as u32 && img.pixels()[p] != 0 {
                    out.set(r, c, true);
                }
            }
        }
        out
    }

    /// Mask of pixels inside any symbol box dilated by `radius`.
    pub fn dilated_box_mask(&self, radius: usize) -> Vec<bool> {
        let mut mask = vec![false; self.width * self.height];
        for s in &self.symbols {
            let r0 = s.row.saturating_sub(radius);
            let c0 = s.col.saturating_sub(radius);
            let r1 = (s.row + s.height() + radius).min(self.height);
            let c1 = (s.col + s.width() + radius).min(self.width);
            for r in r0..r1 {
                mask[r * self.width + c0..r * self.width + c1].fill(true);
            }
        }
        mask
    }

    /// Whether a pixel lies inside at least one symbol box.
    pub fn box_mask(&self) -> Vec<bool> {
        self.dilated_box_mask(0)
    }

    /// Patches of every symbol, in id order.
    pub fn patches(&self, img: &BinaryImage) -> Vec<BinaryImage> {
        (0..self.symbols.len()).map(|i| self.patch(img, i)).collect()
    }

    /// Same boxes at the same places with the same pixel ownership.
    pub fn same_layout(&self, other: &Segmentation) -> bool {
        self.owner == other.owner
            && self.symbols.len() == other.symbols.len()
            && self.generic.len() == other.generic.len()
            && self
                .symbols
                .iter()
                .zip(&other.symbols)
                .all(|(a, b)| (a.row, a.col, a.width(), a.height()) == (b.row, b.col, b.width(), b.height()))
    }
}
