//! Generated text-like test pages: glyphs from a built-in 5×7 atlas stamped
//! at scales 1-3 onto a white page. At scale 1 every stroke is one pixel
//! wide.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::image::BinaryImage;
use crate::pbm::{save_image, PbmFormat};

pub const GLYPH_WIDTH: usize = 5;
pub const GLYPH_HEIGHT: usize = 7;

/// `(label, rows)`; `#` is ink.
pub const ATLAS: &[(char, [&str; GLYPH_HEIGHT])] = &[
    ('A', [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('B', ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."]),
    ('C', [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."]),
    ('D', ["###..", "#..#.", "#...#", "#...#", "#...#", "#..#.", "###.."]),
    ('E', ["#####", "#....", "#....", "####.", "#....", "#....", "#####"]),
    ('F', ["#####", "#....", "#....", "####.", "#....", "#....", "#...."]),
    ('G', [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"]),
    ('H', ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('I', [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('K', ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"]),
    ('L', ["#....", "#....", "#....", "#....", "#....", "#....", "#####"]),
    ('M', ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"]),
    ('N', ["#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"]),
    ('O', [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('P', ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."]),
    ('R', ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"]),
    ('S', [".####", "#....", "#....", ".###.", "....#", "....#", "####."]),
    ('T', ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."]),
    ('U', ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('V', ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."]),
    ('X', ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"]),
    ('Y', ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."]),
    ('i', ["..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###."]),
    ('2', [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"]),
    ('3', ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."]),
    ('7', ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."]),
];

pub fn glyph(index: usize, scale: usize) -> BinaryImage {
    let rows = &ATLAS[index].1;
    let mut out = BinaryImage::new(GLYPH_WIDTH * scale, GLYPH_HEIGHT * scale).expect("non-zero size");
    for (r, row) in rows.iter().enumerate() {
        for (c, ch) in row.bytes().enumerate() {
            if ch == b'#' {
                for dr in 0..scale {
                    for dc in 0..scale {
                        out.set(r * scale + dr, c * scale + dc, true);
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageConfig {
    pub width: usize,
    pub height: usize,
    /// Glyphs to place; fewer fit if the page fills up.
    pub glyphs: usize,
}

impl Default for PageConfig {
    fn default() -> Self {
        Self {
            width: 640,
            height: 512,
            glyphs: 200,
        }
    }
}

/// One page of lines of random glyphs; each line has a random scale, words
/// are separated by wider gaps, and glyphs never touch.
pub fn render_page(config: &PageConfig, seed: u64) -> BinaryImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut page = BinaryImage::new(config.width, config.height).expect("non-zero page");
    let margin = 12;
    let mut top = margin;
    let mut placed = 0;
    'lines: while placed < config.glyphs {
        let scale = rng.gen_range(1..=3);
        let (gw, gh) = (GLYPH_WIDTH * scale, GLYPH_HEIGHT * scale);
        let gap = 2 * scale;
        if top + gh + margin > config.height {
            break;
        }
        let mut left = margin;
        let mut word_left = rng.gen_range(2..7);
        while left + gw + margin <= config.width {
            if placed == config.glyphs {
                break 'lines;
            }
            page.paste_or(&glyph(rng.gen_range(0..ATLAS.len()), scale), top, left);
            placed += 1;
            left += gw + gap;
            word_left -= 1;
            if word_left == 0 {
                left += 3 * gap;
                word_left = rng.gen_range(2..7);
            }
        }
        top += gh + 3 * scale + rng.gen_range(2..6);
    }
    page
}

/// Writes `pages` fixture pages as `page_NNN.pbm`; page `k` uses seed
/// `seed + k`.
pub fn render_fixture_corpus(out: impl AsRef<Path>, pages: usize, seed: u64) -> Result<Vec<PathBuf>> {
    let out = out.as_ref();
    std::fs::create_dir_all(out)?;
    let mut paths = Vec::with_capacity(pages);
    for k in 0..pages {
        let path = out.join(format!("page_{k:03}.pbm"));
        save_image(
            &render_page(&PageConfig::default(), seed.wrapping_add(k as u64)),
            &path,
            PbmFormat::Raw,
        )?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::extract_symbols;
    use std::collections::HashMap;

    #[test]
    fn atlas_rows_are_well_formed() {
        for (label, rows) in ATLAS {
            for row in rows {
                assert_eq!(row.len(), GLYPH_WIDTH, "{label}");
                assert!(row.bytes().all(|b| b == b'#' || b == b'.'));
            }
        }
    }

    #[test]
    fn atlas_has_one_pixel_strokes() {
        // at scale 1 the vertical bar of T is a single pixel wide
        let t = ATLAS.iter().position(|(l, _)| *l == 'T').unwrap();
        let g = glyph(t, 1);
        for r in 1..GLYPH_HEIGHT {
            assert_eq!((0..GLYPH_WIDTH).map(|c| g.at(r, c) as usize).sum::<usize>(), 1);
        }
    }

    #[test]
    fn pages_are_deterministic() {
        let c = PageConfig::default();
        assert_eq!(render_page(&c, 42), render_page(&c, 42));
        assert_ne!(render_page(&c, 42), render_page(&c, 43));
    }

    #[test]
    fn pages_have_enough_repeated_symbols() {
        for seed in 0..5 {
            let page = render_page(&PageConfig::default(), seed);
            let symbols = extract_symbols(&page);
            assert!(symbols.len() >= 50, "{}", symbols.len());
            let mut groups: HashMap<&BinaryImage, usize> = HashMap::new();
            for s in &symbols {
                *groups.entry(&s.bitmap).or_default() += 1;
            }
            assert!(groups.values().filter(|&&n| n >= 2).count() >= 5);
        }
    }

    #[test]
    fn corpus_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let paths = render_fixture_corpus(dir.path(), 2, 9).unwrap();
        let back = crate::pbm::load_any(&paths[1]).unwrap();
        assert_eq!(back, render_page(&PageConfig::default(), 10));
    }
}
