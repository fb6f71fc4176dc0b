//! Bilevel rasters and the pixel-difference metric.
//!
//! Pixels are stored one byte per pixel (0 or 1, 1 = ink). Reads outside the
//! raster through [`BinaryImage::get`] return background.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl BinaryImage {
    /// All-background raster.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        let len = width
            .checked_mul(height)
            .ok_or(Error::InvalidDimensions { width, height })?;
        Ok(Self {
            width,
            height,
            pixels: vec![0; len],
        })
    }

    /// Builds a raster from row-major pixel values; any non-zero value is ink.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || width.checked_mul(height) != Some(pixels.len()) {
            return Err(Error::InvalidDimensions { width, height });
        }
        let pixels = pixels.into_iter().map(|p| (p != 0) as u8).collect();
        Ok(Self { width, height, pixels })
    }

    /// Parses rows of `'#'`/`'1'` (ink) and `'.'`/`'0'` (background). Handy in tests.
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut pixels = Vec::with_capacity(width * height);
        for row in rows {
            if row.chars().count() != width {
                return Err(Error::InvalidDimensions { width, height });
            }
            pixels.extend(row.chars().map(|c| matches!(c, '#' | '1' | 'X') as u8));
        }
        Self::from_pixels(width, height, pixels)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Pixel at signed coordinates; anything outside the raster is background.
    #[inline]
    pub fn get(&self, row: isize, col: isize) -> u8 {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            0
        } else {
            self.pixels[row as usize * self.width + col as usize]
        }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ink: bool) {
        self.pixels[row * self.width + col] = ink as u8;
    }

    #[inline]
    pub fn flip(&mut self, index: usize) {
        self.pixels[index] ^= 1;
    }

    pub fn count_ones(&self) -> usize {
        self.pixels.iter().map(|&p| p as usize).sum()
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| p ^ 1).collect(),
        }
    }

    /// Cyclic translation by `(dr, dc)`.
    pub fn shifted(&self, dr: isize, dc: isize) -> Self {
        let (w, h) = (self.width as isize, self.height as isize);
        let mut out = self.clone();
        for r in 0..h {
            for c in 0..w {
                let src = self.pixels[(r * w + c) as usize];
                let rr = (r + dr).rem_euclid(h);
                let cc = (c + dc).rem_euclid(w);
                out.pixels[(rr * w + cc) as usize] = src;
            }
        }
        out
    }

    /// ORs `patch` into this raster with its top-left at `(row, col)`.
    pub fn paste_or(&mut self, patch: &BinaryImage, row: usize, col: usize) {
        for r in 0..patch.height {
            for c in 0..patch.width {
                if patch.at(r, c) != 0 {
                    self.set(row + r, col + c, true);
                }
            }
        }
    }

    fn check_same_dims(&self, other: &BinaryImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

impl fmt::Debug for BinaryImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryImage {}x{}", self.width, self.height)?;
        if self.width <= 64 && self.height <= 64 {
            for r in 0..self.height {
                let row: String = (0..self.width)
                    .map(|c| if self.at(r, c) != 0 { '#' } else { '.' })
                    .collect();
                writeln!(f, "{row}")?;
            }
        }
        Ok(())
    }
}

/// Number of pixel positions at which two rasters differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PixelDiff(pub usize);

pub fn error_count(a: &BinaryImage, b: &BinaryImage) -> Result<PixelDiff> {
    a.check_same_dims(b)?;
    let n = a.pixels.iter().zip(&b.pixels).filter(|(x, y)| x != y).count();
    Ok(PixelDiff(n))
}
