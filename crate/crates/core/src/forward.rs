//! Imaging model: a circulant Gaussian low-pass filter produces an
//! intermediate gray image `mu`, and each observed pixel is ink with
//! probability `mu_k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::BinaryImage;

/// Per-pixel likelihoods are floored at this value before taking logs, so a
/// pixel that `mu` says is impossible costs `-ln MU_EPS` instead of infinity.
pub const MU_EPS: f64 = 1e-6;

/// Square, normalized, isotropic Gaussian stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct LowPassFilter {
    size: usize,
    variance: f64,
    weights: Vec<f64>,
}

impl LowPassFilter {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Row-major weights, `size * size` of them.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `(dr, dc)` from the centre.
    pub fn weight(&self, dr: isize, dc: isize) -> f64 {
        let r = self.radius() as isize;
        self.weights[((dr + r) * self.size as isize + dc + r) as usize]
    }

    /// Non-zero taps as `(drow, dcol, weight)`.
    pub fn taps(&self) -> Vec<(isize, isize, f64)> {
        let r = self.radius() as isize;
        let mut out = Vec::new();
        for dr in -r..=r {
            for dc in -r..=r {
                let w = self.weight(dr, dc);
                if w != 0.0 {
                    out.push((dr, dc, w));
                }
            }
        }
        out
    }
}

/// Samples `exp(-(dr² + dc²) / (2 variance))` on a `size × size` grid and
/// normalizes to unit sum.
pub fn build_filter(variance: f64, size: usize) -> Result<LowPassFilter> {
    if size.is_multiple_of(2) {
        return Err(Error::InvalidFilter(format!("size {size} is not odd")));
    }
    if !variance.is_finite() || variance <= 0.0 {
        return Err(Error::InvalidFilter(format!("variance {variance} is not positive")));
    }
    let r = (size / 2) as isize;
    let mut weights = Vec::with_capacity(size * size);
    for dr in -r..=r {
        for dc in -r..=r {
            weights.push((-((dr * dr + dc * dc) as f64) / (2.0 * variance)).exp());
        }
    }
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= z);
    Ok(LowPassFilter {
        size,
        variance,
        weights,
    })
}

/// Real-valued raster with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl GrayImage {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

#[inline]
fn wrap(v: isize, n: usize) -> usize {
    v.rem_euclid(n as isize) as usize
}

/// Filter response at pixel `(row, col)` with wrap-around boundaries; `read`
/// supplies pixel values by flat index.
#[inline]
fn response_at(
    w: usize,
    h: usize,
    taps: &[(isize, isize, f64)],
    row: usize,
    col: usize,
    read: impl Fn(usize) -> u8,
) -> f64 {
    let (mut ink, mut any_background) = (0.0, false);
    for &(dr, dc, wt) in taps {
        let rr = wrap(row as isize + dr, h);
        let cc = wrap(col as isize + dc, w);
        if read(rr * w + cc) != 0 {
            ink += wt;
        } else {
            any_background = true;
        }
    }
    // a fully inked support is exactly 1 regardless of rounding in the weights
    if any_background {
        ink.clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// `mu = A x` for the circulant filter `A`.
pub fn apply_filter(x: &BinaryImage, f: &LowPassFilter) -> GrayImage {
    let (w, h) = (x.width(), x.height());
    let taps = f.taps();
    let px = x.pixels();
    let mut values = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            values.push(response_at(w, h, &taps, r, c, |i| px[i]));
        }
    }
    GrayImage {
        width: w,
        height: h,
        values,
    }
}

/// `-ln p(y_k | mu_k)` with the probability floored at [`MU_EPS`].
#[inline]
pub fn pixel_nll(y: u8, mu: f64) -> f64 {
    let p = if y != 0 { mu } else { 1.0 - mu };
    -p.max(MU_EPS).ln()
}

fn check_dims(a: &BinaryImage, b: &BinaryImage) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(())
}

/// `-Σ_k ln(1 - |y_k - mu_k|)`, in nats.
pub fn neg_log_likelihood(y: &BinaryImage, x: &BinaryImage, f: &LowPassFilter) -> Result<f64> {
    check_dims(y, x)?;
    let mu = apply_filter(x, f);
    Ok(y.pixels()
        .iter()
        .zip(&mu.values)
        .map(|(&yk, &m)| pixel_nll(yk, m))
        .sum())
}

/// Flat indices of the pixels whose filter support contains `u`.
fn support_of(w: usize, h: usize, taps: &[(isize, isize, f64)], u: usize) -> Vec<usize> {
    let (ur, uc) = (u / w, u % w);
    let mut ks: Vec<usize> = taps
        .iter()
        .map(|&(dr, dc, _)| wrap(ur as isize - dr, h) * w + wrap(uc as isize - dc, w))
        .collect();
    ks.sort_unstable();
    ks.dedup();
    ks
}

/// Change in negative log-likelihood (nats) from flipping `x_u`, touching
/// only the filter support around `u`.
pub fn delta_likelihood(y: &BinaryImage, x: &BinaryImage, f: &LowPassFilter, u: usize) -> Result<f64> {
    check_dims(y, x)?;
    if u >= x.len() {
        return Err(Error::OutOfBounds { index: u, len: x.len() });
    }
    Ok(delta_likelihood_unchecked(y, x, &f.taps(), u))
}

/// [`delta_likelihood`] with precomputed taps and no argument checks.
pub(crate) fn delta_likelihood_unchecked(
    y: &BinaryImage,
    x: &BinaryImage,
    taps: &[(isize, isize, f64)],
    u: usize,
) -> f64 {
    let (w, h) = (x.width(), x.height());
    let px = x.pixels();
    let mut delta = 0.0;
    for k in support_of(w, h, taps, u) {
        let (r, c) = (k / w, k % w);
        let before = response_at(w, h, taps, r, c, |i| px[i]);
        let after = response_at(w, h, taps, r, c, |i| if i == u { px[i] ^ 1 } else { px[i] });
        let yk = y.pixels()[k];
        delta += pixel_nll(yk, after) - pixel_nll(yk, before);
    }
    delta
}

/// Incremental likelihood for 3×3 filters on images of at least 3×3 pixels:
/// each pixel's 9-pixel neighbourhood pattern indexes a table of per-pixel
/// costs, so a flip is scored with 18 lookups.
#[derive(Debug, Clone)]
pub struct PatternLikelihood {
    width: usize,
    height: usize,
    patterns: Vec<u16>,
    nll: [Vec<f64>; 2],
}

impl PatternLikelihood {
    /// `None` when the filter or image is too small for the fast path.
    pub fn new(x: &BinaryImage, f: &LowPassFilter) -> Option<Self> {
        let (w, h) = (x.width(), x.height());
        if f.size() != 3 || w < 3 || h < 3 {
            return None;
        }
        let taps = f.taps();
        // bit (dr + 1) * 3 + (dc + 1) of a pattern is the pixel at offset (dr, dc)
        let mus: Vec<f64> = (0..512usize)
            .map(|pat| response_at(3, 3, &taps, 1, 1, |i| ((pat >> i) & 1) as u8))
            .collect();
        let nll = [0, 1].map(|y| mus.iter().map(|&mu| pixel_nll(y, mu)).collect::<Vec<f64>>());
        let mut patterns = vec![0u16; w * h];
        for r in 0..h {
            for c in 0..w {
                let mut pat = 0u16;
                for dr in -1..=1isize {
                    for dc in -1..=1isize {
                        let p = wrap(r as isize + dr, h) * w + wrap(c as isize + dc, w);
                        pat |= (x.pixels()[p] as u16) << ((dr + 1) * 3 + dc + 1);
                    }
                }
                patterns[r * w + c] = pat;
            }
        }
        Some(Self {
            width: w,
            height: h,
            patterns,
            nll,
        })
    }

    #[inline]
    fn for_each_dependent(&self, u: usize, mut f: impl FnMut(usize, u16)) {
        let (w, h) = (self.width, self.height);
        let (r, c) = ((u / w) as isize, (u % w) as isize);
        for dr in -1..=1isize {
            for dc in -1..=1isize {
                // u sits at offset (dr, dc) of pixel v
                let v = wrap(r - dr, h) * w + wrap(c - dc, w);
                f(v, 1 << ((dr + 1) * 3 + dc + 1));
            }
        }
    }

    /// Change in negative log-likelihood (nats) from flipping pixel `u`.
    #[inline]
    pub fn delta(&self, y: &BinaryImage, u: usize) -> f64 {
        let mut delta = 0.0;
        self.for_each_dependent(u, |v, bit| {
            let table = &self.nll[y.pixels()[v] as usize];
            let pat = self.patterns[v] as usize;
            delta += table[pat ^ bit as usize] - table[pat];
        });
        delta
    }

    /// Records that pixel `u` flipped.
    pub fn flip(&mut self, u: usize) {
        let mut touched = [(0usize, 0u16); 9];
        let mut k = 0;
        self.for_each_dependent(u, |v, bit| {
            touched[k] = (v, bit);
            k += 1;
        });
        for (v, bit) in touched {
            self.patterns[v] ^= bit;
        }
    }
}

/// Draws `y_k ~ Bernoulli(mu_k)` independently, with `mu = A x`.
pub fn synthesize_noisy(x: &BinaryImage, f: &LowPassFilter, seed: u64) -> BinaryImage {
    let mu = apply_filter(x, f);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = mu.values.iter().map(|&m| (rng.gen::<f64>() < m) as u8).collect();
    BinaryImage::from_pixels(x.width(), x.height(), pixels).expect("same dimensions")
}

/// Expected fraction of flipped pixels, `Σ_k min(mu_k, 1 - mu_k) / K`, for a
/// binary `x` where `mu_k` is the probability of drawing the opposite value.
pub fn expected_flip_rate(x: &BinaryImage, f: &LowPassFilter) -> f64 {
    let mu = apply_filter(x, f);
    let total: f64 = x
        .pixels()
        .iter()
        .zip(&mu.values)
        .map(|(&xk, &m)| if xk != 0 { 1.0 - m } else { m })
        .sum();
    total / x.len() as f64
}
