//! MAP restoration of a noisy page by single-pixel coordinate descent.
//!
//! The objective (nats) is the negative log-likelihood of the observation
//! under the low-pass noise model plus a prior. With the dictionary prior the
//! prior is the code length of every symbol refined against its mapped entry,
//! the code length of the entries themselves, and the Beta prior on the
//! context model. Every committed change (pixel flip, context-model update,
//! dictionary update, re-segmentation) is accepted only if it does not raise
//! the objective.

use std::f64::consts::LN_2;
use std::fmt::Write as _;

use crate::context::{cee_bits, estimate_phi, reference_context, ContextCounts, ContextModel, CAUSAL_DEPENDENTS};
use crate::dictionary::{
    build_dictionary_wxor, cluster_symbols, entry_cost, fit_context_model, learn_dictionary, remap_symbols,
    ClusterConfig, Dictionary, SymbolMapping, WxorConfig,
};
use crate::error::{Error, Result};
use crate::forward::{build_filter, delta_likelihood_unchecked, neg_log_likelihood, LowPassFilter, PatternLikelihood};
use crate::image::BinaryImage;
use crate::symbols::{Segmentation, DEFAULT_MAX_SYMBOL_AREA};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Dictionary,
    Mrf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestorationConfig {
    pub filter_variance: f64,
    pub filter_size: usize,
    pub hyper_a: f64,
    pub hyper_b: f64,
    pub max_outer_iters: usize,
    pub max_sweeps: usize,
    /// Stop once the relative change of the objective over an outer
    /// iteration drops below this.
    pub convergence: f64,
    pub prior: PriorKind,
    /// Clique weight of the MRF prior.
    pub mrf_beta: f64,
    pub max_symbol_area: usize,
    pub cluster: ClusterConfig,
    pub wxor: WxorConfig,
}

impl Default for RestorationConfig {
    fn default() -> Self {
        Self {
            filter_variance: 0.2,
            filter_size: 3,
            hyper_a: 2.0,
            hyper_b: 2.0,
            max_outer_iters: 10,
            max_sweeps: 3,
            convergence: 1e-5,
            prior: PriorKind::Dictionary,
            mrf_beta: 1.0,
            max_symbol_area: DEFAULT_MAX_SYMBOL_AREA,
            cluster: ClusterConfig::default(),
            wxor: WxorConfig::default(),
        }
    }
}

impl RestorationConfig {
    pub fn mrf() -> Self {
        Self {
            prior: PriorKind::Mrf,
            ..Self::default()
        }
    }

    pub fn filter(&self) -> Result<LowPassFilter> {
        build_filter(self.filter_variance, self.filter_size)
    }
}

/// One row of the cost trace: the state after outer iteration `iteration`
/// (row 0 is the initial state).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub likelihood_nats: f64,
    pub prior_nats: f64,
    pub total_nats: f64,
    pub pixels_flipped: usize,
}

/// Cached objective next to a from-scratch evaluation at the end of an outer
/// iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostCheck {
    pub cached: f64,
    pub recomputed: f64,
}

impl CostCheck {
    pub fn relative_error(&self) -> f64 {
        (self.cached - self.recomputed).abs() / self.recomputed.abs().max(1e-300)
    }
}

/// Everything the objective depends on, plus the bookkeeping of a run.
#[derive(Debug, Clone)]
pub struct RestorationState {
    pub image: BinaryImage,
    pub segmentation: Segmentation,
    pub dictionary: Dictionary,
    pub mapping: SymbolMapping,
    pub model: ContextModel,
    pub likelihood: f64,
    pub prior: f64,
    pub iteration: usize,
    pub trace: Vec<TraceRow>,
    /// Objective after every committed update, starting with the initial one.
    pub steps: Vec<f64>,
    pub checks: Vec<CostCheck>,
    config: RestorationConfig,
    taps: Vec<(isize, isize, f64)>,
    fast_likelihood: Option<PatternLikelihood>,
    /// Entry half of the reference context for each pixel of each symbol box.
    entry_bits: Vec<Vec<u16>>,
}

impl RestorationState {
    /// Initial state for observation `y`: the image is `y`, the dictionary
    /// comes from weighted-XOR clustering, and the context model is the MAP
    /// estimate for that mapping.
    pub fn new(y: &BinaryImage, config: &RestorationConfig) -> Result<Self> {
        let filter = config.filter()?;
        let segmentation = Segmentation::new(y, config.max_symbol_area);
        let mut state = Self {
            image: y.clone(),
            segmentation,
            dictionary: Dictionary::default(),
            mapping: SymbolMapping::default(),
            model: estimate_phi(&ContextCounts::new(), config.hyper_a, config.hyper_b)?,
            likelihood: 0.0,
            prior: 0.0,
            iteration: 0,
            trace: Vec::new(),
            steps: Vec::new(),
            checks: Vec::new(),
            config: config.clone(),
            taps: filter.taps(),
            fast_likelihood: PatternLikelihood::new(y, &filter),
            entry_bits: Vec::new(),
        };
        if config.prior == PriorKind::Dictionary {
            let (dict, mapping, model) = state.initial_dictionary()?;
            state.set_dictionary(dict, mapping, model);
        }
        state.likelihood = neg_log_likelihood(y, &state.image, &filter)?;
        state.prior = state.prior_from_scratch();
        state.steps.push(state.total_cost());
        Ok(state)
    }

    pub fn config(&self) -> &RestorationConfig {
        &self.config
    }

    pub fn total_cost(&self) -> f64 {
        self.likelihood + self.prior
    }

    /// Likelihood and prior evaluated from scratch.
    pub fn recompute_cost(&self, y: &BinaryImage) -> Result<(f64, f64)> {
        let filter = self.config.filter()?;
        Ok((neg_log_likelihood(y, &self.image, &filter)?, self.prior_from_scratch()))
    }

    fn prior_from_scratch(&self) -> f64 {
        match self.config.prior {
            PriorKind::Mrf => mrf_energy(&self.image, self.config.mrf_beta),
            PriorKind::Dictionary => dictionary_prior(
                &self.segmentation.patches(&self.image),
                &self.dictionary,
                &self.mapping,
                &self.model,
            ),
        }
    }

    fn initial_dictionary(&self) -> Result<(Dictionary, SymbolMapping, ContextModel)> {
        let patches = self.segmentation.patches(&self.image);
        let (dict, mapping) = build_dictionary_wxor(&patches, &self.config.wxor);
        let model = fit_model(&patches, &dict, &mapping, &self.config)?;
        Ok((dict, mapping, model))
    }

    fn set_dictionary(&mut self, dict: Dictionary, mapping: SymbolMapping, model: ContextModel) {
        self.dictionary = dict;
        self.mapping = mapping;
        self.model = model;
        self.refresh_entry_bits();
    }

    fn refresh_entry_bits(&mut self) {
        self.entry_bits = self
            .segmentation
            .symbols
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let blank = BinaryImage::new(s.width(), s.height()).expect("non-empty box");
                let entry = self.dictionary.bitmap(self.mapping.assign[i]);
                let al = self.mapping.alignment[i];
                let mut bits = Vec::with_capacity(s.box_area());
                for r in 0..s.height() {
                    for c in 0..s.width() {
                        bits.push(reference_context(&blank, entry, r, c, al).expect("inside box"));
                    }
                }
                bits
            })
            .collect();
    }

    /// Patch value of symbol `i` at box position `(r, c)`, with pixel `flip`
    /// (flat image index) inverted.
    #[inline]
    fn patch_px(&self, i: usize, r: isize, c: isize, flip: usize) -> u8 {
        let s = &self.segmentation.symbols[i];
        if r < 0 || c < 0 || r >= s.height() as isize || c >= s.width() as isize {
            return 0;
        }
        let p = (s.row + r as usize) * self.image.width() + s.col + c as usize;
        if self.segmentation.owner(p) != Some(i) {
            return 0;
        }
        self.image.pixels()[p] ^ (p == flip) as u8
    }

    /// Code length (bits) of box position `(r, c)` of symbol `i`.
    #[inline]
    fn position_bits(&self, i: usize, r: isize, c: isize, flip: usize) -> f64 {
        let ctx = self.patch_px(i, r, c - 1, flip) as u16
            | (self.patch_px(i, r - 1, c - 1, flip) as u16) << 1
            | (self.patch_px(i, r - 1, c, flip) as u16) << 2
            | (self.patch_px(i, r - 1, c + 1, flip) as u16) << 3
            | self.entry_bits[i][r as usize * self.segmentation.symbols[i].width() + c as usize];
        self.model.bits(ctx, self.patch_px(i, r, c, flip))
    }

    /// Change of the prior (nats) if pixel `u` flipped.
    pub fn delta_prior(&self, u: usize) -> f64 {
        match self.config.prior {
            PriorKind::Dictionary => delta_prior_dl(self, u),
            PriorKind::Mrf => delta_prior_mrf(&self.image, u, self.config.mrf_beta),
        }
    }

    /// Change of the likelihood (nats) if pixel `u` flipped.
    pub fn delta_likelihood(&self, y: &BinaryImage, u: usize) -> f64 {
        match &self.fast_likelihood {
            Some(fast) => fast.delta(y, u),
            None => delta_likelihood_unchecked(y, &self.image, &self.taps, u),
        }
    }

    /// Sets pixel `u` to whichever value gives the lower objective, keeping
    /// the current value on ties. Returns whether it changed.
    pub fn pixel_update(&mut self, y: &BinaryImage, u: usize) -> bool {
        let d1 = self.delta_likelihood(y, u);
        let d2 = self.delta_prior(u);
        if d1 + d2 < 0.0 {
            self.image.flip(u);
            if let Some(fast) = &mut self.fast_likelihood {
                fast.flip(u);
            }
            self.likelihood += d1;
            self.prior += d2;
            self.steps.push(self.total_cost());
            true
        } else {
            false
        }
    }

    /// One raster sweep over the symbol boxes dilated by the filter radius.
    pub fn sweep(&mut self, y: &BinaryImage) -> usize {
        let mask = self.segmentation.dilated_box_mask(self.config.filter_size / 2);
        let mut flipped = 0;
        for (u, &inside) in mask.iter().enumerate() {
            if inside && self.pixel_update(y, u) {
                flipped += 1;
            }
        }
        flipped
    }

    /// Replaces the context model with its MAP estimate for the current
    /// image and mapping.
    fn update_model(&mut self) -> Result<()> {
        let patches = self.segmentation.patches(&self.image);
        let model = fit_model(&patches, &self.dictionary, &self.mapping, &self.config)?;
        let prior = dictionary_prior(&patches, &self.dictionary, &self.mapping, &model);
        if prior <= self.prior {
            self.model = model;
            self.commit_prior(prior);
        }
        Ok(())
    }

    /// Re-clusters the current symbols, and separately re-maps them onto the
    /// current entries; keeps the best option that does not raise the cost.
    fn update_dictionary(&mut self) {
        let patches = self.segmentation.patches(&self.image);
        let mut candidates = vec![cluster_symbols(&patches, &self.model, &self.config.cluster)];
        if !self.dictionary.is_empty() {
            candidates.push(remap_symbols(&patches, &self.dictionary, &self.model));
        }
        let mut best: Option<(f64, Dictionary, SymbolMapping)> = None;
        for (dict, mapping) in candidates {
            let prior = dictionary_prior(&patches, &dict, &mapping, &self.model);
            if best.as_ref().is_none_or(|(p, _, _)| prior < *p) {
                best = Some((prior, dict, mapping));
            }
        }
        if let Some((prior, dict, mapping)) = best {
            if prior <= self.prior {
                let model = self.model.clone();
                self.set_dictionary(dict, mapping, model);
                self.commit_prior(prior);
            }
        }
    }

    /// Re-extracts symbols from the current image. A changed layout is
    /// re-learned from scratch and kept only if the cost does not rise.
    fn resegment(&mut self) -> Result<()> {
        let seg = Segmentation::new(&self.image, self.config.max_symbol_area);
        if seg.same_layout(&self.segmentation) {
            return Ok(());
        }
        if self.config.prior == PriorKind::Mrf {
            // the sweep region is the only thing the layout affects
            self.segmentation = seg;
            return Ok(());
        }
        let mut candidate = self.clone();
        candidate.segmentation = seg;
        let (dict, mapping, model) = candidate.initial_dictionary()?;
        candidate.set_dictionary(dict, mapping, model);
        candidate.update_dictionary_unguarded();
        candidate.model = fit_model(
            &candidate.segmentation.patches(&candidate.image),
            &candidate.dictionary,
            &candidate.mapping,
            &candidate.config,
        )?;
        let prior = candidate.prior_from_scratch();
        if prior <= self.prior {
            self.segmentation = candidate.segmentation;
            self.set_dictionary(candidate.dictionary, candidate.mapping, candidate.model);
            self.commit_prior(prior);
        }
        Ok(())
    }

    fn update_dictionary_unguarded(&mut self) {
        let patches = self.segmentation.patches(&self.image);
        let (dict, mapping) = cluster_symbols(&patches, &self.model, &self.config.cluster);
        let model = self.model.clone();
        self.set_dictionary(dict, mapping, model);
    }

    fn commit_prior(&mut self, prior: f64) {
        self.prior = prior;
        self.steps.push(self.total_cost());
    }

    fn push_trace(&mut self, flipped: usize) {
        self.trace.push(TraceRow {
            iteration: self.iteration,
            likelihood_nats: self.likelihood,
            prior_nats: self.prior,
            total_nats: self.total_cost(),
            pixels_flipped: flipped,
        });
    }

    /// The cost trace as CSV.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,likelihood_nats,prior_nats,total_nats,pixels_flipped\n");
        for t in &self.trace {
            let _ = writeln!(
                out,
                "{},{:.9},{:.9},{:.9},{}",
                t.iteration, t.likelihood_nats, t.prior_nats, t.total_nats, t.pixels_flipped
            );
        }
        out
    }
}

fn fit_model(
    patches: &[BinaryImage],
    dict: &Dictionary,
    mapping: &SymbolMapping,
    config: &RestorationConfig,
) -> Result<ContextModel> {
    fit_context_model(patches, dict, mapping, config.hyper_a, config.hyper_b)
}

/// Dictionary prior in nats: refinement and entry code lengths plus the
/// Beta prior on the context model.
pub fn dictionary_prior(
    patches: &[BinaryImage],
    dict: &Dictionary,
    mapping: &SymbolMapping,
    model: &ContextModel,
) -> f64 {
    let refinement: f64 = patches
        .iter()
        .enumerate()
        .map(|(i, p)| cee_bits(p, dict.bitmap(mapping.assign[i]), mapping.alignment[i], model))
        .sum();
    let entries: f64 = dict.entries().iter().map(|e| entry_cost(&e.bitmap)).sum();
    (refinement + entries) * LN_2 + model.neg_log_prior()
}

/// Change of the dictionary prior (nats) if pixel `u` flipped: only the
/// owning symbol's pixel at `u` and the pixels whose causal neighbourhood
/// contains `u` are re-scored. Pixels no symbol owns are prior-neutral.
pub fn delta_prior_dl(state: &RestorationState, u: usize) -> f64 {
    let Some(i) = state.segmentation.owner(u) else {
        return 0.0;
    };
    let s = &state.segmentation.symbols[i];
    let w = state.image.width();
    let (ur, uc) = ((u / w - s.row) as isize, (u % w - s.col) as isize);
    let mut delta = 0.0;
    for (dr, dc) in std::iter::once((0, 0)).chain(CAUSAL_DEPENDENTS) {
        let (r, c) = (ur + dr, uc + dc);
        if r < 0 || c < 0 || r >= s.height() as isize || c >= s.width() as isize {
            continue;
        }
        delta += state.position_bits(i, r, c, u) - state.position_bits(i, r, c, usize::MAX);
    }
    delta * LN_2
}

/// `β Σ |x_u - x_l|` over unordered 8-neighbour pairs inside the image.
pub fn mrf_energy(x: &BinaryImage, beta: f64) -> f64 {
    let (w, h) = (x.width() as isize, x.height() as isize);
    let mut disagreements = 0usize;
    for r in 0..h {
        for c in 0..w {
            let v = x.get(r, c);
            // each pair once: E, SW, S, SE
            for (dr, dc) in [(0, 1), (1, -1), (1, 0), (1, 1)] {
                let (rr, cc) = (r + dr, c + dc);
                if rr < h && cc >= 0 && cc < w && x.get(rr, cc) != v {
                    disagreements += 1;
                }
            }
        }
    }
    beta * disagreements as f64
}

/// Change of [`mrf_energy`] if pixel `u` flipped.
pub fn delta_prior_mrf(x: &BinaryImage, u: usize, beta: f64) -> f64 {
    let (w, h) = (x.width() as isize, x.height() as isize);
    let (r, c) = ((u as isize) / w, (u as isize) % w);
    let v = x.get(r, c);
    let (mut agree, mut differ) = (0i32, 0i32);
    for dr in -1..=1 {
        for dc in -1..=1 {
            let (rr, cc) = (r + dr, c + dc);
            if (dr, dc) == (0, 0) || rr < 0 || cc < 0 || rr >= h || cc >= w {
                continue;
            }
            if x.get(rr, cc) == v {
                agree += 1;
            } else {
                differ += 1;
            }
        }
    }
    beta * (agree - differ) as f64
}

/// Alternates context-model estimation, dictionary construction and pixel
/// sweeps, starting from `x = y`, until the objective settles or the
/// iteration limit is reached.
pub fn restore(y: &BinaryImage, config: &RestorationConfig) -> Result<RestorationState> {
    let mut state = RestorationState::new(y, config)?;
    state.push_trace(0);
    if state.segmentation.symbols.is_empty() {
        return Ok(state);
    }
    let mut prev = state.total_cost();
    while state.iteration < config.max_outer_iters {
        state.iteration += 1;
        if config.prior == PriorKind::Dictionary {
            state.update_model()?;
            state.update_dictionary();
        }
        let mut flipped = 0;
        for _ in 0..config.max_sweeps {
            let n = state.sweep(y);
            flipped += n;
            if n == 0 {
                break;
            }
        }
        state.resegment()?;

        let (lik, prior) = state.recompute_cost(y)?;
        state.checks.push(CostCheck {
            cached: state.total_cost(),
            recomputed: lik + prior,
        });
        state.likelihood = lik;
        state.prior = prior;
        state.push_trace(flipped);

        let cur = state.total_cost();
        let change = (prev - cur).abs() / prev.abs().max(f64::MIN_POSITIVE);
        prev = cur;
        if change < config.convergence {
            break;
        }
    }
    Ok(state)
}

/// [`restore`] with the 8-neighbour MRF prior. A dictionary for coding is
/// learned once on the final image; it is not part of the objective.
pub fn restore_mrf(y: &BinaryImage, config: &RestorationConfig) -> Result<RestorationState> {
    let config = RestorationConfig {
        prior: PriorKind::Mrf,
        ..config.clone()
    };
    let mut state = restore(y, &config)?;
    let patches = state.segmentation.patches(&state.image);
    if !patches.is_empty() {
        let (dict, mapping, model) = learn_dictionary(
            &patches,
            &config.wxor,
            &config.cluster,
            (config.hyper_a, config.hyper_b),
            1,
        )?;
        state.dictionary = dict;
        state.mapping = mapping;
        state.model = model;
    }
    Ok(state)
}

/// Checks the invariants of a finished run: a non-increasing step history
/// and cached costs that match recomputation.
pub fn verify_descent(state: &RestorationState, tolerance: f64) -> Result<()> {
    for (k, w) in state.steps.windows(2).enumerate() {
        // allow for floating-point noise in summed deltas
        if w[1] > w[0] + 1e-9 * w[0].abs().max(1.0) {
            return Err(Error::Corrupt(format!(
                "cost rose at step {}: {} -> {}",
                k + 1,
                w[0],
                w[1]
            )));
        }
    }
    for (k, w) in state.trace.windows(2).enumerate() {
        if w[1].total_nats > w[0].total_nats + 1e-9 * w[0].total_nats.abs().max(1.0) {
            return Err(Error::Corrupt(format!("trace rose at iteration {}", k + 1)));
        }
    }
    for c in &state.checks {
        if c.relative_error() > tolerance {
            return Err(Error::Corrupt(format!(
                "cached cost {} differs from recomputed {}",
                c.cached, c.recomputed
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{delta_likelihood, synthesize_noisy};
    use crate::image::error_count;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn glyph() -> BinaryImage {
        BinaryImage::from_ascii(&[".####.", "##..##", "##..##", "######", "##..##", "##..##", "##..##"]).unwrap()
    }

    fn page(copies: usize) -> BinaryImage {
        let g = glyph();
        let mut page = BinaryImage::new(10 * copies + 4, 14).unwrap();
        for k in 0..copies {
            page.paste_or(&g, 3, 2 + 10 * k);
        }
        page
    }

    fn noisy_page(seed: u64) -> (BinaryImage, BinaryImage) {
        let clean = page(8);
        let f = build_filter(0.1, 3).unwrap();
        (synthesize_noisy(&clean, &f, seed), clean)
    }

    #[test]
    fn defaults() {
        let c = RestorationConfig::default();
        assert_eq!((c.filter_variance, c.filter_size), (0.2, 3));
        assert_eq!((c.hyper_a, c.hyper_b), (2.0, 2.0));
        assert_eq!((c.max_outer_iters, c.max_sweeps, c.convergence), (10, 3, 1e-5));
        assert_eq!(c.prior, PriorKind::Dictionary);
    }

    #[test]
    fn mrf_delta_examples() {
        let mut x = BinaryImage::new(3, 3).unwrap();
        assert_eq!(delta_prior_mrf(&x, 4, 1.0), 8.0);
        for idx in [0, 1, 2, 3] {
            x.flip(idx);
        }
        assert_eq!(delta_prior_mrf(&x, 4, 1.0), 0.0);
        assert_eq!(delta_prior_mrf(&x, 4, 2.5), 0.0);
    }

    #[test]
    fn mrf_delta_matches_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let (w, h) = (rng.gen_range(1..9), rng.gen_range(1..9));
            let px = (0..w * h).map(|_| rng.gen_range(0..2)).collect();
            let x = BinaryImage::from_pixels(w, h, px).unwrap();
            let u = rng.gen_range(0..w * h);
            let mut flipped = x.clone();
            flipped.flip(u);
            let expected = mrf_energy(&flipped, 1.5) - mrf_energy(&x, 1.5);
            assert!((delta_prior_mrf(&x, u, 1.5) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn dl_delta_matches_recomputation() {
        let (y, _) = noisy_page(5);
        let state = RestorationState::new(&y, &RestorationConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = state.prior_from_scratch();
        for _ in 0..300 {
            let u = rng.gen_range(0..y.len());
            let mut other = state.clone();
            other.image.flip(u);
            let expected = other.prior_from_scratch() - base;
            let got = delta_prior_dl(&state, u);
            assert!((got - expected).abs() < 1e-9, "u={u}: {got} vs {expected}");
        }
    }

    #[test]
    fn flip_and_flip_back_cancel() {
        let (y, _) = noisy_page(6);
        let mut state = RestorationState::new(&y, &RestorationConfig::default()).unwrap();
        for u in (0..y.len()).step_by(7) {
            let there = delta_prior_dl(&state, u);
            state.image.flip(u);
            let back = delta_prior_dl(&state, u);
            state.image.flip(u);
            assert!((there + back).abs() < 1e-9);
        }
    }

    #[test]
    fn unowned_pixels_are_prior_neutral() {
        let (y, _) = noisy_page(7);
        let state = RestorationState::new(&y, &RestorationConfig::default()).unwrap();
        assert_eq!(state.segmentation.owner(0), None);
        assert_eq!(delta_prior_dl(&state, 0), 0.0);
    }

    #[test]
    fn likelihood_delta_agrees_with_public_helper() {
        let (y, _) = noisy_page(8);
        let state = RestorationState::new(&y, &RestorationConfig::default()).unwrap();
        let f = state.config().filter().unwrap();
        for u in (0..y.len()).step_by(13) {
            let expected = delta_likelihood(&y, &state.image, &f, u).unwrap();
            assert!((state.delta_likelihood(&y, u) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn blank_page_is_returned_unchanged() {
        let y = BinaryImage::new(20, 10).unwrap();
        for config in [RestorationConfig::default(), RestorationConfig::mrf()] {
            let state = restore(&y, &config).unwrap();
            assert_eq!(state.image, y);
            assert_eq!(state.trace.len(), 1);
        }
    }

    #[test]
    fn accepted_flips_lower_recomputed_cost() {
        let (y, _) = noisy_page(10);
        let mut state = RestorationState::new(&y, &RestorationConfig::default()).unwrap();
        let mut accepted = 0;
        for u in 0..y.len() {
            let (l0, p0) = state.recompute_cost(&y).unwrap();
            if state.pixel_update(&y, u) {
                accepted += 1;
                let (l1, p1) = state.recompute_cost(&y).unwrap();
                assert!(l1 + p1 < l0 + p0);
                assert!(
                    ((l1 + p1) - state.total_cost()).abs() < 1e-6 * (l1 + p1).abs(),
                    "u={u} lik {l1} vs {} prior {p1} vs {}",
                    state.likelihood,
                    state.prior
                );
            }
        }
        assert!(accepted > 0);
    }

    #[test]
    fn clean_fixed_point_changes_nothing() {
        // every symbol equals its entry and the likelihood is evaluated
        // against the image itself
        let x = page(6);
        let config = RestorationConfig::default();
        let mut state = RestorationState::new(&x, &config).unwrap();
        assert_eq!(state.dictionary.len(), 1);
        assert_eq!(state.sweep(&x), 0);
        assert_eq!(state.image, x);
    }

    #[test]
    fn restoration_descends_and_removes_noise() {
        for seed in 0..3 {
            let (y, clean) = noisy_page(100 + seed);
            for config in [RestorationConfig::default(), RestorationConfig::mrf()] {
                let state = restore(&y, &config).unwrap();
                verify_descent(&state, 1e-6).unwrap();
                assert!(state
                    .trace
                    .windows(2)
                    .all(|w| w[1].total_nats <= w[0].total_nats + 1e-9));
                if config.prior == PriorKind::Dictionary {
                    let before = error_count(&y, &clean).unwrap().0;
                    let after = error_count(&state.image, &clean).unwrap().0;
                    assert!(after < before, "seed {seed}: {after} vs {before}");
                }
            }
        }
    }

    #[test]
    fn trace_csv_layout() {
        let (y, _) = noisy_page(11);
        let state = restore(&y, &RestorationConfig::default()).unwrap();
        let csv = state.trace_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("iteration,likelihood_nats,prior_nats,total_nats,pixels_flipped")
        );
        assert_eq!(lines.count(), state.trace.len());
    }

    #[test]
    fn restoration_is_deterministic() {
        let (y, _) = noisy_page(12);
        let a = restore(&y, &RestorationConfig::default()).unwrap();
        let b = restore(&y, &RestorationConfig::default()).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.trace_csv(), b.trace_csv());
    }
}
