//! Dictionary construction and symbol-to-entry mapping.
//!
//! [`cluster_symbols`] runs greedy agglomerative clustering in
//! conditional-entropy space: the objective is the total refinement code
//! length of every symbol against its cluster representative plus the cost of
//! coding each representative. [`build_dictionary_wxor`] is the classic
//! dissimilarity-threshold baseline.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::context::{
    cee_bits, centroid_alignment, estimate_phi, wxor_dissimilarity, Alignment, Centroid, ContextCounts, ContextModel,
    WxorScheme,
};
use crate::error::{Error, Result};
use crate::generic::generic_code_length;
use crate::image::BinaryImage;
use crate::pbm::{save_image, PbmFormat};

/// Bits spent on an entry's width and height.
pub const ENTRY_HEADER_BITS: f64 = 32.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictionaryEntry {
    pub id: usize,
    pub bitmap: BinaryImage,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    entries: Vec<DictionaryEntry>,
}

impl Dictionary {
    /// Entries get ids in the given order.
    pub fn new(bitmaps: Vec<BinaryImage>) -> Self {
        Self {
            entries: bitmaps
                .into_iter()
                .enumerate()
                .map(|(id, bitmap)| DictionaryEntry { id, bitmap })
                .collect(),
        }
    }

    pub fn entries(&self) -> &[DictionaryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bitmap(&self, id: usize) -> &BinaryImage {
        &self.entries[id].bitmap
    }

    /// No two entries are bit-identical.
    pub fn is_deduplicated(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.entries.iter().all(|e| seen.insert(&e.bitmap))
    }

    /// Writes `entry_NNNN.pbm` files plus an `index.csv` manifest.
    pub fn dump(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut index = String::from("id,width,height,ink_pixels,file\n");
        for e in &self.entries {
            let file = format!("entry_{:04}.pbm", e.id);
            save_image(&e.bitmap, dir.join(&file), PbmFormat::Raw)?;
            index.push_str(&format!(
                "{},{},{},{},{}\n",
                e.id,
                e.bitmap.width(),
                e.bitmap.height(),
                e.bitmap.count_ones(),
                file
            ));
        }
        fs::write(dir.join("index.csv"), index)?;
        Ok(())
    }
}

/// Which entry each symbol refers to, and how it is registered against it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolMapping {
    pub assign: Vec<usize>,
    pub alignment: Vec<Alignment>,
}

impl SymbolMapping {
    pub fn len(&self) -> usize {
        self.assign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assign.is_empty()
    }

    /// Every symbol maps to an existing entry.
    pub fn validate(&self, symbols: usize, dict: &Dictionary) -> Result<()> {
        if self.assign.len() != symbols || self.alignment.len() != symbols {
            return Err(Error::UnmappedSymbol(self.assign.len().min(self.alignment.len())));
        }
        if let Some(i) = self.assign.iter().position(|&j| j >= dict.len()) {
            return Err(Error::UnmappedSymbol(i));
        }
        Ok(())
    }
}

/// Estimated bits to code an entry on its own: 16 bits for each dimension
/// plus the adaptive causal-context code length of its pixels.
pub fn entry_cost(bitmap: &BinaryImage) -> f64 {
    ENTRY_HEADER_BITS + generic_code_length(bitmap)
}

/// The entry giving the lowest conditional-entropy code length for `sym`
/// under centroid alignment; ties go to the lower id.
pub fn select_entry(sym: &BinaryImage, dict: &Dictionary, model: &ContextModel) -> Result<(usize, Alignment)> {
    let mut best: Option<(f64, usize, Alignment)> = None;
    for e in dict.entries() {
        let al = centroid_alignment(sym, &e.bitmap);
        let bits = cee_bits(sym, &e.bitmap, al, model);
        if best.is_none_or(|(b, _, _)| bits < b) {
            best = Some((bits, e.id, al));
        }
    }
    best.map(|(_, j, al)| (j, al)).ok_or(Error::EmptyDictionary)
}

/// `Σ_i cee_bits(s_i, d_f(i)) + Σ_j entry_cost(d_j)`, in bits.
pub fn dictionary_objective(
    symbols: &[BinaryImage],
    dict: &Dictionary,
    mapping: &SymbolMapping,
    model: &ContextModel,
) -> f64 {
    let refinement: f64 = symbols
        .iter()
        .enumerate()
        .map(|(i, s)| cee_bits(s, dict.bitmap(mapping.assign[i]), mapping.alignment[i], model))
        .sum();
    refinement + dict.entries().iter().map(|e| entry_cost(&e.bitmap)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    /// Largest width or height difference between representatives of two
    /// clusters considered for merging.
    pub max_dim_diff: usize,
    /// Largest L1 distance between 4×4 ink-density signatures.
    pub max_signature_diff: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            max_dim_diff: 2,
            max_signature_diff: 8.0,
        }
    }
}

/// Ink density in each cell of a 4×4 grid over the bitmap.
pub fn density_signature(b: &BinaryImage) -> [f64; 16] {
    let mut sig = [0.0; 16];
    let (w, h) = (b.width(), b.height());
    for gy in 0..4 {
        for gx in 0..4 {
            let (r0, r1) = (gy * h / 4, (gy + 1) * h / 4);
            let (c0, c1) = (gx * w / 4, (gx + 1) * w / 4);
            let area = (r1 - r0) * (c1 - c0);
            if area == 0 {
                continue;
            }
            let mut ink = 0;
            for r in r0..r1 {
                for c in c0..c1 {
                    ink += b.at(r, c) as usize;
                }
            }
            sig[gy * 4 + gx] = ink as f64 / area as f64;
        }
    }
    sig
}

/// Distinct bitmaps in first-appearance order, with the symbols using each.
struct Distinct<'a> {
    bitmaps: Vec<&'a BinaryImage>,
    centroids: Vec<Centroid>,
    members: Vec<Vec<usize>>,
}

impl<'a> Distinct<'a> {
    fn new(symbols: &'a [BinaryImage]) -> Self {
        let mut index: HashMap<&BinaryImage, usize> = HashMap::new();
        let mut bitmaps = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (i, s) in symbols.iter().enumerate() {
            let id = *index.entry(s).or_insert_with(|| {
                bitmaps.push(s);
                members.push(Vec::new());
                bitmaps.len() - 1
            });
            members[id].push(i);
        }
        let centroids = bitmaps.iter().map(|b| Centroid::of(b)).collect();
        Self {
            bitmaps,
            centroids,
            members,
        }
    }

    fn alignment(&self, s: usize, d: usize) -> Alignment {
        self.centroids[s].align_to(&self.centroids[d])
    }

    fn len(&self) -> usize {
        self.bitmaps.len()
    }

    fn mult(&self, d: usize) -> f64 {
        self.members[d].len() as f64
    }
}

/// Memoized pairwise code lengths between distinct bitmaps.
struct CeeCache<'a> {
    distinct: &'a Distinct<'a>,
    model: &'a ContextModel,
    pair: HashMap<(u32, u32), f64>,
    entry: Vec<Option<f64>>,
}

impl<'a> CeeCache<'a> {
    fn new(distinct: &'a Distinct<'a>, model: &'a ContextModel) -> Self {
        Self {
            distinct,
            model,
            pair: HashMap::new(),
            entry: vec![None; distinct.len()],
        }
    }

    /// Bits to code distinct bitmap `s` against distinct bitmap `d`.
    fn cee(&mut self, s: usize, d: usize) -> f64 {
        let distinct = self.distinct;
        let model = self.model;
        *self.pair.entry((s as u32, d as u32)).or_insert_with(|| {
            cee_bits(
                distinct.bitmaps[s],
                distinct.bitmaps[d],
                distinct.alignment(s, d),
                model,
            )
        })
    }

    fn entry_cost(&mut self, d: usize) -> f64 {
        let b = self.distinct.bitmaps[d];
        *self.entry[d].get_or_insert_with(|| entry_cost(b))
    }

    /// Medoid of a set of distinct bitmaps and the cluster cost it yields.
    fn medoid(&mut self, members: &[usize]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for &m in members {
            let mut total = 0.0;
            for &k in members {
                total += self.distinct.mult(k) * self.cee(k, m);
                if total >= best.1 {
                    break;
                }
            }
            if total < best.1 || (total == best.1 && m < best.0) {
                best = (m, total);
            }
        }
        let cost = best.1 + self.entry_cost(best.0);
        (best.0, cost)
    }
}

#[derive(Debug, Clone)]
struct Cluster {
    members: Vec<usize>,
    rep: usize,
    cost: f64,
}

/// Merge proposal between two live clusters.
#[derive(Debug, Clone, Copy)]
struct Proposal {
    gain: f64,
    rep: usize,
    cost: f64,
}

/// Greedy agglomerative clustering in conditional-entropy space.
///
/// Starts from one cluster per distinct bitmap and repeatedly commits the
/// merge with the largest decrease in
/// `Σ_i cee_bits(s_i, rep) + Σ_clusters entry_cost(rep)`, stopping when no
/// merge decreases it. Representatives are medoids. A final pass reassigns
/// every symbol to its best entry and drops entries left without symbols.
pub fn cluster_symbols(
    symbols: &[BinaryImage],
    model: &ContextModel,
    config: &ClusterConfig,
) -> (Dictionary, SymbolMapping) {
    cluster_symbols_traced(symbols, model, config, |_| {})
}

/// [`cluster_symbols`], reporting the objective (bits) before the first merge
/// and after every committed merge.
pub fn cluster_symbols_traced(
    symbols: &[BinaryImage],
    model: &ContextModel,
    config: &ClusterConfig,
    mut on_step: impl FnMut(f64),
) -> (Dictionary, SymbolMapping) {
    if symbols.is_empty() {
        return (Dictionary::default(), SymbolMapping::default());
    }
    let distinct = Distinct::new(symbols);
    let mut cache = CeeCache::new(&distinct, model);
    let n = distinct.len();
    let dims: Vec<(usize, usize)> = distinct.bitmaps.iter().map(|b| (b.width(), b.height())).collect();
    let sigs: Vec<[f64; 16]> = distinct.bitmaps.iter().map(|b| density_signature(b)).collect();
    let compatible = |a: usize, b: usize| {
        dims[a].0.abs_diff(dims[b].0) <= config.max_dim_diff
            && dims[a].1.abs_diff(dims[b].1) <= config.max_dim_diff
            && sigs[a].iter().zip(&sigs[b]).map(|(x, y)| (x - y).abs()).sum::<f64>() <= config.max_signature_diff
    };

    let mut clusters: Vec<Option<Cluster>> = (0..n)
        .map(|d| {
            let cost = distinct.mult(d) * cache.cee(d, d) + cache.entry_cost(d);
            Some(Cluster {
                members: vec![d],
                rep: d,
                cost,
            })
        })
        .collect();
    let mut objective: f64 = clusters.iter().flatten().map(|c| c.cost).sum();
    on_step(objective);

    let propose = |cache: &mut CeeCache, a: &Cluster, b: &Cluster| -> Proposal {
        let mut members = a.members.clone();
        members.extend_from_slice(&b.members);
        let (rep, cost) = cache.medoid(&members);
        Proposal {
            gain: a.cost + b.cost - cost,
            rep,
            cost,
        }
    };

    let mut proposals: BTreeMap<(usize, usize), Proposal> = BTreeMap::new();
    for a in 0..n {
        for b in a + 1..n {
            if compatible(a, b) {
                let p = propose(
                    &mut cache,
                    clusters[a].as_ref().expect("live"),
                    clusters[b].as_ref().expect("live"),
                );
                if p.gain > 0.0 {
                    proposals.insert((a, b), p);
                }
            }
        }
    }

    loop {
        let mut best: Option<((usize, usize), Proposal)> = None;
        for (&key, &p) in &proposals {
            if best.is_none_or(|(_, q)| p.gain > q.gain) {
                best = Some((key, p));
            }
        }
        let Some(((a, b), p)) = best else { break };
        let cb = clusters[b].take().expect("live");
        let ca = clusters[a].as_mut().expect("live");
        ca.members.extend(cb.members);
        ca.rep = p.rep;
        ca.cost = p.cost;
        objective -= p.gain;
        on_step(objective);

        proposals.retain(|&(x, y), _| x != a && x != b && y != a && y != b);
        let merged = clusters[a].clone().expect("live");
        for (other, slot) in clusters.iter().enumerate() {
            let Some(oc) = slot else { continue };
            if other == a || !compatible(merged.rep, oc.rep) {
                continue;
            }
            let (x, y) = (a.min(other), a.max(other));
            let p = if x == a {
                propose(&mut cache, &merged, oc)
            } else {
                propose(&mut cache, oc, &merged)
            };
            if p.gain > 0.0 {
                proposals.insert((x, y), p);
            }
        }
    }

    // entries ordered by first symbol appearance
    let mut live: Vec<&Cluster> = clusters.iter().flatten().collect();
    live.sort_by_key(|c| c.members.iter().map(|&d| distinct.members[d][0]).min());
    let reps: Vec<usize> = live.iter().map(|c| c.rep).collect();

    // reassignment against the final representatives
    let mut assign = vec![0usize; symbols.len()];
    for d in 0..n {
        let mut best = (f64::INFINITY, 0usize);
        for (j, &r) in reps.iter().enumerate() {
            let bits = cache.cee(d, r);
            if bits < best.0 {
                best = (bits, j);
            }
        }
        for &i in &distinct.members[d] {
            assign[i] = best.1;
        }
    }
    finish_mapping(
        symbols,
        reps.iter().map(|&r| distinct.bitmaps[r].clone()).collect(),
        assign,
    )
}

/// Drops unused entries (keeping order), renumbers, and fills alignments.
fn finish_mapping(
    symbols: &[BinaryImage],
    entries: Vec<BinaryImage>,
    assign: Vec<usize>,
) -> (Dictionary, SymbolMapping) {
    let mut used = vec![false; entries.len()];
    for &j in &assign {
        used[j] = true;
    }
    let mut renumber = vec![usize::MAX; entries.len()];
    let mut kept = Vec::new();
    for (j, e) in entries.into_iter().enumerate() {
        if used[j] {
            renumber[j] = kept.len();
            kept.push(e);
        }
    }
    let assign: Vec<usize> = assign.iter().map(|&j| renumber[j]).collect();
    let alignment = symbols
        .iter()
        .zip(&assign)
        .map(|(s, &j)| centroid_alignment(s, &kept[j]))
        .collect();
    (Dictionary::new(kept), SymbolMapping { assign, alignment })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WxorConfig {
    pub scheme: WxorScheme,
    /// A merge is allowed only if every member of the merged cluster is
    /// within this dissimilarity of the new medoid.
    pub threshold: f64,
}

impl Default for WxorConfig {
    fn default() -> Self {
        Self {
            scheme: WxorScheme {
                clustered: true,
                normalize: true,
            },
            threshold: 0.2,
        }
    }
}

impl WxorConfig {
    /// Plain Hamming distance with the same threshold semantics.
    pub fn xor(threshold: f64) -> Self {
        Self {
            scheme: WxorScheme {
                clustered: false,
                normalize: true,
            },
            threshold,
        }
    }
}

/// Threshold-based clustering under weighted-XOR dissimilarity.
///
/// Pairs of distinct bitmaps are visited in increasing dissimilarity; the two
/// clusters are merged when every member of the union stays within the
/// threshold of the union's WXOR medoid. Symbols map to their cluster.
pub fn build_dictionary_wxor(symbols: &[BinaryImage], config: &WxorConfig) -> (Dictionary, SymbolMapping) {
    if symbols.is_empty() {
        return (Dictionary::default(), SymbolMapping::default());
    }
    let distinct = Distinct::new(symbols);
    let n = distinct.len();
    let tau = config.threshold;
    let mut cache: HashMap<(u32, u32), f64> = HashMap::new();
    let mut dis = |a: usize, b: usize| -> f64 {
        if a == b {
            return 0.0;
        }
        let (x, y) = (a.min(b), a.max(b));
        *cache.entry((x as u32, y as u32)).or_insert_with(|| {
            wxor_dissimilarity(
                distinct.bitmaps[x],
                distinct.bitmaps[y],
                distinct.alignment(x, y),
                config.scheme,
            )
        })
    };

    let ink: Vec<usize> = distinct.bitmaps.iter().map(|b| b.count_ones()).collect();
    let dims: Vec<(usize, usize)> = distinct.bitmaps.iter().map(|b| (b.width(), b.height())).collect();
    // every ink-count difference is a mismatch; with centroids aligned the
    // compared region is at most (w_a + w_b) × (h_a + h_b)
    let lower_bound = |a: usize, b: usize| {
        let d = ink[a].abs_diff(ink[b]) as f64;
        if config.scheme.normalize {
            d / ((dims[a].0 + dims[b].0) * (dims[a].1 + dims[b].1)) as f64
        } else {
            d
        }
    };
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if lower_bound(a, b) <= tau {
                let d = dis(a, b);
                if d <= tau {
                    pairs.push((d, a, b));
                }
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    let mut cluster_of: Vec<usize> = (0..n).collect();
    let mut clusters: Vec<Option<(Vec<usize>, usize)>> = (0..n).map(|d| Some((vec![d], d))).collect();
    for (_, a, b) in pairs {
        let (ca, cb) = (cluster_of[a], cluster_of[b]);
        if ca == cb {
            continue;
        }
        let mut members = clusters[ca].as_ref().expect("live").0.clone();
        members.extend_from_slice(&clusters[cb].as_ref().expect("live").0);
        let mut best = (f64::INFINITY, usize::MAX);
        for &m in &members {
            let total: f64 = members.iter().map(|&k| distinct.mult(k) * dis(k, m)).sum();
            if total < best.0 || (total == best.0 && m < best.1) {
                best = (total, m);
            }
        }
        let medoid = best.1;
        if members.iter().all(|&k| dis(k, medoid) <= tau) {
            let (lo, hi) = (ca.min(cb), ca.max(cb));
            clusters[hi] = None;
            for &k in &members {
                cluster_of[k] = lo;
            }
            clusters[lo] = Some((members, medoid));
        }
    }

    let mut live: Vec<(usize, &(Vec<usize>, usize))> = clusters
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.as_ref().map(|c| (i, c)))
        .collect();
    live.sort_by_key(|(_, (members, _))| members.iter().map(|&d| distinct.members[d][0]).min());
    let mut entry_of_cluster = HashMap::new();
    let mut entries = Vec::new();
    for (j, (ci, (_, medoid))) in live.iter().enumerate() {
        entry_of_cluster.insert(*ci, j);
        entries.push(distinct.bitmaps[*medoid].clone());
    }
    let mut assign = vec![0; symbols.len()];
    for d in 0..n {
        for &i in &distinct.members[d] {
            assign[i] = entry_of_cluster[&cluster_of[d]];
        }
    }
    finish_mapping(symbols, entries, assign)
}

/// Every symbol on its best entry of `dict` (see [`select_entry`]), with
/// unused entries dropped. `dict` must not be empty.
pub fn remap_symbols(symbols: &[BinaryImage], dict: &Dictionary, model: &ContextModel) -> (Dictionary, SymbolMapping) {
    let picks: Vec<_> = symbols
        .iter()
        .map(|p| select_entry(p, dict, model).expect("non-empty dictionary"))
        .collect();
    let mut used = vec![false; dict.len()];
    for &(j, _) in &picks {
        used[j] = true;
    }
    let mut renumber = vec![usize::MAX; dict.len()];
    let mut kept = Vec::new();
    for (j, e) in dict.entries().iter().enumerate() {
        if used[j] {
            renumber[j] = kept.len();
            kept.push(e.bitmap.clone());
        }
    }
    let mapping = SymbolMapping {
        assign: picks.iter().map(|&(j, _)| renumber[j]).collect(),
        alignment: picks.iter().map(|&(_, al)| al).collect(),
    };
    (Dictionary::new(kept), mapping)
}

/// MAP context model for `symbols` refined against their mapped entries.
pub fn fit_context_model(
    symbols: &[BinaryImage],
    dict: &Dictionary,
    mapping: &SymbolMapping,
    a: f64,
    b: f64,
) -> Result<ContextModel> {
    let mut counts = ContextCounts::new();
    for (i, s) in symbols.iter().enumerate() {
        counts.add_pair(s, dict.bitmap(mapping.assign[i]), mapping.alignment[i]);
    }
    estimate_phi(&counts, a, b)
}

/// Conditional-entropy dictionary learned from scratch: weighted-XOR
/// clustering provides the first mapping, then `rounds` times the context
/// model is re-estimated and the symbols re-clustered.
pub fn learn_dictionary(
    symbols: &[BinaryImage],
    wxor: &WxorConfig,
    cluster: &ClusterConfig,
    (a, b): (f64, f64),
    rounds: usize,
) -> Result<(Dictionary, SymbolMapping, ContextModel)> {
    let (mut dict, mut mapping) = build_dictionary_wxor(symbols, wxor);
    let mut model = fit_context_model(symbols, &dict, &mapping, a, b)?;
    for _ in 0..rounds {
        (dict, mapping) = cluster_symbols(symbols, &model, cluster);
        model = fit_context_model(symbols, &dict, &mapping, a, b)?;
    }
    Ok((dict, mapping, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{estimate_phi, ContextCounts};

    fn img(rows: &[&str]) -> BinaryImage {
        BinaryImage::from_ascii(rows).unwrap()
    }

    fn glyph_a() -> BinaryImage {
        img(&[
            "..####..", ".##..##.", "##....##", "##....##", "########", "##....##", "##....##", "##....##",
        ])
    }

    fn glyph_b() -> BinaryImage {
        img(&[
            "#######.", "##....##", "##....##", "#######.", "##....##", "##....##", "##....##", "#######.",
        ])
    }

    fn glyph_t() -> BinaryImage {
        img(&[
            "########", "########", "...##...", "...##...", "...##...", "...##...", "...##...", "...##...",
        ])
    }

    fn noisy(b: &BinaryImage, flips: &[(usize, usize)]) -> BinaryImage {
        let mut out = b.clone();
        for &(r, c) in flips {
            out.flip(r * out.width() + c);
        }
        out
    }

    fn trained(symbols: &[BinaryImage], truth: &[BinaryImage]) -> ContextModel {
        let mut counts = ContextCounts::new();
        for (s, t) in symbols.iter().zip(truth) {
            counts.add_pair(s, t, centroid_alignment(s, t));
        }
        estimate_phi(&counts, 2.0, 2.0).unwrap()
    }

    fn two_glyph_fixture() -> (Vec<BinaryImage>, Vec<BinaryImage>) {
        let (a, t) = (glyph_a(), glyph_t());
        let mut syms = Vec::new();
        let mut truth = Vec::new();
        for k in 0..6 {
            syms.push(if k % 2 == 0 {
                a.clone()
            } else {
                noisy(&a, &[(0, 2 + k % 3)])
            });
            truth.push(a.clone());
            syms.push(if k % 3 == 0 {
                t.clone()
            } else {
                noisy(&t, &[(7, 3 + k % 2)])
            });
            truth.push(t.clone());
        }
        (syms, truth)
    }

    #[test]
    fn one_by_one_entry_costs_33_bits() {
        assert_eq!(entry_cost(&BinaryImage::new(1, 1).unwrap()), 33.0);
    }

    #[test]
    fn blank_entry_is_cheaper_than_raw() {
        assert!(entry_cost(&BinaryImage::new(8, 8).unwrap()) < 32.0 + 64.0);
    }

    #[test]
    fn entry_cost_grows_with_nested_bitmaps() {
        let mut state = 12345u64;
        for _ in 0..50 {
            let (w, h) = (1 + (state % 9) as usize, 1 + ((state >> 8) % 9) as usize);
            let mut px = Vec::new();
            for _ in 0..w * h * 2 {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                px.push((state & 3 == 0) as u8);
            }
            let tall = BinaryImage::from_pixels(w, 2 * h, px.clone()).unwrap();
            let top = BinaryImage::from_pixels(w, h, px[..w * h].to_vec()).unwrap();
            assert!(entry_cost(&tall) >= entry_cost(&top));
        }
    }

    #[test]
    fn select_entry_rules() {
        let (a, b) = (glyph_a(), glyph_b());
        let model = trained(&[a.clone(), b.clone()], &[a.clone(), b.clone()]);
        let dict = Dictionary::new(vec![b.clone(), a.clone()]);
        assert_eq!(select_entry(&a, &dict, &model).unwrap().0, 1);
        assert_eq!(select_entry(&b, &dict, &model).unwrap().0, 0);
        let single = Dictionary::new(vec![glyph_t()]);
        assert_eq!(select_entry(&a, &single, &model).unwrap().0, 0);
        let twins = Dictionary::new(vec![a.clone(), a.clone()]);
        assert_eq!(select_entry(&b, &twins, &model).unwrap().0, 0);
        assert!(matches!(
            select_entry(&a, &Dictionary::default(), &model),
            Err(Error::EmptyDictionary)
        ));
    }

    #[test]
    fn identical_symbols_form_one_entry() {
        let syms = vec![glyph_a(); 7];
        let (dict, map) = cluster_symbols(&syms, &ContextModel::uniform(), &ClusterConfig::default());
        assert_eq!(dict.len(), 1);
        assert!(map.assign.iter().all(|&j| j == 0));
    }

    #[test]
    fn two_populations_give_two_entries() {
        let (syms, truth) = two_glyph_fixture();
        let (a, t) = (glyph_a(), glyph_t());
        let mismatched = (0..64).filter(|&k| a.pixels()[k] != t.pixels()[k]).count();
        assert!(mismatched > 32);
        let model = trained(&syms, &truth);

        // direct evaluation of the two candidate solutions
        let two = Dictionary::new(vec![a.clone(), t.clone()]);
        let map_two = SymbolMapping {
            assign: (0..syms.len()).map(|i| i % 2).collect(),
            alignment: syms
                .iter()
                .enumerate()
                .map(|(i, s)| centroid_alignment(s, two.bitmap(i % 2)))
                .collect(),
        };
        let one = Dictionary::new(vec![a.clone()]);
        let map_one = SymbolMapping {
            assign: vec![0; syms.len()],
            alignment: syms.iter().map(|s| centroid_alignment(s, &a)).collect(),
        };
        let cfg = ClusterConfig {
            max_dim_diff: 2,
            max_signature_diff: 16.0,
        };
        assert!(
            dictionary_objective(&syms, &two, &map_two, &model) < dictionary_objective(&syms, &one, &map_one, &model)
        );
        let (dict, map) = cluster_symbols(&syms, &model, &cfg);
        assert_eq!(dict.len(), 2);
        for i in 0..syms.len() {
            assert_eq!(map.assign[i], map.assign[i % 2]);
        }
        assert_ne!(map.assign[0], map.assign[1]);
    }

    #[test]
    fn clustering_descends_and_is_self_consistent() {
        let (syms, truth) = two_glyph_fixture();
        let model = trained(&syms, &truth);
        let mut trace = Vec::new();
        let (dict, map) = cluster_symbols_traced(&syms, &model, &ClusterConfig::default(), |o| trace.push(o));
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        let final_objective = dictionary_objective(&syms, &dict, &map, &model);
        assert!(final_objective <= trace[0] + 1e-9);
        assert!(dict.is_deduplicated());
        map.validate(syms.len(), &dict).unwrap();
        for (i, s) in syms.iter().enumerate() {
            assert_eq!(select_entry(s, &dict, &model).unwrap().0, map.assign[i]);
        }
        let again = cluster_symbols(&syms, &model, &ClusterConfig::default());
        assert_eq!(again, (dict, map));
    }

    #[test]
    fn wxor_threshold_extremes() {
        let (syms, _) = two_glyph_fixture();
        let distinct = Distinct::new(&syms).len();
        let zero = WxorConfig {
            threshold: 0.0,
            ..Default::default()
        };
        let (dict, _) = build_dictionary_wxor(&syms, &zero);
        assert_eq!(dict.len(), distinct);
        let inf = WxorConfig {
            threshold: f64::INFINITY,
            ..Default::default()
        };
        let (dict, map) = build_dictionary_wxor(&syms, &inf);
        assert_eq!(dict.len(), 1);
        assert!(map.assign.iter().all(|&j| j == 0));
        let (dict, map) = build_dictionary_wxor(&syms, &WxorConfig::default());
        assert_eq!(dict.len(), 2);
        assert!(dict.is_deduplicated());
        assert_ne!(map.assign[0], map.assign[1]);
    }

    #[test]
    fn dump_writes_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let dict = Dictionary::new(vec![glyph_a(), glyph_t()]);
        dict.dump(dir.path()).unwrap();
        let index = fs::read_to_string(dir.path().join("index.csv")).unwrap();
        assert_eq!(index.lines().count(), 3);
        let back = crate::pbm::load_any(dir.path().join("entry_0001.pbm")).unwrap();
        assert_eq!(back, glyph_t());
    }
}
