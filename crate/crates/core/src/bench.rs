//! Synthetic-noise benchmark: degrade each clean page at several filter
//! variances, run every method, and tabulate error pixels and stream sizes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::codec::{compress, decode, CompressConfig, Mode};
use crate::error::{Error, Result};
use crate::forward::{build_filter, synthesize_noisy};
use crate::image::{error_count, BinaryImage};
use crate::pbm::load_any;
use crate::restore::verify_descent;

pub const SIGMA2_LEVELS: [f64; 4] = [0.1, 0.12, 0.14, 0.16];
pub const CSV_VERSION: u32 = 1;
pub const CSV_HEADER: &str =
    "image,method,sigma2,seed,noisy_error_pixels,error_pixels,bytes,compression_ratio,lossless,descent_ok";
/// Environment variable holding the number of bench worker threads.
pub const WORKERS_ENV: &str = "MBDL_WORKERS";
/// Page size the default fixture pages stand in for: letter paper at 300 dpi.
pub const REFERENCE_PAGE: (usize, usize) = (2550, 3240);
/// Relative tolerance for cached against recomputed restoration cost.
pub const COST_CHECK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sigmas: Vec<f64>,
    pub seed: u64,
    pub methods: Vec<Mode>,
    /// Settings shared by every method; the mode field is ignored.
    pub compress: CompressConfig,
    /// Worker threads; `None` reads [`WORKERS_ENV`], falling back to rayon's
    /// default.
    pub workers: Option<usize>,
    /// Keep each row's bitstream in the report.
    pub keep_bitstreams: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sigmas: SIGMA2_LEVELS.to_vec(),
            seed: 0,
            methods: Mode::ALL.to_vec(),
            compress: CompressConfig::default(),
            workers: None,
            keep_bitstreams: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub image: String,
    pub method: Mode,
    pub sigma2: f64,
    /// Seed of the noise realisation, shared by all methods on this page and
    /// variance.
    pub seed: u64,
    pub noisy_error_pixels: usize,
    /// Error pixels of the coded image against the clean page.
    pub error_pixels: usize,
    pub bytes: usize,
    pub compression_ratio: f64,
    /// The stream decodes to exactly the coded image.
    pub lossless: bool,
    /// Restoring methods: the cost never rose and cached costs matched full
    /// recomputation. Always true for the others.
    pub descent_ok: bool,
    pub refinement_bits: usize,
    pub refinement_estimate_bits: f64,
    pub refinement_adaptive_bits: f64,
    pub wall_seconds: f64,
    pub bitstream: Option<Vec<u8>>,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    /// Sorted by image, method name, then variance.
    pub rows: Vec<BenchRow>,
    pub page_size: (usize, usize),
    pub workers: usize,
    pub wall_seconds: f64,
}

/// Seed of the noise realisation for one page and variance index.
pub fn noise_seed(seed: u64, image: usize, sigma_index: usize) -> u64 {
    // splitmix64 finaliser over the packed triple
    let mut z = seed
        .wrapping_add((image as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((sigma_index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `*.pbm` files of `dir`, sorted by file name, named by file stem.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Vec<(String, BinaryImage)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pbm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((name, load_any(p)?))
        })
        .collect()
}

fn workers(config: &BenchConfig) -> Result<usize> {
    if let Some(n) = config.workers {
        return Ok(n.max(1));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(rayon::current_num_threads()),
    }
}

fn run_one(
    name: &str,
    clean: &BinaryImage,
    sigma2: f64,
    seed: u64,
    method: Mode,
    config: &BenchConfig,
) -> Result<BenchRow> {
    let start = Instant::now();
    let mut cc = config.compress.clone();
    cc.mode = method;
    cc.restoration.filter_variance = sigma2;
    let filter = build_filter(sigma2, cc.restoration.filter_size)?;
    let y = synthesize_noisy(clean, &filter, seed);
    let (bytes, report) = compress(&y, &cc)?;
    let lossless = decode(&bytes).is_ok_and(|d| d == report.image);
    let descent_ok = report
        .restoration
        .as_ref()
        .is_none_or(|s| verify_descent(s, COST_CHECK_TOLERANCE).is_ok());
    Ok(BenchRow {
        image: name.to_string(),
        method,
        sigma2,
        seed,
        noisy_error_pixels: error_count(&y, clean)?.0,
        error_pixels: error_count(&report.image, clean)?.0,
        bytes: bytes.len(),
        compression_ratio: report.compression_ratio(),
        lossless,
        descent_ok,
        refinement_bits: report.segments.refinements * 8,
        refinement_estimate_bits: report.refinement_estimate_bits,
        refinement_adaptive_bits: report.refinement_adaptive_bits,
        wall_seconds: start.elapsed().as_secs_f64(),
        bitstream: config.keep_bitstreams.then_some(bytes),
    })
}

/// Runs every (page, variance, method) combination of `config` on `corpus`.
/// The restoration's filter variance is set to the synthesis variance.
pub fn run_benchmark(corpus: &[(String, BinaryImage)], config: &BenchConfig) -> Result<BenchReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let start = Instant::now();
    let n_workers = workers(config)?;
    let jobs: Vec<(usize, usize, Mode)> = (0..corpus.len())
        .flat_map(|i| (0..config.sigmas.len()).flat_map(move |k| config.methods.iter().map(move |&m| (i, k, m))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n_workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut rows = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, k, m)| {
                let (name, clean) = &corpus[i];
                let seed = noise_seed(config.seed, i, k);
                run_one(name, clean, config.sigmas[k], seed, m, config)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by(|a, b| {
        (a.image.as_str(), a.method.name())
            .cmp(&(b.image.as_str(), b.method.name()))
            .then(a.sigma2.total_cmp(&b.sigma2))
    });
    Ok(BenchReport {
        rows,
        page_size: (corpus[0].1.width(), corpus[0].1.height()),
        workers: n_workers,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Per-method, per-variance means.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Mode,
    pub sigma2: f64,
    pub rows: usize,
    pub mean_noisy_error_pixels: f64,
    pub mean_error_pixels: f64,
    pub mean_bytes: f64,
    pub mean_compression_ratio: f64,
}

impl BenchReport {
    /// Rows in the documented CSV schema. Timing is left out so that equal
    /// inputs give byte-identical files.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# mbdl bench csv v{CSV_VERSION}\n{CSV_HEADER}\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{:.6},{},{}",
                r.image,
                r.method,
                r.sigma2,
                r.seed,
                r.noisy_error_pixels,
                r.error_pixels,
                r.bytes,
                r.compression_ratio,
                r.lossless,
                r.descent_ok
            )
            .expect("writing to a String");
        }
        out
    }

    /// Means per method and variance, methods in their listed order.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut keys: Vec<(Mode, f64)> = Vec::new();
        for r in &self.rows {
            if !keys.iter().any(|&(m, s)| m == r.method && s == r.sigma2) {
                keys.push((r.method, r.sigma2));
            }
        }
        keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        keys.into_iter()
            .map(|(method, sigma2)| {
                let rows: Vec<&BenchRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.method == method && r.sigma2 == sigma2)
                    .collect();
                let n = rows.len() as f64;
                let mean = |f: &dyn Fn(&BenchRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
                Aggregate {
                    method,
                    sigma2,
                    rows: rows.len(),
                    mean_noisy_error_pixels: mean(&|r| r.noisy_error_pixels as f64),
                    mean_error_pixels: mean(&|r| r.error_pixels as f64),
                    mean_bytes: mean(&|r| r.bytes as f64),
                    mean_compression_ratio: mean(&|r| r.compression_ratio),
                }
            })
            .collect()
    }

    pub fn aggregate(&self, method: Mode, sigma2: f64) -> Option<Aggregate> {
        self.aggregates()
            .into_iter()
            .find(|a| a.method == method && a.sigma2 == sigma2)
    }

    /// Human-readable table of the aggregates with run metadata.
    pub fn summary(&self) -> String {
        let (w, h) = self.page_size;
        let (rw, rh) = REFERENCE_PAGE;
        let images = {
            let mut names: Vec<&str> = self.rows.iter().map(|r| r.image.as_str()).collect();
            names.dedup();
            names.len()
        };
        let mut out = String::new();
        let _ = writeln!(out, "pages: {images} of {w}x{h}");
        let _ = writeln!(
            out,
            "scale vs {rw}x{rh} reference page: {:.4} linear, {:.4} area",
            (w as f64 / rw as f64).min(h as f64 / rh as f64),
            (w * h) as f64 / (rw * rh) as f64
        );
        let _ = writeln!(out, "workers: {}, wall time: {:.2} s", self.workers, self.wall_seconds);
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>10} {:>10} {:>10} {:>8}",
            "method", "sigma2", "noisy e", "e", "bytes", "ratio"
        );
        for a in self.aggregates() {
            let _ = writeln!(
                out,
                "{:<14} {:>6} {:>10.1} {:>10.1} {:>10.1} {:>8.2}",
                a.method.name(),
                a.sigma2,
                a.mean_noisy_error_pixels,
                a.mean_error_pixels,
                a.mean_bytes,
                a.mean_compression_ratio
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{render_page, PageConfig};

    fn small_corpus() -> Vec<(String, BinaryImage)> {
        let cfg = PageConfig {
            width: 200,
            height: 120,
            glyphs: 40,
        };
        (0..2).map(|k| (format!("page_{k:03}"), render_page(&cfg, k))).collect()
    }

    fn bench(methods: &[Mode]) -> BenchReport {
        let config = BenchConfig {
            sigmas: vec![0.1, 0.16],
            seed: 5,
            methods: methods.to_vec(),
            workers: Some(1),
            ..BenchConfig::default()
        };
        run_benchmark(&small_corpus(), &config).unwrap()
    }

    #[test]
    fn noise_seeds_differ_per_cell() {
        let mut seeds: Vec<u64> = (0..4).flat_map(|i| (0..4).map(move |k| noise_seed(7, i, k))).collect();
        seeds.sort();
        seeds.dedup();
        assert_eq!(seeds.len(), 16);
        assert_eq!(noise_seed(7, 1, 2), noise_seed(7, 1, 2));
        assert_ne!(noise_seed(7, 1, 2), noise_seed(8, 1, 2));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            run_benchmark(&[], &BenchConfig::default()),
            Err(Error::EmptyCorpus)
        ));
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn lossless_methods_keep_the_noisy_error_count() {
        let report = bench(&[Mode::CeeLossless, Mode::WxorLossless]);
        assert_eq!(report.rows.len(), 2 * 2 * 2);
        for r in &report.rows {
            assert_eq!(r.error_pixels, r.noisy_error_pixels);
            assert!(r.lossless && r.descent_ok);
        }
    }

    #[test]
    fn rows_are_sorted_and_csv_is_stable() {
        let a = bench(&[Mode::WxorLossless, Mode::MbirDl]);
        let keys: Vec<(String, &str, f64)> = a
            .rows
            .iter()
            .map(|r| (r.image.clone(), r.method.name(), r.sigma2))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|x, y| (&x.0, x.1).cmp(&(&y.0, y.1)).then(x.2.total_cmp(&y.2)));
        assert_eq!(keys, sorted);
        let csv = a.to_csv();
        assert_eq!(csv.lines().nth(1), Some(CSV_HEADER));
        assert_eq!(csv.lines().count(), 2 + a.rows.len());
        assert_eq!(csv, bench(&[Mode::WxorLossless, Mode::MbirDl]).to_csv());
    }

    #[test]
    fn ratio_matches_bytes() {
        for r in bench(&[Mode::CeeLossless]).rows {
            assert_eq!(r.compression_ratio, (200.0 * 120.0 / 8.0) / r.bytes as f64);
        }
    }

    #[test]
    fn summary_lists_every_aggregate() {
        let report = bench(&[Mode::CeeLossless]);
        let aggs = report.aggregates();
        assert_eq!(aggs.len(), 2);
        assert!(aggs.iter().all(|a| a.rows == 2));
        let s = report.summary();
        assert!(s.contains("200x120") && s.contains("cee-lossless"));
    }

    #[test]
    fn corpus_loads_sorted_by_name() {
        let dir = tempfile::tempdir().unwrap();
        crate::fixture::render_fixture_corpus(dir.path(), 3, 1).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let corpus = load_corpus(dir.path()).unwrap();
        let names: Vec<&str> = corpus.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["page_000", "page_001", "page_002"]);
    }
}
