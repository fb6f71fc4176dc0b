//! `key = value` run settings. Blank lines and `#` comments are ignored;
//! later keys win.

use std::path::Path;

use crate::bench::{BenchConfig, SIGMA2_LEVELS};
use crate::codec::{CompressConfig, Mode};
use crate::error::{Error, Result};

/// Everything a CLI run can be configured with.
#[derive(Debug, Clone)]
pub struct Settings {
    /// Noise variance for synthesis; also the restoration filter variance.
    pub sigma2: f64,
    pub seed: u64,
    pub compress: CompressConfig,
    /// Variances swept by the benchmark.
    pub sigmas: Vec<f64>,
    pub methods: Vec<Mode>,
    pub workers: Option<usize>,
}

impl Default for Settings {
    fn default() -> Self {
        let compress = CompressConfig::default();
        Self {
            sigma2: compress.restoration.filter_variance,
            seed: 0,
            compress,
            sigmas: SIGMA2_LEVELS.to_vec(),
            methods: Mode::ALL.to_vec(),
            workers: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key} needs at least one value")));
    }
    Ok(items)
}

impl Settings {
    /// Sets one key. Dashes and underscores in keys are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let r = &mut self.compress.restoration;
        match key.as_str() {
            "sigma2" => {
                self.sigma2 = parse(&key, value)?;
                r.filter_variance = self.sigma2;
            }
            "seed" => self.seed = parse(&key, value)?,
            "mode" => self.compress.mode = parse(&key, value)?,
            "max_iters" => r.max_outer_iters = parse(&key, value)?,
            "max_sweeps" => r.max_sweeps = parse(&key, value)?,
            "filter_size" => r.filter_size = parse(&key, value)?,
            "hyper_a" => r.hyper_a = parse(&key, value)?,
            "hyper_b" => r.hyper_b = parse(&key, value)?,
            "convergence" => r.convergence = parse(&key, value)?,
            "mrf_beta" => r.mrf_beta = parse(&key, value)?,
            "max_symbol_area" => r.max_symbol_area = parse(&key, value)?,
            "max_dim_diff" => r.cluster.max_dim_diff = parse(&key, value)?,
            "max_signature_diff" => r.cluster.max_signature_diff = parse(&key, value)?,
            "wxor_threshold" => r.wxor.threshold = parse(&key, value)?,
            "cee_rounds" => self.compress.cee_rounds = parse(&key, value)?,
            "sigmas" => self.sigmas = parse_list(&key, value)?,
            "methods" => self.methods = parse_list(&key, value)?,
            "workers" => self.workers = Some(parse(&key, value)?),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.apply_str(&std::fs::read_to_string(path)?)
    }

    pub fn bench_config(&self) -> BenchConfig {
        BenchConfig {
            sigmas: self.sigmas.clone(),
            seed: self.seed,
            methods: self.methods.clone(),
            compress: self.compress.clone(),
            workers: self.workers,
            keep_bitstreams: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_override_defaults() {
        let mut s = Settings::default();
        s.apply_str("# run\nsigma2 = 0.14\nmode=mbir-mrf\nmax-iters = 4  # short\n\nsigmas = 0.1, 0.16\nmethods = cee-lossless,mbir-dl\nworkers=2\n")
            .unwrap();
        assert_eq!(s.sigma2, 0.14);
        assert_eq!(s.compress.restoration.filter_variance, 0.14);
        assert_eq!(s.compress.mode, Mode::MbirMrf);
        assert_eq!(s.compress.restoration.max_outer_iters, 4);
        assert_eq!(s.sigmas, vec![0.1, 0.16]);
        assert_eq!(s.methods, vec![Mode::CeeLossless, Mode::MbirDl]);
        assert_eq!(s.bench_config().workers, Some(2));
    }

    #[test]
    fn bad_lines_are_reported_with_line_numbers() {
        let mut s = Settings::default();
        let e = s.apply_str("seed = 1\nnonsense\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(s.apply_str("colour = red").is_err());
        assert!(s.apply_str("seed = -1").is_err());
        assert!(s.apply_str("methods = ,").is_err());
    }
}
