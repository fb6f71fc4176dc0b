//! `mbdl` command line: synthesize noise, restore, encode, decode, evaluate
//! and benchmark bilevel document pages.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use mbdl::bench::{load_corpus, run_benchmark};
use mbdl::codec::{compress, decode, Mode};
use mbdl::config::Settings;
use mbdl::fixture::render_fixture_corpus;
use mbdl::forward::{build_filter, synthesize_noisy};
use mbdl::pbm::{load_any, save_image, PbmFormat};
use mbdl::restore::{restore, restore_mrf, verify_descent};
use mbdl::{error_count, Error};

#[derive(Parser)]
#[command(
    name = "mbdl",
    version,
    about = "Restore and losslessly compress noisy bilevel document images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Filter variance for noise synthesis and restoration.
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// wxor-lossless, cee-lossless, mbir-mrf or mbir-dl.
    #[arg(long)]
    mode: Option<Mode>,
    /// Maximum outer restoration iterations.
    #[arg(long)]
    max_iters: Option<usize>,
    /// key = value settings applied after the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade a clean PBM with filtered Bernoulli noise.
    Synth {
        clean: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Restore a noisy PBM (mode mbir-dl, the default, or mbir-mrf).
    Restore {
        noisy: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the cost trace here as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the learned dictionary here as PBM files.
        #[arg(long)]
        dict_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compress a PBM into a bitstream.
    Encode {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Decompress a bitstream into a PBM.
    Decode {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write plain-text P1 instead of packed P4.
        #[arg(long)]
        plain: bool,
    },
    /// Count differing pixels between two PBMs.
    Eval { a: PathBuf, b: PathBuf },
    /// Run every method over a corpus of clean PBMs.
    Bench {
        corpus: PathBuf,
        /// CSV output path; the summary goes to stdout.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write generated clean test pages.
    Render {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        pages: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Usage(msg),
            e => Failure::Data(e),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn settings(common: &Common) -> CliResult<Settings> {
    let mut s = Settings::default();
    if let Some(v) = common.sigma2 {
        s.set("sigma2", &v.to_string())?;
    }
    if let Some(v) = common.seed {
        s.seed = v;
    }
    if let Some(m) = common.mode {
        s.compress.mode = m;
    }
    if let Some(n) = common.max_iters {
        s.compress.restoration.max_outer_iters = n;
    }
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::Data(Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            )))
        })?;
        s.apply_str(&text)?;
    }
    Ok(s)
}

fn load(path: &Path) -> CliResult<mbdl::BinaryImage> {
    load_any(path).map_err(|e| Failure::Data(with_path(e, path)))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        e => e,
    }
}

fn write(path: &Path, data: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, data).map_err(|e| Failure::Data(with_path(e.into(), path)))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth { clean, out, common } => {
            let s = settings(&common)?;
            let x = load(&clean)?;
            let filter = build_filter(s.sigma2, s.compress.restoration.filter_size)?;
            let y = synthesize_noisy(&x, &filter, s.seed);
            save_image(&y, &out, PbmFormat::Raw)?;
            println!("{}", error_count(&x, &y)?.0);
        }
        Command::Restore {
            noisy,
            out,
            trace,
            dict_dir,
            common,
        } => {
            let s = settings(&common)?;
            let y = load(&noisy)?;
            let r = &s.compress.restoration;
            let mode = match s.compress.mode {
                m if m.restores() => m,
                _ if common.mode.is_none() => Mode::MbirDl,
                m => {
                    return Err(Failure::Usage(format!(
                        "restore needs mode mbir-dl or mbir-mrf, not {m}"
                    )))
                }
            };
            let state = match mode {
                Mode::MbirDl => restore(&y, r)?,
                Mode::MbirMrf => restore_mrf(&y, r)?,
                _ => unreachable!("restoring mode"),
            };
            if let Err(e) = verify_descent(&state, mbdl::bench::COST_CHECK_TOLERANCE) {
                log::warn!("{e}");
            }
            save_image(&state.image, &out, PbmFormat::Raw)?;
            if let Some(path) = trace {
                write(&path, state.trace_csv())?;
            }
            if let Some(dir) = dict_dir {
                state.dictionary.dump(dir)?;
            }
            info!(
                "{} iterations, {} entries, cost {:.3} nats",
                state.iteration,
                state.dictionary.len(),
                state.total_cost()
            );
            println!("{}", error_count(&y, &state.image)?.0);
        }
        Command::Encode { input, out, common } => {
            let s = settings(&common)?;
            let x = load(&input)?;
            let (bytes, report) = compress(&x, &s.compress)?;
            write(&out, &bytes)?;
            println!(
                "{} bytes, ratio {:.3}, {} symbols, {} entries",
                bytes.len(),
                report.compression_ratio(),
                report.symbols,
                report.dictionary_entries
            );
        }
        Command::Decode { input, out, plain } => {
            let bytes = std::fs::read(&input).map_err(|e| Failure::Data(with_path(e.into(), &input)))?;
            let img = decode(&bytes)?;
            let format = if plain { PbmFormat::Plain } else { PbmFormat::Raw };
            save_image(&img, &out, format)?;
        }
        Command::Eval { a, b } => {
            println!("{}", error_count(&load(&a)?, &load(&b)?)?.0);
        }
        Command::Bench { corpus, out, common } => {
            let s = settings(&common)?;
            let pages = load_corpus(&corpus).map_err(|e| Failure::Data(with_path(e, &corpus)))?;
            info!(
                "{} pages, {} variances, {} methods",
                pages.len(),
                s.sigmas.len(),
                s.methods.len()
            );
            let report = run_benchmark(&pages, &s.bench_config())?;
            write(&out, report.to_csv())?;
            print!("{}", report.summary());
        }
        Command::Render { out, pages, seed } => {
            let paths = render_fixture_corpus(&out, pages, seed)?;
            info!("wrote {} pages to {}", paths.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
