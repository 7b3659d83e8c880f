//! Command-line front end: encode/decode single packets, run Monte Carlo
//! sweeps, print the spectral-efficiency table, manage codebooks, and run the
//! OFDM diagonalization check.
//!
//! Exit codes: 0 success, 1 usage error, 2 configuration validation failure,
//! 3 runtime failure.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dmsvc::channel::{
    measurement_matrix, ofdm_equivalence_check, stream_rng, ChannelRealization, Codebook,
    StreamPurpose,
};
use dmsvc::codec::{encode, Packet};
use dmsvc::decoder::decode;
use dmsvc::harness::{
    default_se_shapes, run_alpha_sweep, run_bler_sweep_with, run_param_sweep, se_table,
    se_table_csv, CodebookMode, SweepResult, CSV_HEADER,
};
use dmsvc::params::{ConfigError, Modulation, SystemConfig};
use dmsvc::Complex;

#[derive(Parser)]
#[command(
    name = "dmsvc",
    version,
    about = "Dual-mapping sparse vector coding simulator"
)]
struct Cli {
    /// Worker threads for the Monte Carlo engine (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key-value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override one configuration key, e.g. `--set alpha=0.5` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a hex packet from stdin into the spread subcarrier vector (CSV).
    Encode {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output path (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode a received subcarrier vector (CSV on stdin) back to a hex packet.
    Decode {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Per-subcarrier channel gains as `re,im` CSV (default: all-ones).
        #[arg(long)]
        channel: Option<PathBuf>,
    },
    /// BLER vs SNR Monte Carlo sweep; writes the harness CSV.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated SNR list in dB, e.g. `--snr -4,-2,0,2`.
        #[arg(long, allow_hyphen_values = true)]
        snr: String,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        /// Regenerate the codebook for every trial instead of once per run.
        #[arg(long)]
        codebook_per_trial: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// BLER vs power allocation ratio at a fixed SNR.
    AlphaSweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated list of ratios, e.g. `--alphas 0.2,0.64,0.9`.
        #[arg(long)]
        alphas: String,
        #[arg(long, allow_hyphen_values = true)]
        snr: f64,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// BLER vs SNR for several block shapes `L:K_s`, e.g. `--shapes 2:1,3:2`.
    ParamSweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        shapes: String,
        #[arg(long, allow_hyphen_values = true)]
        snr: String,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form spectral-efficiency table.
    SeTable {
        /// Sparse vector length.
        #[arg(long)]
        n: usize,
        /// Sparsity-order constant in the subcarrier requirement.
        #[arg(long)]
        c: f64,
        /// Comma-separated modulation orders (default `4,16`).
        #[arg(long, default_value = "4,16")]
        orders: String,
        /// Mapping shapes as `k_b:l:k_s` triples (default: the six-non-zero set).
        #[arg(long)]
        shapes: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export or inspect a spreading codebook file.
    Codebook {
        #[command(subcommand)]
        action: CodebookAction,
    },
    /// Validate the frequency-domain shortcut: circulant channels diagonalize.
    CheckOfdm {
        /// Number of subcarriers.
        #[arg(long, default_value_t = 64)]
        m: usize,
        /// Channel tap count (must not exceed `m`).
        #[arg(long, default_value_t = 4)]
        taps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum CodebookAction {
    /// Generate the codebook a configuration implies and write it to a file.
    Export {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the header of a codebook file.
    Info { path: PathBuf },
}

enum AppError {
    Config(String),
    Runtime(String),
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Config(m) | AppError::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<SystemConfig, AppError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| AppError::Runtime(format!("{}: {e}", args.config.display())))?;
    let mut cfg = SystemConfig::from_kv_text(&text)?;
    for kv in &args.sets {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| AppError::Config(format!("override `{kv}` is not KEY=VALUE")))?;
        cfg.set_key(key.trim(), value.trim())?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn validated_config(args: &ConfigArgs) -> Result<SystemConfig, AppError> {
    let cfg = load_config(args)?;
    cfg.ensure_valid()?;
    cfg.bit_budget()?;
    Ok(cfg)
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), AppError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| AppError::Runtime(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            std::io::stdout().flush()?;
            Ok(())
        }
    }
}

fn read_stdin() -> Result<String, AppError> {
    let mut buf = String::new();
    std::io::stdin().read_to_string(&mut buf)?;
    Ok(buf)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, AppError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| AppError::Config(format!("bad {what} entry `{s}`")))
        })
        .collect()
}

fn parse_csv_complex(text: &str) -> Result<Vec<Complex<f64>>, AppError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("re")) {
            continue;
        }
        let (re, im) = line
            .split_once(',')
            .ok_or_else(|| AppError::Runtime(format!("line {}: expected `re,im`", i + 1)))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| AppError::Runtime(format!("line {}: bad number `{s}`", i + 1)))
        };
        out.push(Complex::new(parse(re)?, parse(im)?));
    }
    Ok(out)
}

fn sweep_csv(results: &[SweepResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        out.push_str(&r.csv_rows());
    }
    out
}

fn run(command: Command) -> Result<(), AppError> {
    match command {
        Command::Encode { cfg, out } => {
            let cfg = validated_config(&cfg)?;
            let total = cfg.bit_budget()?.total() as usize;
            let packet = Packet::from_hex(read_stdin()?.trim(), total)
                .map_err(|e| AppError::Runtime(e.to_string()))?;
            let s = encode::<f64>(&packet, &cfg).map_err(|e| AppError::Runtime(e.to_string()))?;
            let codebook = Codebook::generate(
                cfg.seed,
                cfg.subcarriers,
                cfg.vector_len,
                cfg.nonzero_count(),
            );
            let x = codebook.spread(&s);
            let mut csv = String::from("re,im\n");
            for v in &x {
                csv.push_str(&format!("{},{}\n", v.re, v.im));
            }
            write_output(out.as_deref(), &csv)
        }
        Command::Decode { cfg, channel } => {
            let cfg = validated_config(&cfg)?;
            let y = parse_csv_complex(&read_stdin()?)?;
            if y.len() != cfg.subcarriers {
                return Err(AppError::Runtime(format!(
                    "received vector has {} samples, the configuration needs {}",
                    y.len(),
                    cfg.subcarriers
                )));
            }
            let h_diag = match channel {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .map_err(|e| AppError::Runtime(format!("{}: {e}", path.display())))?;
                    let h = parse_csv_complex(&text)?;
                    if h.len() != cfg.subcarriers {
                        return Err(AppError::Runtime(format!(
                            "channel file has {} gains, the configuration needs {}",
                            h.len(),
                            cfg.subcarriers
                        )));
                    }
                    h
                }
                None => vec![Complex::new(1.0, 0.0); cfg.subcarriers],
            };
            let codebook = Codebook::generate(
                cfg.seed,
                cfg.subcarriers,
                cfg.vector_len,
                cfg.nonzero_count(),
            );
            let ch = ChannelRealization::new(h_diag, 0.0);
            let phi = measurement_matrix(&codebook, &ch);
            let result = decode(&y, &phi, &cfg)?;
            match result.packet {
                Ok(packet) => {
                    println!("{}", packet.to_hex());
                    Ok(())
                }
                Err(failure) => Err(AppError::Runtime(format!("decode failed: {failure}"))),
            }
        }
        Command::Simulate {
            cfg,
            snr,
            trials,
            codebook_per_trial,
            out,
        } => {
            let cfg = validated_config(&cfg)?;
            let snrs: Vec<f64> = parse_list(&snr, "snr")?;
            let mode = if codebook_per_trial {
                CodebookMode::PerTrial
            } else {
                CodebookMode::PerRun
            };
            let result = run_bler_sweep_with::<f64>(&cfg, &snrs, trials, cfg.seed, mode)?;
            write_output(out.as_deref(), &sweep_csv(&[result]))
        }
        Command::AlphaSweep {
            cfg,
            alphas,
            snr,
            trials,
            out,
        } => {
            let cfg = load_config(&cfg)?;
            let alphas: Vec<f64> = parse_list(&alphas, "alpha")?;
            let result = run_alpha_sweep::<f64>(&cfg, &alphas, snr, trials, cfg.seed)?;
            write_output(out.as_deref(), &sweep_csv(&[result]))
        }
        Command::ParamSweep {
            cfg,
            shapes,
            snr,
            trials,
            out,
        } => {
            let cfg = load_config(&cfg)?;
            let snrs: Vec<f64> = parse_list(&snr, "snr")?;
            let mut pairs = Vec::new();
            for item in shapes.split(',') {
                let (l, k_s) = item
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| AppError::Config(format!("bad shape `{item}`, want L:K_s")))?;
                pairs.push((
                    l.parse()
                        .map_err(|_| AppError::Config(format!("bad block length `{l}`")))?,
                    k_s.parse()
                        .map_err(|_| AppError::Config(format!("bad single count `{k_s}`")))?,
                ));
            }
            let results = run_param_sweep::<f64>(&cfg, &pairs, &snrs, trials, cfg.seed)?;
            write_output(out.as_deref(), &sweep_csv(&results))
        }
        Command::SeTable {
            n,
            c,
            orders,
            shapes,
            out,
        } => {
            let orders = parse_list::<usize>(&orders, "modulation order")?
                .into_iter()
                .map(Modulation::from_order)
                .collect::<Result<Vec<_>, _>>()?;
            let shapes = match shapes {
                Some(text) => {
                    let mut triples = Vec::new();
                    for item in text.split(',') {
                        let parts: Vec<&str> = item.trim().split(':').collect();
                        if parts.len() != 3 {
                            return Err(AppError::Config(format!(
                                "bad shape `{item}`, want k_b:l:k_s"
                            )));
                        }
                        let parse = |s: &str| {
                            s.parse::<usize>()
                                .map_err(|_| AppError::Config(format!("bad shape part `{s}`")))
                        };
                        triples.push((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?));
                    }
                    triples
                }
                None => default_se_shapes(),
            };
            let rows = se_table(n, c, &shapes, &orders)?;
            write_output(out.as_deref(), &se_table_csv(&rows))
        }
        Command::Codebook { action } => match action {
            CodebookAction::Export { cfg, out } => {
                let cfg = validated_config(&cfg)?;
                let codebook = Codebook::generate(
                    cfg.seed,
                    cfg.subcarriers,
                    cfg.vector_len,
                    cfg.nonzero_count(),
                );
                fs::write(&out, codebook.to_bytes())
                    .map_err(|e| AppError::Runtime(format!("{}: {e}", out.display())))?;
                eprintln!(
                    "wrote {}x{} codebook (seed {}) to {}",
                    codebook.rows(),
                    codebook.cols(),
                    codebook.seed(),
                    out.display()
                );
                Ok(())
            }
            CodebookAction::Info { path } => {
                let bytes = fs::read(&path)
                    .map_err(|e| AppError::Runtime(format!("{}: {e}", path.display())))?;
                let codebook =
                    Codebook::from_bytes(&bytes).map_err(|e| AppError::Runtime(e.to_string()))?;
                println!(
                    "m={} n={} k_total={} seed={}",
                    codebook.rows(),
                    codebook.cols(),
                    codebook.k_total(),
                    codebook.seed()
                );
                Ok(())
            }
        },
        Command::CheckOfdm { m, taps, seed } => {
            if m == 0 || taps == 0 || taps > m {
                return Err(AppError::Config(format!(
                    "need 1 <= taps <= m, got m={m} taps={taps}"
                )));
            }
            let mut rng = stream_rng(seed, StreamPurpose::Channel, 0, 0);
            let check = ofdm_equivalence_check::<f64, _>(m, taps, &mut rng);
            println!(
                "max off-diagonal {:e}, max diagonal error {:e}",
                check.max_off_diagonal, check.max_diagonal_error
            );
            Ok(())
        }
    }
}
