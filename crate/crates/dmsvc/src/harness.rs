//! Seeded Monte Carlo experiment engine: BLER sweeps over SNR, power ratio,
//! and mapping shape, plus the closed-form spectral-efficiency table.
//!
//! Determinism: every draw of a run comes from a stream keyed by
//! `(master_seed, purpose, point, trial)` (see [`crate::channel::stream_rng`]),
//! and per-point counters aggregate commutatively, so results are byte-
//! identical at any parallelism level and in any execution order. Sweep
//! points are numbered in argument order; the shape sweep numbers points as
//! `pair_index * snr_count + snr_index`.

use rayon::prelude::*;
use std::fmt;

use crate::channel::{
    measurement_matrix, realize_channel, stream_rng, transmit, Codebook, StreamPurpose,
};
use crate::codec::{encode, Packet};
use crate::decoder::{decode, DecodeFailure};
use crate::params::{ConfigError, MappingShape, Modulation, SystemConfig};
use crate::real::Real;

/// Normal quantile for two-sided 95% coverage.
pub const WILSON_Z95: f64 = 1.959963984540054;

/// Wilson score interval for `errors` out of `trials` at quantile `z`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0);
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// How one transmission ended. Every trial lands in exactly one bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialOutcome {
    Ok,
    WrongBits,
    InvalidSupport,
    SingularSupport,
}

/// Whether a sweep reuses one codebook or regenerates it per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookMode {
    PerRun,
    PerTrial,
}

/// Value of the swept axis at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisValue {
    SnrDb(f64),
    Alpha(f64),
    BlockShape {
        block_len: usize,
        num_singles: usize,
    },
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AxisValue::SnrDb(v) => write!(f, "{}", fmt_g6(v)),
            AxisValue::Alpha(v) => write!(f, "{}", fmt_g6(v)),
            AxisValue::BlockShape {
                block_len,
                num_singles,
            } => write!(f, "L{block_len}Ks{num_singles}"),
        }
    }
}

/// Aggregated outcome counts at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: AxisValue,
    pub snr_db: f64,
    pub trials: u64,
    pub ok: u64,
    pub wrong_bits: u64,
    pub invalid_support: u64,
    pub singular_support: u64,
}

impl SweepPoint {
    pub fn errors(&self) -> u64 {
        self.wrong_bits + self.invalid_support + self.singular_support
    }

    pub fn bler(&self) -> f64 {
        self.errors() as f64 / self.trials as f64
    }

    pub fn wilson95(&self) -> (f64, f64) {
        wilson_interval(self.errors(), self.trials, WILSON_Z95)
    }
}

/// One sweep: an axis label and its points in sweep order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: &'static str,
    pub points: Vec<SweepPoint>,
}

pub const CSV_HEADER: &str =
    "axis,value,snr_db,trials,errors,bler,ci_low,ci_high,failure_invalid_support,failure_singular";

/// Six significant digits, scientific.
fn fmt_g6(x: f64) -> String {
    format!("{x:.5e}")
}

impl SweepResult {
    /// CSV rows for this sweep (no header); see [`CSV_HEADER`].
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            let (lo, hi) = p.wilson95();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                self.axis,
                p.value,
                fmt_g6(p.snr_db),
                p.trials,
                p.errors(),
                fmt_g6(p.bler()),
                fmt_g6(lo),
                fmt_g6(hi),
                p.invalid_support,
                p.singular_support,
            ));
        }
        out
    }

    /// Complete CSV document with the mandatory header.
    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}", self.csv_rows())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    ok: u64,
    wrong_bits: u64,
    invalid_support: u64,
    singular_support: u64,
}

impl Counts {
    fn add(self, other: Counts) -> Counts {
        Counts {
            ok: self.ok + other.ok,
            wrong_bits: self.wrong_bits + other.wrong_bits,
            invalid_support: self.invalid_support + other.invalid_support,
            singular_support: self.singular_support + other.singular_support,
        }
    }

    fn from_outcome(outcome: TrialOutcome) -> Counts {
        let mut c = Counts::default();
        match outcome {
            TrialOutcome::Ok => c.ok = 1,
            TrialOutcome::WrongBits => c.wrong_bits = 1,
            TrialOutcome::InvalidSupport => c.invalid_support = 1,
            TrialOutcome::SingularSupport => c.singular_support = 1,
        }
        c
    }
}

/// Runs one end-to-end transmission.
pub fn run_trial<T: Real>(
    cfg: &SystemConfig,
    snr_db: f64,
    master_seed: u64,
    point: u64,
    trial: u64,
    codebook: &Codebook,
) -> TrialOutcome {
    let total_bits = cfg.bit_budget().expect("validated configuration").total() as usize;
    let mut packet_rng = stream_rng(master_seed, StreamPurpose::Packet, point, trial);
    let packet = Packet::random(total_bits, &mut packet_rng);
    let s = encode::<T>(&packet, cfg).expect("validated configuration");
    let x = codebook.spread(&s);

    let mut channel_rng = stream_rng(master_seed, StreamPurpose::Channel, point, trial);
    let ch = realize_channel::<T, _>(cfg, snr_db, &mut channel_rng);
    let mut noise_rng = stream_rng(master_seed, StreamPurpose::Noise, point, trial);
    let y = transmit(&x, &ch, &mut noise_rng);
    let phi = measurement_matrix(codebook, &ch);

    let result = decode(&y, &phi, cfg).expect("validated configuration");
    match result.packet {
        Ok(recovered) if recovered == packet => TrialOutcome::Ok,
        Ok(_) => TrialOutcome::WrongBits,
        Err(DecodeFailure::InvalidSupport) => TrialOutcome::InvalidSupport,
        Err(DecodeFailure::SingularSupport) => TrialOutcome::SingularSupport,
    }
}

fn run_point<T: Real>(
    cfg: &SystemConfig,
    value: AxisValue,
    snr_db: f64,
    trials: u64,
    master_seed: u64,
    point: u64,
    mode: CodebookMode,
) -> SweepPoint {
    let shared = match mode {
        CodebookMode::PerRun => Some(Codebook::generate(
            master_seed,
            cfg.subcarriers,
            cfg.vector_len,
            cfg.nonzero_count(),
        )),
        CodebookMode::PerTrial => None,
    };
    let counts = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let outcome = match &shared {
                Some(cb) => run_trial::<T>(cfg, snr_db, master_seed, point, trial, cb),
                None => {
                    let cb = Codebook::generate_for_trial(
                        master_seed,
                        cfg.subcarriers,
                        cfg.vector_len,
                        cfg.nonzero_count(),
                        point,
                        trial,
                    );
                    run_trial::<T>(cfg, snr_db, master_seed, point, trial, &cb)
                }
            };
            Counts::from_outcome(outcome)
        })
        .reduce(Counts::default, Counts::add);
    SweepPoint {
        value,
        snr_db,
        trials,
        ok: counts.ok,
        wrong_bits: counts.wrong_bits,
        invalid_support: counts.invalid_support,
        singular_support: counts.singular_support,
    }
}

/// BLER versus SNR.
pub fn run_bler_sweep<T: Real>(
    cfg: &SystemConfig,
    snr_db_list: &[f64],
    trials_per_point: u64,
    master_seed: u64,
) -> Result<SweepResult, ConfigError> {
    run_bler_sweep_with::<T>(
        cfg,
        snr_db_list,
        trials_per_point,
        master_seed,
        CodebookMode::PerRun,
    )
}

/// BLER versus SNR with an explicit codebook mode.
pub fn run_bler_sweep_with<T: Real>(
    cfg: &SystemConfig,
    snr_db_list: &[f64],
    trials_per_point: u64,
    master_seed: u64,
    mode: CodebookMode,
) -> Result<SweepResult, ConfigError> {
    cfg.ensure_valid()?;
    cfg.bit_budget()?;
    let points = snr_db_list
        .iter()
        .enumerate()
        .map(|(i, &snr)| {
            run_point::<T>(
                cfg,
                AxisValue::SnrDb(snr),
                snr,
                trials_per_point,
                master_seed,
                i as u64,
                mode,
            )
        })
        .collect();
    Ok(SweepResult {
        axis: "snr_db",
        points,
    })
}

/// BLER versus the power allocation ratio at a fixed SNR.
pub fn run_alpha_sweep<T: Real>(
    cfg: &SystemConfig,
    alphas: &[f64],
    snr_db: f64,
    trials_per_point: u64,
    master_seed: u64,
) -> Result<SweepResult, ConfigError> {
    let mut derived: Vec<SystemConfig> = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut c = cfg.clone();
        c.alpha = alpha;
        c.ensure_valid()?;
        c.bit_budget()?;
        derived.push(c);
    }
    let points = derived
        .iter()
        .zip(alphas)
        .enumerate()
        .map(|(i, (c, &alpha))| {
            run_point::<T>(
                c,
                AxisValue::Alpha(alpha),
                snr_db,
                trials_per_point,
                master_seed,
                i as u64,
                CodebookMode::PerRun,
            )
        })
        .collect();
    Ok(SweepResult {
        axis: "alpha",
        points,
    })
}

/// BLER versus SNR for several `(block_len, num_singles)` shapes; one
/// [`SweepResult`] per shape. Bit budgets are rederived per shape, and every
/// derived configuration is validated before any trial runs.
pub fn run_param_sweep<T: Real>(
    cfg: &SystemConfig,
    shapes: &[(usize, usize)],
    snr_db_list: &[f64],
    trials_per_point: u64,
    master_seed: u64,
) -> Result<Vec<SweepResult>, ConfigError> {
    let mut derived = Vec::with_capacity(shapes.len());
    for &(block_len, num_singles) in shapes {
        let mut c = cfg.clone();
        c.block_len = block_len;
        c.num_singles = num_singles;
        c.ensure_valid()?;
        c.bit_budget()?;
        derived.push(c);
    }
    Ok(derived
        .iter()
        .zip(shapes)
        .enumerate()
        .map(|(pair_idx, (c, &(block_len, num_singles)))| {
            let points = snr_db_list
                .iter()
                .enumerate()
                .map(|(snr_idx, &snr)| {
                    run_point::<T>(
                        c,
                        AxisValue::BlockShape {
                            block_len,
                            num_singles,
                        },
                        snr,
                        trials_per_point,
                        master_seed,
                        (pair_idx * snr_db_list.len() + snr_idx) as u64,
                        CodebookMode::PerRun,
                    )
                })
                .collect();
            SweepResult {
                axis: "l_ks",
                points,
            }
        })
        .collect())
}

/// One row of the spectral-efficiency comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct SeRow {
    pub num_blocks: usize,
    pub block_len: usize,
    pub num_singles: usize,
    pub modulation: Modulation,
    pub se_dmsvc: f64,
    pub se_ssc: f64,
}

impl SeRow {
    pub fn ratio(&self) -> f64 {
        self.se_dmsvc / self.se_ssc
    }
}

/// The dual-mapping shapes used for the default SE table: all shapes with
/// six non-zeros, a genuine block (`l >= 2`), and at least one single.
pub fn default_se_shapes() -> Vec<(usize, usize, usize)> {
    vec![(1, 5, 1), (1, 4, 2), (1, 3, 3), (2, 2, 2)]
}

/// Closed-form SE comparison: one row per `(k_b, l, k_s)` shape and
/// modulation order. Deterministic and seed-free.
pub fn se_table(
    vector_len: usize,
    c_const: f64,
    shapes: &[(usize, usize, usize)],
    orders: &[Modulation],
) -> Result<Vec<SeRow>, ConfigError> {
    let mut rows = Vec::with_capacity(shapes.len() * orders.len());
    for &(num_blocks, block_len, num_singles) in shapes {
        let shape = MappingShape {
            vector_len,
            num_blocks,
            block_len,
            num_singles,
        };
        let violations = shape.validate();
        if !violations.is_empty() {
            return Err(ConfigError::Invalid(violations));
        }
        for &modulation in orders {
            let (se_dmsvc, se_ssc) = shape.spectral_efficiency::<f64>(modulation, c_const)?;
            rows.push(SeRow {
                num_blocks,
                block_len,
                num_singles,
                modulation,
                se_dmsvc,
                se_ssc,
            });
        }
    }
    Ok(rows)
}

/// CSV for the SE table.
pub fn se_table_csv(rows: &[SeRow]) -> String {
    let mut out = String::from("k_b,l,k_s,mod_order,se_dmsvc,se_ssc,ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.num_blocks,
            r.block_len,
            r.num_singles,
            r.modulation,
            fmt_g6(r.se_dmsvc),
            fmt_g6(r.se_ssc),
            fmt_g6(r.ratio()),
        ));
    }
    out
}
