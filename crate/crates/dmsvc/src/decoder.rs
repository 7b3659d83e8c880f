//! Receivers for the dual-mapping scheme.
//!
//! The two-stage decoder first sweeps an L-wide correlation window over the
//! measurement matrix to identify the non-zero blocks (refitting jointly over
//! the accumulated block support after each hit), cancels the reconstructed
//! block component, then recovers the single elements with a multipath
//! matching pursuit restricted to positions the encoder could actually have
//! used. Full-vector OMP and MMP baselines ignore the block structure and
//! recover all non-zeros at once.
//!
//! Everything here is deterministic: ties in correlation scores resolve to
//! the lowest start index, candidate paths order by residual norm then
//! lexicographic support.

use num_complex::Complex;
use thiserror::Error;

use crate::codec::{demap, partition_unstructured_support, Packet};
use crate::combinadics::{available_single_positions, BlockPlacement, SinglePlacement};
use crate::linalg::{
    column_correlations, least_squares_on_support, norm, residual_update, ComplexMatrix,
};
use crate::modem::QamAlphabet;
use crate::params::{ConfigError, DecoderKind, SystemConfig};
use crate::real::Real;

/// Why a decode attempt produced no packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeFailure {
    /// The recovered support cannot have been produced by the encoder.
    #[error("recovered support is not a valid codeword support")]
    InvalidSupport,
    /// A least-squares subproblem was rank deficient.
    #[error("rank-deficient support during value estimation")]
    SingularSupport,
}

/// Supports, symbol decisions, and residual history behind a decode.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeDiagnostics<T> {
    /// Sorted block support positions.
    pub block_support: Vec<usize>,
    /// Sorted single-element support positions.
    pub single_support: Vec<usize>,
    /// Symbol labels on the block positions, ascending position order.
    pub block_labels: Vec<usize>,
    /// Symbol labels on the single positions, ascending position order.
    pub single_labels: Vec<usize>,
    /// Residual norms per refit, starting at `||y||`; non-increasing.
    pub residual_norms: Vec<T>,
}

impl<T> Default for DecodeDiagnostics<T> {
    fn default() -> Self {
        DecodeDiagnostics {
            block_support: Vec::new(),
            single_support: Vec::new(),
            block_labels: Vec::new(),
            single_labels: Vec::new(),
            residual_norms: Vec::new(),
        }
    }
}

/// Outcome of one decode attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult<T> {
    pub packet: Result<Packet, DecodeFailure>,
    pub diagnostics: DecodeDiagnostics<T>,
}

/// Stage-one output: identified blocks and their estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Result<T> {
    /// Window start of each block in selection order.
    pub starts_in_order: Vec<usize>,
    /// Sorted union of all block positions.
    pub support: Vec<usize>,
    /// Block-component estimates on `support` (already rescaled by
    /// `1/sqrt(alpha)`), aligned with `support`.
    pub values: Vec<Complex<T>>,
    /// `y` minus the joint projection onto `support`.
    pub residual: Vec<Complex<T>>,
    /// `||y||` followed by the residual norm after each refit.
    pub residual_norms: Vec<T>,
}

/// Stage-two output: single-element support and estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Result<T> {
    pub support: Vec<usize>,
    /// Estimates rescaled by `1/sqrt(1 - alpha)`, aligned with `support`.
    pub values: Vec<Complex<T>>,
    pub residual_norms: Vec<T>,
}

/// Greedy pursuit output shared by OMP and MMP.
#[derive(Debug, Clone, PartialEq)]
pub struct PursuitResult<T> {
    /// Sorted recovered support (may be shorter than requested if the search
    /// ran out of usable columns).
    pub support: Vec<usize>,
    /// Best residual norm before and after each round.
    pub residual_norms: Vec<T>,
}

/// Correlation score of every window start: the sum of squared column
/// correlations over `[p, p + block_len)` for each `p` up to `n - block_len`.
/// Wrap-around windows are not candidates; the encoder never produces them.
pub fn block_window_scores<T: Real>(
    phi: &ComplexMatrix<T>,
    residual: &[Complex<T>],
    block_len: usize,
) -> Vec<T> {
    let c = column_correlations(phi, residual);
    if phi.cols() < block_len {
        return Vec::new();
    }
    (0..=phi.cols() - block_len)
        .map(|p| c[p..p + block_len].iter().copied().sum())
        .collect()
}

/// Best admissible window start and its score. A window is admissible when
/// none of its positions is excluded. Ties go to the smallest start.
pub fn block_search<T: Real>(
    phi: &ComplexMatrix<T>,
    residual: &[Complex<T>],
    block_len: usize,
    excluded: &[bool],
) -> Result<(usize, T), DecodeFailure> {
    let scores = block_window_scores(phi, residual, block_len);
    let mut best: Option<(usize, T)> = None;
    for (p, &score) in scores.iter().enumerate() {
        if excluded[p..p + block_len].iter().any(|&e| e) {
            continue;
        }
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((p, score));
        }
    }
    best.ok_or(DecodeFailure::InvalidSupport)
}

fn singular(_: crate::linalg::LinalgError) -> DecodeFailure {
    DecodeFailure::SingularSupport
}

/// Stage one: identify the block support. Each round picks the best window
/// on the current residual (windows overlapping previously selected blocks
/// are excluded), then refits jointly over the accumulated support.
pub fn stage1<T: Real>(
    y: &[Complex<T>],
    phi: &ComplexMatrix<T>,
    cfg: &SystemConfig,
) -> Result<Stage1Result<T>, DecodeFailure> {
    let mut excluded = vec![false; phi.cols()];
    let mut starts_in_order = Vec::with_capacity(cfg.num_blocks);
    let mut support: Vec<usize> = Vec::with_capacity(cfg.num_blocks * cfg.block_len);
    let mut residual = y.to_vec();
    let mut residual_norms = vec![norm(y)];
    let mut fit: Vec<Complex<T>> = Vec::new();

    for _ in 0..cfg.num_blocks {
        let (start, _) = block_search(phi, &residual, cfg.block_len, &excluded)?;
        starts_in_order.push(start);
        for p in start..start + cfg.block_len {
            excluded[p] = true;
        }
        support.extend(start..start + cfg.block_len);
        support.sort_unstable();
        fit = least_squares_on_support(phi, &support, y).map_err(singular)?;
        residual = residual_update(y, phi, &support, &fit);
        residual_norms.push(norm(&residual));
    }

    let inv_scale = T::of(cfg.alpha).sqrt().recip();
    Ok(Stage1Result {
        starts_in_order,
        support,
        values: fit.into_iter().map(|b| b * inv_scale).collect(),
        residual,
        residual_norms,
    })
}

/// Stage two: cancel the reconstructed block component with the raw (not
/// symbol-sliced) estimates, then recover the singles with MMP over the
/// positions the encoder could have used (outside blocks and guards).
pub fn stage2<T: Real>(
    y: &[Complex<T>],
    phi: &ComplexMatrix<T>,
    stage1: &Stage1Result<T>,
    cfg: &SystemConfig,
) -> Result<Stage2Result<T>, DecodeFailure> {
    if cfg.num_singles == 0 {
        return Ok(Stage2Result {
            support: Vec::new(),
            values: Vec::new(),
            residual_norms: Vec::new(),
        });
    }

    let block_scale = T::of(cfg.alpha).sqrt();
    let raw_fit: Vec<Complex<T>> = stage1.values.iter().map(|&v| v * block_scale).collect();
    let cancelled = residual_update(y, phi, &stage1.support, &raw_fit);

    let mut starts = stage1.starts_in_order.clone();
    starts.sort_unstable();
    let placement = BlockPlacement::new(starts, cfg.vector_len, cfg.block_len)
        .map_err(|_| DecodeFailure::InvalidSupport)?;
    let admissible = available_single_positions(&placement, cfg);
    let mut excluded = vec![true; cfg.vector_len];
    for &p in &admissible {
        excluded[p] = false;
    }

    let pursuit = mmp(&cancelled, phi, cfg.num_singles, cfg.path_budget, &excluded)?;
    let fit = least_squares_on_support(phi, &pursuit.support, &cancelled).map_err(singular)?;
    let inv_scale = T::of(1.0 - cfg.alpha).sqrt().recip();
    Ok(Stage2Result {
        support: pursuit.support,
        values: fit.into_iter().map(|b| b * inv_scale).collect(),
        residual_norms: pursuit.residual_norms,
    })
}

/// Classical orthogonal matching pursuit over the admissible columns.
pub fn omp<T: Real>(
    y: &[Complex<T>],
    phi: &ComplexMatrix<T>,
    k_sparse: usize,
    excluded: &[bool],
) -> Result<PursuitResult<T>, DecodeFailure> {
    let mut support: Vec<usize> = Vec::with_capacity(k_sparse);
    let mut residual = y.to_vec();
    let mut residual_norms = vec![norm(y)];

    for _ in 0..k_sparse {
        let c = column_correlations(phi, &residual);
        let mut best: Option<(usize, T)> = None;
        for (j, &score) in c.iter().enumerate() {
            if excluded[j] || support.contains(&j) {
                continue;
            }
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, _)) = best else { break };
        let idx = support.partition_point(|&p| p < j);
        support.insert(idx, j);
        let Ok(fit) = least_squares_on_support(phi, &support, y) else {
            support.remove(idx);
            break;
        };
        residual = residual_update(y, phi, &support, &fit);
        residual_norms.push(norm(&residual));
    }

    Ok(PursuitResult {
        support,
        residual_norms,
    })
}

/// Breadth-limited multipath matching pursuit: up to `path_budget` candidate
/// supports survive each round; every survivor expands through its
/// `path_budget` best admissible columns; duplicates merge; the smallest
/// residual wins. A budget of 1 reduces exactly to [`omp`].
pub fn mmp<T: Real>(
    y: &[Complex<T>],
    phi: &ComplexMatrix<T>,
    k_sparse: usize,
    path_budget: usize,
    excluded: &[bool],
) -> Result<PursuitResult<T>, DecodeFailure> {
    struct Path<T> {
        support: Vec<usize>,
        residual: Vec<Complex<T>>,
        rnorm: T,
    }

    let mut paths = vec![Path {
        support: Vec::new(),
        residual: y.to_vec(),
        rnorm: norm(y),
    }];
    let mut residual_norms = vec![paths[0].rnorm];

    for _ in 0..k_sparse {
        let mut candidates: Vec<Path<T>> = Vec::new();
        for path in &paths {
            let c = column_correlations(phi, &path.residual);
            let mut ranked: Vec<(usize, T)> = c
                .into_iter()
                .enumerate()
                .filter(|&(j, _)| !excluded[j] && !path.support.contains(&j))
                .collect();
            ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            for &(j, _) in ranked.iter().take(path_budget) {
                let mut support = path.support.clone();
                let idx = support.partition_point(|&p| p < j);
                support.insert(idx, j);
                if candidates.iter().any(|p| p.support == support) {
                    continue;
                }
                let Ok(fit) = least_squares_on_support(phi, &support, y) else {
                    continue;
                };
                let residual = residual_update(y, phi, &support, &fit);
                let rnorm = norm(&residual);
                candidates.push(Path {
                    support,
                    residual,
                    rnorm,
                });
            }
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| {
            a.rnorm
                .partial_cmp(&b.rnorm)
                .unwrap()
                .then_with(|| a.support.cmp(&b.support))
        });
        candidates.truncate(path_budget);
        residual_norms.push(candidates[0].rnorm);
        paths = candidates;
    }

    let best = paths.swap_remove(0);
    Ok(PursuitResult {
        support: best.support,
        residual_norms,
    })
}

fn failure_result<T: Real>(failure: DecodeFailure) -> DecodeResult<T> {
    DecodeResult {
        packet: Err(failure),
        diagnostics: DecodeDiagnostics::default(),
    }
}

fn demap_or_fail<T: Real>(
    block_placement: &BlockPlacement,
    single_placement: &SinglePlacement,
    diagnostics: DecodeDiagnostics<T>,
    cfg: &SystemConfig,
) -> DecodeResult<T> {
    let packet = demap(
        block_placement,
        single_placement,
        &diagnostics.block_labels,
        &diagnostics.single_labels,
        cfg,
    )
    .map_err(|e| {
        debug_assert!(e.is_invalid_support(), "unexpected demap error: {e}");
        DecodeFailure::InvalidSupport
    });
    DecodeResult {
        packet,
        diagnostics,
    }
}

/// End-to-end decode under the configured receiver. Total over per-trial
/// failures; an invalid configuration is the only hard error.
pub fn decode<T: Real>(
    y: &[Complex<T>],
    phi: &ComplexMatrix<T>,
    cfg: &SystemConfig,
) -> Result<DecodeResult<T>, ConfigError> {
    cfg.ensure_valid()?;
    cfg.bit_budget()?;
    let alphabet: QamAlphabet<T> = QamAlphabet::new(cfg.modulation);
    Ok(match cfg.decoder {
        DecoderKind::TwoStage => decode_two_stage(y, phi, cfg, &alphabet),
        DecoderKind::Omp | DecoderKind::Mmp => decode_full_vector(y, phi, cfg, &alphabet),
    })
}

fn decode_two_stage<T: Real>(
    y: &[Complex<T>],
    phi: &ComplexMatrix<T>,
    cfg: &SystemConfig,
    alphabet: &QamAlphabet<T>,
) -> DecodeResult<T> {
    let s1 = match stage1(y, phi, cfg) {
        Ok(s1) => s1,
        Err(f) => return failure_result(f),
    };
    let s2 = match stage2(y, phi, &s1, cfg) {
        Ok(s2) => s2,
        Err(f) => return failure_result(f),
    };

    let mut starts = s1.starts_in_order.clone();
    starts.sort_unstable();
    let block_placement = match BlockPlacement::new(starts, cfg.vector_len, cfg.block_len) {
        Ok(p) => p,
        Err(_) => return failure_result(DecodeFailure::InvalidSupport),
    };
    let single_placement = match SinglePlacement::new(s2.support.clone()) {
        Ok(p) => p,
        Err(_) => return failure_result(DecodeFailure::InvalidSupport),
    };

    let mut residual_norms = s1.residual_norms.clone();
    residual_norms.extend(s2.residual_norms.iter().skip(1).copied());
    let diagnostics = DecodeDiagnostics {
        block_support: s1.support.clone(),
        single_support: s2.support.clone(),
        block_labels: s1
            .values
            .iter()
            .map(|&v| alphabet.demodulate_nearest(v).0)
            .collect(),
        single_labels: s2
            .values
            .iter()
            .map(|&v| alphabet.demodulate_nearest(v).0)
            .collect(),
        residual_norms,
    };
    demap_or_fail(&block_placement, &single_placement, diagnostics, cfg)
}

fn decode_full_vector<T: Real>(
    y: &[Complex<T>],
    phi: &ComplexMatrix<T>,
    cfg: &SystemConfig,
    alphabet: &QamAlphabet<T>,
) -> DecodeResult<T> {
    let k = cfg.nonzero_count();
    let excluded = vec![false; cfg.vector_len];
    let pursuit = match cfg.decoder {
        DecoderKind::Omp => omp(y, phi, k, &excluded),
        _ => mmp(y, phi, k, cfg.path_budget, &excluded),
    };
    let pursuit = match pursuit {
        Ok(p) => p,
        Err(f) => return failure_result(f),
    };
    if pursuit.support.len() != k {
        return failure_result(DecodeFailure::InvalidSupport);
    }

    let (block_placement, single_placement) =
        match partition_unstructured_support(&pursuit.support, cfg) {
            Ok(pair) => pair,
            Err(e) => {
                debug_assert!(e.is_invalid_support(), "unexpected partition error: {e}");
                return failure_result(DecodeFailure::InvalidSupport);
            }
        };

    let fit = match least_squares_on_support(phi, &pursuit.support, y) {
        Ok(fit) => fit,
        Err(_) => return failure_result(DecodeFailure::SingularSupport),
    };
    let block_positions = block_placement.covered_positions(cfg.block_len);
    let inv_block = T::of(cfg.alpha).sqrt().recip();
    let inv_single = T::of(1.0 - cfg.alpha).sqrt().recip();
    let mut block_labels = Vec::with_capacity(block_positions.len());
    let mut single_labels = Vec::with_capacity(cfg.num_singles);
    for (&pos, &beta) in pursuit.support.iter().zip(&fit) {
        if block_positions.binary_search(&pos).is_ok() {
            block_labels.push(alphabet.demodulate_nearest(beta * inv_block).0);
        } else {
            single_labels.push(alphabet.demodulate_nearest(beta * inv_single).0);
        }
    }

    let diagnostics = DecodeDiagnostics {
        block_support: block_positions,
        single_support: single_placement.positions().to_vec(),
        block_labels,
        single_labels,
        residual_norms: pursuit.residual_norms.clone(),
    };
    demap_or_fail(&block_placement, &single_placement, diagnostics, cfg)
}
