//! Bijections between integers and sparse supports: lexicographic ranking and
//! unranking of k-combinations, block placements (stars-and-bars over
//! non-overlapping runs), and single-element placements over the positions a
//! block placement leaves available.

use thiserror::Error;

use crate::params::SystemConfig;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CombinadicsError {
    #[error("binomial coefficient overflows 128-bit arithmetic")]
    BinomialOverflow,
    #[error("rank exceeds combination count")]
    RankOutOfRange,
    #[error("subset must be strictly ascending with elements below {0}")]
    InvalidSubset(usize),
    #[error("placement violates block layout constraints")]
    InvalidPlacement,
    #[error("placement is not representable within the bit budget")]
    UnrepresentablePlacement,
    #[error("position {0} is not available for a single element")]
    UnavailablePosition(usize),
}

/// Exact binomial coefficient, with an explicit error instead of silent
/// wrap-around. Every intermediate product stays within the final magnitude
/// times `n`, so the check is tight.
pub fn binomial(n: u64, k: u64) -> Result<u128, CombinadicsError> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc
            .checked_mul((n - k + i) as u128)
            .ok_or(CombinadicsError::BinomialOverflow)?
            / i as u128;
    }
    Ok(acc)
}

/// `floor(log2 C(n, k))`: the index bits a k-of-n choice can carry.
pub fn index_bits(n: usize, k: usize) -> Result<u32, CombinadicsError> {
    let count = binomial(n as u64, k as u64)?;
    if count == 0 {
        return Err(CombinadicsError::InvalidSubset(n));
    }
    Ok(count.ilog2())
}

/// The rank-th k-subset of `{0..n-1}` in lexicographic order.
pub fn combination_unrank(rank: u128, n: usize, k: usize) -> Result<Vec<usize>, CombinadicsError> {
    if rank >= binomial(n as u64, k as u64)? {
        return Err(CombinadicsError::RankOutOfRange);
    }
    let mut rest = rank;
    let mut subset = Vec::with_capacity(k);
    let mut candidate = 0usize;
    for slot in 0..k {
        loop {
            // combinations that keep `candidate` as this slot's element
            let with_candidate = binomial((n - candidate - 1) as u64, (k - slot - 1) as u64)?;
            if with_candidate <= rest {
                rest -= with_candidate;
                candidate += 1;
            } else {
                subset.push(candidate);
                candidate += 1;
                break;
            }
        }
    }
    Ok(subset)
}

/// Lexicographic rank of a strictly ascending k-subset of `{0..n-1}`.
/// Inverse of [`combination_unrank`].
pub fn combination_rank(subset: &[usize], n: usize) -> Result<u128, CombinadicsError> {
    let k = subset.len();
    if subset.windows(2).any(|w| w[0] >= w[1]) || subset.last().is_some_and(|&m| m >= n) {
        return Err(CombinadicsError::InvalidSubset(n));
    }
    let mut rank: u128 = 0;
    let mut prev = 0usize;
    for (slot, &element) in subset.iter().enumerate() {
        for skipped in prev..element {
            rank += binomial((n - skipped - 1) as u64, (k - slot - 1) as u64)?;
        }
        prev = element + 1;
    }
    Ok(rank)
}

/// Placement of the non-zero blocks: ascending start positions with at least
/// `block_len` between consecutive starts, all runs inside the vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockPlacement {
    starts: Vec<usize>,
}

impl BlockPlacement {
    pub fn new(
        starts: Vec<usize>,
        vector_len: usize,
        block_len: usize,
    ) -> Result<Self, CombinadicsError> {
        let fits = starts.iter().all(|&s| s + block_len <= vector_len);
        let spaced = starts.windows(2).all(|w| w[1] >= w[0] + block_len);
        if fits && spaced {
            Ok(BlockPlacement { starts })
        } else {
            Err(CombinadicsError::InvalidPlacement)
        }
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    /// All positions covered by blocks, ascending.
    pub fn covered_positions(&self, block_len: usize) -> Vec<usize> {
        self.starts.iter().flat_map(|&s| s..s + block_len).collect()
    }
}

/// Placement of the single non-zero elements, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SinglePlacement {
    positions: Vec<usize>,
}

impl SinglePlacement {
    pub fn new(positions: Vec<usize>) -> Result<Self, CombinadicsError> {
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CombinadicsError::InvalidPlacement);
        }
        Ok(SinglePlacement { positions })
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }
}

fn block_index_bound(cfg: &SystemConfig) -> Result<u128, CombinadicsError> {
    let slots = cfg.vector_len - cfg.num_blocks * (cfg.block_len - 1);
    Ok(1u128 << index_bits(slots, cfg.num_blocks)?)
}

fn single_index_bound(cfg: &SystemConfig) -> Result<u128, CombinadicsError> {
    let slots = cfg.vector_len - cfg.num_blocks * cfg.block_len - 2 * cfg.num_blocks;
    Ok(1u128 << index_bits(slots, cfg.num_singles)?)
}

/// Expands the block-index integer into a placement: the underlying
/// combination chooses among `n - k_b*(l-1)` slots and each start is widened
/// by the runs placed before it.
pub fn place_blocks(u: u128, cfg: &SystemConfig) -> Result<BlockPlacement, CombinadicsError> {
    if u >= block_index_bound(cfg)? {
        return Err(CombinadicsError::RankOutOfRange);
    }
    let slots = cfg.vector_len - cfg.num_blocks * (cfg.block_len - 1);
    let combo = combination_unrank(u, slots, cfg.num_blocks)?;
    let starts = combo
        .iter()
        .enumerate()
        .map(|(i, &c)| c + i * (cfg.block_len - 1))
        .collect();
    BlockPlacement::new(starts, cfg.vector_len, cfg.block_len)
}

/// Exact inverse of [`place_blocks`]. A structurally valid placement whose
/// rank falls outside the bit budget is reported as unrepresentable; the
/// decoder treats that as a support error.
pub fn block_rank(
    placement: &BlockPlacement,
    cfg: &SystemConfig,
) -> Result<u128, CombinadicsError> {
    let slots = cfg.vector_len - cfg.num_blocks * (cfg.block_len - 1);
    let combo: Vec<usize> = placement
        .starts()
        .iter()
        .enumerate()
        .map(|(i, &s)| s - i * (cfg.block_len - 1))
        .collect();
    let rank = combination_rank(&combo, slots)?;
    if rank >= block_index_bound(cfg)? {
        return Err(CombinadicsError::UnrepresentablePlacement);
    }
    Ok(rank)
}

/// Positions open to single elements: everything outside the blocks and their
/// guard positions (one before each start and one after each end, clipped at
/// the vector boundary).
pub fn available_single_positions(placement: &BlockPlacement, cfg: &SystemConfig) -> Vec<usize> {
    let mut blocked = vec![false; cfg.vector_len];
    for &start in placement.starts() {
        if start > 0 {
            blocked[start - 1] = true;
        }
        for p in start..start + cfg.block_len {
            blocked[p] = true;
        }
        if start + cfg.block_len < cfg.vector_len {
            blocked[start + cfg.block_len] = true;
        }
    }
    (0..cfg.vector_len).filter(|&p| !blocked[p]).collect()
}

/// Maps the single-index integer onto concrete positions by unranking within
/// the available set.
pub fn place_singles(
    v: u128,
    available: &[usize],
    cfg: &SystemConfig,
) -> Result<SinglePlacement, CombinadicsError> {
    if v >= single_index_bound(cfg)? {
        return Err(CombinadicsError::RankOutOfRange);
    }
    let combo = combination_unrank(v, available.len(), cfg.num_singles)?;
    SinglePlacement::new(combo.iter().map(|&i| available[i]).collect())
}

/// Exact inverse of [`place_singles`]: ranks the positions within the
/// available set; positions outside it (guard or block hits) are rejected.
pub fn single_rank(
    placement: &SinglePlacement,
    available: &[usize],
    cfg: &SystemConfig,
) -> Result<u128, CombinadicsError> {
    let mut indexes = Vec::with_capacity(placement.positions().len());
    for &p in placement.positions() {
        let idx = available
            .binary_search(&p)
            .map_err(|_| CombinadicsError::UnavailablePosition(p))?;
        indexes.push(idx);
    }
    let rank = combination_rank(&indexes, available.len())?;
    if rank >= single_index_bound(cfg)? {
        return Err(CombinadicsError::UnrepresentablePlacement);
    }
    Ok(rank)
}
