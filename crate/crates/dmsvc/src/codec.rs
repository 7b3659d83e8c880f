//! Packet-level codec: bits to sparse vector (block placement, single
//! placement, QAM values on the merged support) and the inverse demapper used
//! by every decoder.
//!
//! Bit layout is big-endian `[block index bits | single index bits | symbol
//! bits]`; symbols fill the block positions in ascending order first, then
//! the single positions in ascending order.

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;
use thiserror::Error;

use crate::combinadics::{
    available_single_positions, block_rank, place_blocks, place_singles, single_rank,
    BlockPlacement, CombinadicsError, SinglePlacement,
};
use crate::modem::{ModemError, QamAlphabet};
use crate::params::{ConfigError, SystemConfig};
use crate::real::Real;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("packet holds {0} bits, the configuration requires {1}")]
    PacketLength(usize, u32),
    #[error("recovered support is invalid: {0}")]
    InvalidSupport(&'static str),
    #[error("hex packet malformed: {0}")]
    BadHex(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Combinadics(#[from] CombinadicsError),
    #[error(transparent)]
    Modem(#[from] ModemError),
}

impl CodecError {
    /// True for the failures the decoders count as support errors.
    pub fn is_invalid_support(&self) -> bool {
        matches!(self, CodecError::InvalidSupport(_))
    }
}

/// A fixed-length packet of information bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    bits: Vec<bool>,
}

impl Packet {
    pub fn new(bits: Vec<bool>) -> Self {
        Packet { bits }
    }

    pub fn random<R: Rng + ?Sized>(bit_len: usize, rng: &mut R) -> Self {
        Packet {
            bits: (0..bit_len).map(|_| rng.random::<bool>()).collect(),
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Hex string, bits big-endian, zero-padded on the right to whole bytes.
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.bits.len().div_ceil(8) * 2);
        for chunk in self.bits.chunks(8) {
            let mut byte = 0u8;
            for (i, &b) in chunk.iter().enumerate() {
                byte |= (b as u8) << (7 - i);
            }
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    /// Parses the [`Packet::to_hex`] form for a known bit length. The string
    /// must cover exactly the padded byte count and the padding bits must be
    /// zero.
    pub fn from_hex(hex: &str, bit_len: usize) -> Result<Self, CodecError> {
        let hex = hex.trim();
        let bytes_needed = bit_len.div_ceil(8);
        if hex.len() != bytes_needed * 2 {
            return Err(CodecError::BadHex(format!(
                "expected {} hex digits for {} bits, got {}",
                bytes_needed * 2,
                bit_len,
                hex.len()
            )));
        }
        let mut bits = Vec::with_capacity(bytes_needed * 8);
        for i in 0..bytes_needed {
            let byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|e| CodecError::BadHex(e.to_string()))?;
            for j in 0..8 {
                bits.push((byte >> (7 - j)) & 1 == 1);
            }
        }
        if bits[bit_len..].iter().any(|&b| b) {
            return Err(CodecError::BadHex("padding bits must be zero".into()));
        }
        bits.truncate(bit_len);
        Ok(Packet { bits })
    }
}

/// The encoded sparse vector: both placements, the symbol values per
/// component, and the merged length-N value vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector<T> {
    block_placement: BlockPlacement,
    single_placement: SinglePlacement,
    block_symbols: Vec<Complex<T>>,
    single_symbols: Vec<Complex<T>>,
    values: Vec<Complex<T>>,
}

impl<T: Real> SparseVector<T> {
    pub fn block_placement(&self) -> &BlockPlacement {
        &self.block_placement
    }

    pub fn single_placement(&self) -> &SinglePlacement {
        &self.single_placement
    }

    pub fn block_symbols(&self) -> &[Complex<T>] {
        &self.block_symbols
    }

    pub fn single_symbols(&self) -> &[Complex<T>] {
        &self.single_symbols
    }

    /// Merged vector `sqrt(alpha)*s1 + sqrt(1-alpha)*s2`.
    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    /// Non-zero positions with their merged values, ascending.
    pub fn nonzero_entries(&self) -> Vec<(usize, Complex<T>)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(p, &v)| (p, v))
            .collect()
    }

    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|v| !v.is_zero()).count()
    }
}

fn bits_to_int(bits: &[bool]) -> u128 {
    bits.iter().fold(0u128, |acc, &b| (acc << 1) | b as u128)
}

fn int_to_bits(value: u128, width: u32) -> Vec<bool> {
    (0..width).rev().map(|i| (value >> i) & 1 == 1).collect()
}

/// Encodes a packet into a sparse vector under the given configuration.
pub fn encode<T: Real>(packet: &Packet, cfg: &SystemConfig) -> Result<SparseVector<T>, CodecError> {
    let budget = cfg.bit_budget()?;
    if packet.len() != budget.total() as usize {
        return Err(CodecError::PacketLength(packet.len(), budget.total()));
    }
    let bits = packet.bits();
    let (block_bits, rest) = bits.split_at(budget.block_index_bits as usize);
    let (single_bits, symbol_bits) = rest.split_at(budget.single_index_bits as usize);

    let block_placement = place_blocks(bits_to_int(block_bits), cfg)?;
    let available = available_single_positions(&block_placement, cfg);
    let single_placement = place_singles(bits_to_int(single_bits), &available, cfg)?;

    let alphabet: QamAlphabet<T> = QamAlphabet::new(cfg.modulation);
    let symbols = alphabet.modulate(symbol_bits)?;
    let (block_symbols, single_symbols) = symbols.split_at(cfg.num_blocks * cfg.block_len);

    let block_scale = T::of(cfg.alpha).sqrt();
    let single_scale = T::of(1.0 - cfg.alpha).sqrt();
    let mut values = vec![Complex::<T>::zero(); cfg.vector_len];
    for (&pos, &sym) in block_placement
        .covered_positions(cfg.block_len)
        .iter()
        .zip(block_symbols)
    {
        values[pos] = sym * block_scale;
    }
    for (&pos, &sym) in single_placement.positions().iter().zip(single_symbols) {
        values[pos] = sym * single_scale;
    }

    Ok(SparseVector {
        block_placement,
        single_placement,
        block_symbols: block_symbols.to_vec(),
        single_symbols: single_symbols.to_vec(),
        values,
    })
}

/// Inverse sparse mapping: placements plus demodulated symbol labels back to
/// the packet bits. Placements outside the bit budget or singles touching a
/// guard are support errors.
pub fn demap(
    block_placement: &BlockPlacement,
    single_placement: &SinglePlacement,
    block_labels: &[usize],
    single_labels: &[usize],
    cfg: &SystemConfig,
) -> Result<Packet, CodecError> {
    let budget = cfg.bit_budget()?;
    if block_placement.starts().len() != cfg.num_blocks
        || single_placement.positions().len() != cfg.num_singles
        || block_labels.len() != cfg.num_blocks * cfg.block_len
        || single_labels.len() != cfg.num_singles
    {
        return Err(CodecError::InvalidSupport("wrong support cardinality"));
    }

    let u = match block_rank(block_placement, cfg) {
        Ok(u) => u,
        Err(CombinadicsError::UnrepresentablePlacement) => {
            return Err(CodecError::InvalidSupport(
                "block placement outside the bit budget",
            ))
        }
        Err(e) => return Err(e.into()),
    };
    let available = available_single_positions(block_placement, cfg);
    let v = match single_rank(single_placement, &available, cfg) {
        Ok(v) => v,
        Err(CombinadicsError::UnavailablePosition(_)) => {
            return Err(CodecError::InvalidSupport(
                "single position inside a block or guard",
            ))
        }
        Err(CombinadicsError::UnrepresentablePlacement) => {
            return Err(CodecError::InvalidSupport(
                "single placement outside the bit budget",
            ))
        }
        Err(e) => return Err(e.into()),
    };

    let bps = cfg.modulation.bits_per_symbol();
    let order = cfg.modulation.order();
    let mut bits = int_to_bits(u, budget.block_index_bits);
    bits.extend(int_to_bits(v, budget.single_index_bits));
    for &label in block_labels.iter().chain(single_labels) {
        if label >= order {
            return Err(ModemError::LabelOutOfRange(label).into());
        }
        bits.extend(int_to_bits(label as u128, bps));
    }
    Ok(Packet::new(bits))
}

/// Splits an unstructured support (as recovered by the full-vector baseline
/// decoders) into a block placement and a single placement.
///
/// For `l >= 2` the support must decompose into maximal runs of exactly the
/// block length (one per block) plus isolated positions (one per single
/// element). For the degenerate `l == 1` the lowest `k_b` positions are taken
/// as the blocks. Guard spacing between singles and blocks is enforced.
pub fn partition_unstructured_support(
    support: &[usize],
    cfg: &SystemConfig,
) -> Result<(BlockPlacement, SinglePlacement), CodecError> {
    if support.len() != cfg.nonzero_count()
        || support.windows(2).any(|w| w[0] >= w[1])
        || support.last().is_some_and(|&p| p >= cfg.vector_len)
    {
        return Err(CodecError::InvalidSupport("wrong support cardinality"));
    }

    let (starts, singles) = if cfg.block_len == 1 {
        (
            support[..cfg.num_blocks].to_vec(),
            support[cfg.num_blocks..].to_vec(),
        )
    } else {
        let mut starts = Vec::new();
        let mut singles = Vec::new();
        let mut run_start = 0usize;
        for i in 0..support.len() {
            let run_ends = i + 1 == support.len() || support[i + 1] != support[i] + 1;
            if !run_ends {
                continue;
            }
            let run_len = i - run_start + 1;
            if run_len == cfg.block_len {
                starts.push(support[run_start]);
            } else if run_len == 1 {
                singles.push(support[i]);
            } else {
                return Err(CodecError::InvalidSupport(
                    "support run length matches neither a block nor a single",
                ));
            }
            run_start = i + 1;
        }
        (starts, singles)
    };

    if starts.len() != cfg.num_blocks || singles.len() != cfg.num_singles {
        return Err(CodecError::InvalidSupport(
            "support does not split into k_b blocks and k_s singles",
        ));
    }
    let block_placement = BlockPlacement::new(starts, cfg.vector_len, cfg.block_len)
        .map_err(|_| CodecError::InvalidSupport("malformed block layout"))?;
    let available = available_single_positions(&block_placement, cfg);
    if singles.iter().any(|p| available.binary_search(p).is_err()) {
        return Err(CodecError::InvalidSupport(
            "single position inside a block or guard",
        ));
    }
    let single_placement = SinglePlacement::new(singles)
        .map_err(|_| CodecError::InvalidSupport("malformed singles"))?;
    Ok((block_placement, single_placement))
}
