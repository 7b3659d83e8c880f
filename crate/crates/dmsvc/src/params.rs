//! Scheme parameters: configuration validation and the closed-form quantities
//! derived from it (bit budgets, subcarrier requirements, spectral efficiency).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::combinadics::{index_bits, CombinadicsError};
use crate::real::Real;

/// QAM alphabet size carried on the non-zero entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn from_order(order: usize) -> Result<Self, ConfigError> {
        match order {
            4 => Ok(Modulation::Qpsk),
            16 => Ok(Modulation::Qam16),
            64 => Ok(Modulation::Qam64),
            _ => Err(ConfigError::BadValue {
                key: "mod_order".into(),
                value: order.to_string(),
            }),
        }
    }

    pub fn order(self) -> usize {
        match self {
            Modulation::Qpsk => 4,
            Modulation::Qam16 => 16,
            Modulation::Qam64 => 64,
        }
    }

    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.order())
    }
}

impl FromStr for Modulation {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let order: usize = s.parse().map_err(|_| ConfigError::BadValue {
            key: "mod_order".into(),
            value: s.into(),
        })?;
        Modulation::from_order(order)
    }
}

/// Frequency-domain channel model applied per subcarrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    /// Unit gain on every subcarrier.
    Awgn,
    /// Independent CN(0, 1) gain per subcarrier, known to the receiver.
    RayleighIid,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelKind::Awgn => write!(f, "awgn"),
            ChannelKind::RayleighIid => write!(f, "rayleigh-iid"),
        }
    }
}

impl FromStr for ChannelKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "awgn" => Ok(ChannelKind::Awgn),
            "rayleigh-iid" => Ok(ChannelKind::RayleighIid),
            _ => Err(ConfigError::BadValue {
                key: "channel".into(),
                value: s.into(),
            }),
        }
    }
}

/// Receiver algorithm selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderKind {
    /// Block identification followed by single-element recovery.
    TwoStage,
    /// Full-vector orthogonal matching pursuit, block structure ignored.
    Omp,
    /// Full-vector multipath matching pursuit, block structure ignored.
    Mmp,
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecoderKind::TwoStage => write!(f, "two-stage"),
            DecoderKind::Omp => write!(f, "omp"),
            DecoderKind::Mmp => write!(f, "mmp"),
        }
    }
}

impl FromStr for DecoderKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two-stage" => Ok(DecoderKind::TwoStage),
            "omp" => Ok(DecoderKind::Omp),
            "mmp" => Ok(DecoderKind::Mmp),
            _ => Err(ConfigError::BadValue {
                key: "decoder".into(),
                value: s.into(),
            }),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("missing configuration key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid value for `{key}`: `{value}`")]
    BadValue { key: String, value: String },
    #[error("line {0}: expected `key = value`")]
    MalformedLine(usize),
    #[error(transparent)]
    Combinadics(#[from] CombinadicsError),
}

/// The sparse-mapping shape: everything the closed-form bit/resource formulas
/// depend on. Unlike a full [`SystemConfig`] this does not carry (or require)
/// the simulation-side constraints, in particular `l | n`, which only the
/// block-search decoder needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MappingShape {
    pub vector_len: usize,
    pub num_blocks: usize,
    pub block_len: usize,
    pub num_singles: usize,
}

impl MappingShape {
    /// Number of non-zero entries carried per packet.
    pub fn nonzero_count(&self) -> usize {
        self.num_blocks * self.block_len + self.num_singles
    }

    /// Minimum vector length: blocks, one guard on each side of every block,
    /// and the single elements.
    pub fn min_vector_len(&self) -> usize {
        self.num_blocks * self.block_len + 2 * self.num_blocks + self.num_singles
    }

    /// Violations of the counting prerequisites behind the closed forms.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.num_blocks < 1 {
            v.push("k_b must be >= 1".to_string());
        }
        if self.block_len < 1 {
            v.push("l must be >= 1".to_string());
        }
        if self.num_blocks >= 1 && self.block_len >= 1 && self.vector_len < self.min_vector_len() {
            v.push(format!(
                "n < k_b*l + 2*k_b + k_s (n={}, required {})",
                self.vector_len,
                self.min_vector_len()
            ));
        }
        v
    }

    /// Bits on block indexes, single-element indexes, and QAM symbols.
    ///
    /// Index capacities use exact 128-bit integer binomials; an overflow is
    /// reported rather than approximated. Undersized shapes are an error,
    /// not an arithmetic surprise.
    pub fn bit_budget(&self, modulation: Modulation) -> Result<BitBudget, ConfigError> {
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(ConfigError::Invalid(violations));
        }
        let block_slots = self.vector_len - self.num_blocks * (self.block_len - 1);
        let single_slots = self.vector_len - self.num_blocks * self.block_len - 2 * self.num_blocks;
        Ok(BitBudget {
            block_index_bits: index_bits(block_slots, self.num_blocks)?,
            single_index_bits: index_bits(single_slots, self.num_singles)?,
            symbol_bits: self.nonzero_count() as u32 * modulation.bits_per_symbol(),
        })
    }

    /// Subcarrier counts `(m_svc, m_dmsvc)` required by unstructured and
    /// block-aware recovery, for the sparsity-order constant `c_const`.
    /// Logarithms are natural.
    pub fn subcarrier_requirements<T: Real>(&self, c_const: T) -> (T, T) {
        let k = self.nonzero_count();
        let log_ratio = T::of(self.vector_len as f64 / k as f64).ln();
        let m_svc = c_const * T::of(k as f64) * log_ratio;
        let m_dmsvc = c_const * T::of((self.num_blocks + self.num_singles) as f64) * log_ratio;
        (m_svc, m_dmsvc)
    }

    /// Spectral efficiencies `(se_dmsvc, se_ssc)` in bits per subcarrier.
    ///
    /// The SSC reference spends `floor(log2 C(n, k))` bits on an unstructured
    /// k-subset of indexes and pays the unstructured subcarrier count.
    pub fn spectral_efficiency<T: Real>(
        &self,
        modulation: Modulation,
        c_const: T,
    ) -> Result<(T, T), ConfigError> {
        let budget = self.bit_budget(modulation)?;
        let (m_svc, m_dmsvc) = self.subcarrier_requirements(c_const);
        let ssc_index_bits = index_bits(self.vector_len, self.nonzero_count())?;
        let se_dmsvc = T::of(f64::from(budget.total())) / m_dmsvc;
        let se_ssc = T::of(f64::from(ssc_index_bits + budget.symbol_bits)) / m_svc;
        Ok((se_dmsvc, se_ssc))
    }
}

/// Derived packet bit counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitBudget {
    /// Bits mapped onto the block placement.
    pub block_index_bits: u32,
    /// Bits mapped onto the single-element placement.
    pub single_index_bits: u32,
    /// Bits carried by the QAM symbols on all non-zero entries.
    pub symbol_bits: u32,
}

impl BitBudget {
    /// Packet size in bits.
    pub fn total(&self) -> u32 {
        self.block_index_bits + self.single_index_bits + self.symbol_bits
    }
}

/// Complete scheme configuration.
///
/// Construct programmatically or parse from a flat `key = value` file via
/// [`SystemConfig::from_kv_text`]. Keys: `n`, `m`, `k_b`, `l`, `k_s`,
/// `mod_order`, `alpha`, `channel`, `decoder`, `l_p`, `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Sparse vector length (positions), key `n`.
    pub vector_len: usize,
    /// Number of subcarriers / spread-sequence length, key `m`.
    pub subcarriers: usize,
    /// Number of non-zero blocks, key `k_b`.
    pub num_blocks: usize,
    /// Block length in positions, key `l`.
    pub block_len: usize,
    /// Number of single non-zero elements, key `k_s`.
    pub num_singles: usize,
    /// QAM alphabet size, key `mod_order`.
    pub modulation: Modulation,
    /// Power allocation ratio of the block component, key `alpha`.
    pub alpha: f64,
    /// Channel model, key `channel`.
    pub channel: ChannelKind,
    /// Receiver algorithm, key `decoder`.
    pub decoder: DecoderKind,
    /// Path budget for multipath matching pursuit, key `l_p`.
    pub path_budget: usize,
    /// Master seed for every random draw of a run, key `seed`.
    pub seed: u64,
}

impl SystemConfig {
    /// Builds a configuration with the structural parameters; channel,
    /// decoder, path budget, and seed default to AWGN / two-stage / 4 / 0.
    pub fn new(
        vector_len: usize,
        subcarriers: usize,
        num_blocks: usize,
        block_len: usize,
        num_singles: usize,
        modulation: Modulation,
        alpha: f64,
    ) -> Self {
        SystemConfig {
            vector_len,
            subcarriers,
            num_blocks,
            block_len,
            num_singles,
            modulation,
            alpha,
            channel: ChannelKind::Awgn,
            decoder: DecoderKind::TwoStage,
            path_budget: 4,
            seed: 0,
        }
    }

    pub fn shape(&self) -> MappingShape {
        MappingShape {
            vector_len: self.vector_len,
            num_blocks: self.num_blocks,
            block_len: self.block_len,
            num_singles: self.num_singles,
        }
    }

    /// Number of non-zero entries per packet.
    pub fn nonzero_count(&self) -> usize {
        self.shape().nonzero_count()
    }

    /// Every violated invariant; empty iff the configuration is valid.
    pub fn validate(&self) -> Vec<String> {
        let mut v = self.shape().validate();
        if self.block_len >= 1 && !self.vector_len.is_multiple_of(self.block_len) {
            v.push(format!(
                "n mod l != 0 (n={}, l={})",
                self.vector_len, self.block_len
            ));
        }
        if self.subcarriers < self.nonzero_count() {
            v.push(format!(
                "m < k_b*l + k_s (m={}, required {})",
                self.subcarriers,
                self.nonzero_count()
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            v.push(format!(
                "alpha must lie strictly in (0, 1) (alpha={})",
                self.alpha
            ));
        }
        if self.path_budget < 1 {
            v.push("l_p must be >= 1".to_string());
        }
        v
    }

    /// Errors with the full violation list unless the configuration is valid.
    pub fn ensure_valid(&self) -> Result<(), ConfigError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    pub fn bit_budget(&self) -> Result<BitBudget, ConfigError> {
        self.shape().bit_budget(self.modulation)
    }

    pub fn subcarrier_requirements<T: Real>(&self, c_const: T) -> (T, T) {
        self.shape().subcarrier_requirements(c_const)
    }

    pub fn spectral_efficiency<T: Real>(&self, c_const: T) -> Result<(T, T), ConfigError> {
        self.shape().spectral_efficiency(self.modulation, c_const)
    }

    /// Parses a flat key-value file: one `key = value` per line, `#` starts a
    /// comment, string values may be double-quoted. Unknown keys are
    /// rejected. The structural keys are required; `channel`, `decoder`,
    /// `l_p`, and `seed` default as in [`SystemConfig::new`].
    pub fn from_kv_text(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::MalformedLine(idx + 1))?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::MalformedLine(idx + 1));
            }
            map.insert(key.to_string(), value.to_string());
        }

        let mut cfg = SystemConfig::new(
            parse_req(&map, "n")?,
            parse_req(&map, "m")?,
            parse_req(&map, "k_b")?,
            parse_req(&map, "l")?,
            parse_req(&map, "k_s")?,
            Modulation::from_order(parse_req(&map, "mod_order")?)?,
            parse_req(&map, "alpha")?,
        );
        for (key, value) in &map {
            cfg.set_key(key, value)?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` override. Unknown keys are rejected.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parsed<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        match key {
            "n" => self.vector_len = parsed(key, value)?,
            "m" => self.subcarriers = parsed(key, value)?,
            "k_b" => self.num_blocks = parsed(key, value)?,
            "l" => self.block_len = parsed(key, value)?,
            "k_s" => self.num_singles = parsed(key, value)?,
            "mod_order" => self.modulation = value.parse()?,
            "alpha" => self.alpha = parsed(key, value)?,
            "channel" => self.channel = value.parse()?,
            "decoder" => self.decoder = value.parse()?,
            "l_p" => self.path_budget = parsed(key, value)?,
            "seed" => self.seed = parsed(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }
}

fn parse_req<T: FromStr>(
    map: &BTreeMap<String, String>,
    key: &'static str,
) -> Result<T, ConfigError> {
    let raw = map.get(key).ok_or(ConfigError::MissingKey(key))?;
    raw.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: raw.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_size_config() -> SystemConfig {
        SystemConfig::new(2100, 80, 1, 3, 1, Modulation::Qpsk, 0.64)
    }

    #[test]
    fn full_size_config_is_valid() {
        assert!(full_size_config().validate().is_empty());
    }

    #[test]
    fn indivisible_length_is_reported() {
        let mut cfg = full_size_config();
        cfg.vector_len = 10;
        let violations = cfg.validate();
        assert!(
            violations.iter().any(|m| m.contains("n mod l")),
            "{violations:?}"
        );
    }

    #[test]
    fn short_vector_is_reported() {
        // 6 < 1*3 + 2*1 + 2 = 7
        let cfg = SystemConfig::new(6, 80, 1, 3, 2, Modulation::Qpsk, 0.5);
        let violations = cfg.validate();
        assert!(
            violations
                .iter()
                .any(|m| m.contains("n < k_b*l + 2*k_b + k_s")),
            "{violations:?}"
        );
    }

    #[test]
    fn misc_violations_are_reported() {
        let mut cfg = full_size_config();
        cfg.alpha = 1.0;
        cfg.subcarriers = 3;
        cfg.path_budget = 0;
        let violations = cfg.validate();
        assert_eq!(violations.len(), 3, "{violations:?}");
    }

    #[test]
    fn full_size_bit_budget() {
        let b = full_size_config().bit_budget().unwrap();
        assert_eq!(b.block_index_bits, 11);
        assert_eq!(b.single_index_bits, 11);
        assert_eq!(b.symbol_bits, 8);
        assert_eq!(b.total(), 30);
    }

    #[test]
    fn undersized_shape_cannot_produce_a_budget() {
        // 4 positions cannot host a 3-block with guards plus a single
        let cfg = SystemConfig::new(4, 8, 1, 3, 1, Modulation::Qpsk, 0.5);
        assert!(matches!(cfg.bit_budget(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn degenerate_budget_without_singles() {
        let cfg = SystemConfig::new(8, 8, 1, 1, 0, Modulation::Qpsk, 0.5);
        let b = cfg.bit_budget().unwrap();
        assert_eq!(b.block_index_bits, 3);
        assert_eq!(b.single_index_bits, 0);
        assert_eq!(b.symbol_bits, 2);
    }

    #[test]
    fn comparison_size_bit_budget() {
        let cfg = SystemConfig::new(262, 80, 1, 2, 1, Modulation::Qpsk, 0.64);
        let b = cfg.bit_budget().unwrap();
        assert_eq!(b.block_index_bits, 8);
        assert_eq!(b.single_index_bits, 8);
        assert_eq!(b.total(), 22);
    }

    #[test]
    fn index_bits_bracket_the_binomial() {
        use crate::combinadics::binomial;
        for &(n, k_b, l, k_s) in &[
            (2100usize, 1usize, 3usize, 1usize),
            (512, 2, 4, 3),
            (10_000, 2, 5, 2),
            (138, 1, 5, 1),
        ] {
            let shape = MappingShape {
                vector_len: n,
                num_blocks: k_b,
                block_len: l,
                num_singles: k_s,
            };
            let b = shape.bit_budget(Modulation::Qpsk).unwrap();
            let count = binomial((n - k_b * (l - 1)) as u64, k_b as u64).unwrap();
            assert!(1u128 << b.block_index_bits <= count);
            assert!(count < 1u128 << (b.block_index_bits + 1));
        }
    }

    #[test]
    fn subcarrier_requirements_reference_point() {
        let shape = MappingShape {
            vector_len: 138,
            num_blocks: 1,
            block_len: 5,
            num_singles: 1,
        };
        let (m_svc, m_dmsvc) = shape.subcarrier_requirements(5.0f64);
        assert!((m_dmsvc - 31.354942159291497).abs() < 1e-12, "{m_dmsvc}");
        assert!((m_svc - 94.06482647787449).abs() < 1e-12, "{m_svc}");
    }

    #[test]
    fn subcarrier_requirements_degenerate_log() {
        // All positions non-zero: the log ratio vanishes.
        let shape = MappingShape {
            vector_len: 6,
            num_blocks: 1,
            block_len: 5,
            num_singles: 1,
        };
        let (m_svc, m_dmsvc) = shape.subcarrier_requirements(5.0f64);
        assert_eq!(m_svc, 0.0);
        assert_eq!(m_dmsvc, 0.0);
    }

    #[test]
    fn block_recovery_needs_no_more_subcarriers() {
        for l in 1..=6usize {
            let shape = MappingShape {
                vector_len: 240,
                num_blocks: 2,
                block_len: l,
                num_singles: 2,
            };
            let (m_svc, m_dmsvc) = shape.subcarrier_requirements(5.0f64);
            if l == 1 {
                assert_eq!(m_svc, m_dmsvc);
            } else {
                assert!(m_dmsvc < m_svc);
            }
        }
    }

    #[test]
    fn spectral_efficiency_reference_point() {
        let shape = MappingShape {
            vector_len: 138,
            num_blocks: 1,
            block_len: 5,
            num_singles: 1,
        };
        let (se_dm, se_ssc) = shape
            .spectral_efficiency(Modulation::Qam16, 5.0f64)
            .unwrap();
        assert!((se_dm - 1.211930157834444).abs() < 1e-12, "{se_dm}");
        assert!((se_ssc - 0.605965078917222).abs() < 1e-12, "{se_ssc}");
        assert!((se_dm / se_ssc - 2.0).abs() < 1e-9);
    }

    #[test]
    fn single_element_shape_has_no_block_advantage() {
        // With l = 1 both schemes need the same resources; the only SE
        // difference left is the sub-bit gain of indexing blocks and singles
        // separately, far below the gains a genuine block brings.
        for k_s in 1..=4usize {
            let shape = MappingShape {
                vector_len: 128,
                num_blocks: 1,
                block_len: 1,
                num_singles: k_s,
            };
            let (m_svc, m_dmsvc) = shape.subcarrier_requirements(5.0f64);
            assert_eq!(m_svc, m_dmsvc);
            let (se_dm, se_ssc) = shape.spectral_efficiency(Modulation::Qpsk, 5.0f64).unwrap();
            let ratio = se_dm / se_ssc;
            assert!((0.9..1.12).contains(&ratio), "k_s={k_s}: ratio {ratio}");
        }
    }

    #[test]
    fn spectral_efficiency_scales_inversely_with_c() {
        let shape = MappingShape {
            vector_len: 138,
            num_blocks: 1,
            block_len: 3,
            num_singles: 3,
        };
        let (a1, b1) = shape.spectral_efficiency(Modulation::Qpsk, 5.0f64).unwrap();
        let (a2, b2) = shape
            .spectral_efficiency(Modulation::Qpsk, 10.0f64)
            .unwrap();
        assert!((a1 / a2 - 2.0).abs() < 1e-12);
        assert!((b1 / b2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kv_text_round_trip() {
        let text = r#"
            # full-size operating point
            n = 2100
            m = 80
            k_b = 1
            l = 3
            k_s = 1
            mod_order = 4
            alpha = 0.64
            channel = "rayleigh-iid"
            decoder = "two-stage"
            l_p = 4
            seed = 7
        "#;
        let cfg = SystemConfig::from_kv_text(text).unwrap();
        assert_eq!(cfg.vector_len, 2100);
        assert_eq!(cfg.channel, ChannelKind::RayleighIid);
        assert_eq!(cfg.seed, 7);
        assert!(cfg.validate().is_empty());
    }

    #[test]
    fn kv_text_rejects_unknown_keys() {
        let text =
            "n = 12\nm = 8\nk_b = 1\nl = 2\nk_s = 1\nmod_order = 4\nalpha = 0.5\nbogus = 1\n";
        match SystemConfig::from_kv_text(text) {
            Err(ConfigError::UnknownKey(k)) => assert_eq!(k, "bogus"),
            other => panic!("expected UnknownKey, got {other:?}"),
        }
    }

    #[test]
    fn kv_text_reports_missing_keys() {
        match SystemConfig::from_kv_text("n = 12\n") {
            Err(ConfigError::MissingKey(_)) => {}
            other => panic!("expected MissingKey, got {other:?}"),
        }
    }

    #[test]
    fn overrides_win() {
        let mut cfg = full_size_config();
        cfg.set_key("alpha", "0.2").unwrap();
        cfg.set_key("decoder", "mmp").unwrap();
        assert_eq!(cfg.alpha, 0.2);
        assert_eq!(cfg.decoder, DecoderKind::Mmp);
        assert!(cfg.set_key("nope", "1").is_err());
    }
}
