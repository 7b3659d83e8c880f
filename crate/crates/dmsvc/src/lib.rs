//! Dual-mapping sparse vector coding (DM-SVC) for short packets: an encoder
//! that maps bits onto block and single-element sparse supports plus QAM
//! values, a random-spreading frequency-domain channel, a two-stage decoder
//! with OMP/MMP baselines, and a seeded Monte Carlo harness.
//!
//! The signal chain is generic over the real scalar type via [`real::Real`];
//! `f64` aliases for the main types live at the crate root.
//!
//! ```
//! use dmsvc::channel::{measurement_matrix, realize_channel, stream_rng, transmit,
//!                      Codebook, StreamPurpose};
//! use dmsvc::codec::{encode, Packet};
//! use dmsvc::decoder::decode;
//! use dmsvc::params::{Modulation, SystemConfig};
//!
//! let cfg = SystemConfig::new(129, 64, 1, 3, 1, Modulation::Qpsk, 0.64);
//! cfg.ensure_valid().unwrap();
//!
//! let bits = cfg.bit_budget().unwrap().total() as usize;
//! let mut packet_rng = stream_rng(cfg.seed, StreamPurpose::Packet, 0, 0);
//! let packet = Packet::random(bits, &mut packet_rng);
//!
//! let codebook = Codebook::generate(cfg.seed, cfg.subcarriers, cfg.vector_len,
//!                                   cfg.nonzero_count());
//! let x = codebook.spread(&encode::<f64>(&packet, &cfg).unwrap());
//!
//! let mut channel_rng = stream_rng(cfg.seed, StreamPurpose::Channel, 0, 0);
//! let ch = realize_channel::<f64, _>(&cfg, 10.0, &mut channel_rng);
//! let mut noise_rng = stream_rng(cfg.seed, StreamPurpose::Noise, 0, 0);
//! let y = transmit(&x, &ch, &mut noise_rng);
//!
//! let phi = measurement_matrix(&codebook, &ch);
//! let result = decode(&y, &phi, &cfg).unwrap();
//! assert_eq!(result.packet, Ok(packet));
//! ```

pub mod channel;
pub mod codec;
pub mod combinadics;
pub mod decoder;
pub mod harness;
pub mod linalg;
pub mod modem;
pub mod params;
pub mod real;

pub use num_complex::Complex;

pub use params::{
    BitBudget, ChannelKind, ConfigError, DecoderKind, MappingShape, Modulation, SystemConfig,
};
pub use real::Real;

pub type C32 = Complex<f32>;
pub type C64 = Complex<f64>;

pub type QamAlphabet64 = modem::QamAlphabet<f64>;
pub type SparseVector64 = codec::SparseVector<f64>;
pub type ChannelRealization64 = channel::ChannelRealization<f64>;
pub type ComplexMatrix64 = linalg::ComplexMatrix<f64>;
pub type DecodeResult64 = decoder::DecodeResult<f64>;
