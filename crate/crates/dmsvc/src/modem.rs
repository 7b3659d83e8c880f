//! Square QAM alphabets with per-axis Gray labeling, bit mapping, and
//! nearest-point demodulation.

use num_complex::Complex;
use thiserror::Error;

use crate::params::Modulation;
use crate::real::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModemError {
    #[error("bit count {0} is not a multiple of {1} bits per symbol")]
    BitCountMismatch(usize, u32),
    #[error("symbol label {0} out of range")]
    LabelOutOfRange(usize),
}

/// A unit-average-energy square QAM alphabet. `points[label]` is the
/// constellation point carrying that label; the high half of the label Gray-
/// codes the in-phase axis, the low half the quadrature axis.
#[derive(Debug, Clone)]
pub struct QamAlphabet<T> {
    order: usize,
    bits_per_symbol: u32,
    points: Vec<Complex<T>>,
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut shift = 1;
    while (g >> shift) != 0 {
        g ^= g >> shift;
        shift <<= 1;
    }
    g
}

impl<T: Real> QamAlphabet<T> {
    /// Builds the alphabet for a supported modulation order.
    pub fn new(modulation: Modulation) -> Self {
        let order = modulation.order();
        let bits_per_symbol = modulation.bits_per_symbol();
        let half_bits = bits_per_symbol / 2;
        let side = 1usize << half_bits;
        // Levels are the odd integers -(side-1)..=(side-1); mean squared
        // amplitude per axis is (side^2 - 1)/3.
        let scale = T::of((2.0 * (side * side - 1) as f64 / 3.0).sqrt()).recip();
        let points = (0..order)
            .map(|label| {
                let i_pos = gray_to_binary(label >> half_bits);
                let q_pos = gray_to_binary(label & (side - 1));
                let level = |p: usize| T::of(2.0 * p as f64 - (side - 1) as f64) * scale;
                Complex::new(level(i_pos), level(q_pos))
            })
            .collect();
        QamAlphabet {
            order,
            bits_per_symbol,
            points,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Result<Complex<T>, ModemError> {
        self.points
            .get(label)
            .copied()
            .ok_or(ModemError::LabelOutOfRange(label))
    }

    /// Maps bits onto symbols; each group of `bits_per_symbol` bits is read
    /// big-endian as a label.
    pub fn modulate(&self, bits: &[bool]) -> Result<Vec<Complex<T>>, ModemError> {
        let bps = self.bits_per_symbol as usize;
        if !bits.len().is_multiple_of(bps) {
            return Err(ModemError::BitCountMismatch(
                bits.len(),
                self.bits_per_symbol,
            ));
        }
        Ok(bits
            .chunks(bps)
            .map(|chunk| {
                let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
                self.points[label]
            })
            .collect())
    }

    /// Nearest constellation point in Euclidean distance; exact ties resolve
    /// to the lowest label.
    pub fn demodulate_nearest(&self, value: Complex<T>) -> (usize, Complex<T>) {
        let mut best = 0usize;
        let mut best_dist = (value - self.points[0]).norm_sqr();
        for (label, &point) in self.points.iter().enumerate().skip(1) {
            let dist = (value - point).norm_sqr();
            if dist < best_dist {
                best = label;
                best_dist = dist;
            }
        }
        (best, self.points[best])
    }

    /// Big-endian bits of a label.
    pub fn label_bits(&self, label: usize) -> Vec<bool> {
        (0..self.bits_per_symbol)
            .rev()
            .map(|i| (label >> i) & 1 == 1)
            .collect()
    }

    /// Minimum distance between distinct constellation points.
    pub fn min_distance(&self) -> T {
        let mut best = T::infinity();
        for (i, &a) in self.points.iter().enumerate() {
            for &b in &self.points[i + 1..] {
                best = best.min((a - b).norm());
            }
        }
        best
    }
}
