use num_complex::Complex;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gray-mapped QPSK: the first bit of a pair picks the sign of the real part,
/// the second the sign of the imaginary part (0 → +, 1 → −), scaled to unit power.
pub fn map_qpsk<T: Real>(bits: &[u8]) -> Result<Vec<Complex<T>>> {
    if bits.len() % 2 != 0 {
        return Err(Error::OddBitCount(bits.len()));
    }
    let a = T::FRAC_1_SQRT_2();
    Ok(bits
        .chunks_exact(2)
        .map(|p| {
            let re = if p[0] & 1 == 0 { a } else { -a };
            let im = if p[1] & 1 == 0 { a } else { -a };
            Complex::new(re, im)
        })
        .collect())
}

/// Nearest-point decision; a component that is exactly zero decides toward `+`.
pub fn demap_qpsk<T: Real>(symbols: &[Complex<T>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(symbols.len() * 2);
    for s in symbols {
        out.push(u8::from(s.re < T::zero()));
        out.push(u8::from(s.im < T::zero()));
    }
    out
}

/// Maximal-length 11-bit LFSR (x¹¹ + x⁹ + 1), period 2047.
#[derive(Clone, Debug)]
pub struct Prbs11 {
    state: u16,
}

impl Prbs11 {
    /// Any nonzero 11-bit state; zero is mapped to all-ones.
    pub fn new(state: u16) -> Self {
        let s = state & 0x7ff;
        Self {
            state: if s == 0 { 0x7ff } else { s },
        }
    }

    pub const PERIOD: usize = 2047;
}

impl Iterator for Prbs11 {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        let bit = ((self.state >> 10) ^ (self.state >> 8)) & 1;
        self.state = ((self.state << 1) | bit) & 0x7ff;
        Some(bit as u8)
    }
}

/// `|x|` of the symbol nearest to `s`; handy for decision-distance diagnostics.
pub fn decision_distance<T: Real>(s: Complex<T>) -> T {
    let a = T::FRAC_1_SQRT_2();
    let q = Complex::new(
        if s.re < T::zero() { -a } else { a },
        if s.im < T::zero() { -a } else { a },
    );
    Float::sqrt((s - q).norm_sqr())
}
