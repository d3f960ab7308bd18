use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::fft::{fft_forward, fft_inverse};
use super::grid::{angular_frequencies, SignalGrid, SPEED_OF_LIGHT};
use super::waveform::ComplexWaveform;
use crate::scalar::{Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionSign {
    Forward,
    Backward,
}

impl DispersionSign {
    fn factor(self) -> f64 {
        match self {
            DispersionSign::Forward => 1.0,
            DispersionSign::Backward => -1.0,
        }
    }
}

/// Pure quadratic spectral phase equivalent to an accumulated dispersion in ps/nm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionOperator {
    pub accumulated_dispersion: f64,
    pub center_wavelength: f64,
    pub sign: DispersionSign,
}

impl DispersionOperator {
    pub fn forward(psnm: f64, center_wavelength: f64) -> Self {
        Self {
            accumulated_dispersion: psnm,
            center_wavelength,
            sign: DispersionSign::Forward,
        }
    }

    pub fn for_grid(psnm: f64, grid: &SignalGrid) -> Self {
        Self::forward(psnm, grid.center_wavelength)
    }

    pub fn inverse(&self) -> Self {
        let sign = match self.sign {
            DispersionSign::Forward => DispersionSign::Backward,
            DispersionSign::Backward => DispersionSign::Forward,
        };
        Self { sign, ..*self }
    }

    /// Signed dispersion in ps/nm (backward operators count negative).
    pub fn signed_psnm(&self) -> f64 {
        self.sign.factor() * self.accumulated_dispersion
    }

    /// Accumulated β₂·L in s² for the configured wavelength.
    pub fn beta2_l(&self) -> f64 {
        psnm_to_beta2_l(self.accumulated_dispersion, self.center_wavelength)
    }

    /// Spectral phase at angular frequency `omega` (rad/s).
    pub fn phase_at(&self, omega: f64) -> f64 {
        -self.sign.factor() * self.beta2_l() / 2.0 * omega * omega
    }

    /// Per-bin transfer function on an `n`-point grid sampled at `sample_rate`.
    pub fn transfer<T: Real>(&self, n: usize, sample_rate: f64) -> Vec<C<T>> {
        angular_frequencies(n, sample_rate)
            .into_iter()
            .map(|w| {
                let p = self.phase_at(w);
                Complex::new(T::lit(p.cos()), T::lit(p.sin()))
            })
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.accumulated_dispersion == 0.0
    }
}

/// β₂·L = −D·λ²/(2πc), with D converted from ps/nm to s/m.
pub fn psnm_to_beta2_l(psnm: f64, wavelength: f64) -> f64 {
    -psnm * 1e-3 * wavelength * wavelength / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT)
}

pub fn beta2_l_to_psnm(beta2_l: f64, wavelength: f64) -> f64 {
    -beta2_l * 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (wavelength * wavelength) * 1e3
}

/// Applies the operator with circular semantics on the waveform's own grid.
pub fn apply_dispersion<T: Real>(x: &ComplexWaveform<T>, d: &DispersionOperator) -> ComplexWaveform<T> {
    if d.is_identity() {
        return x.clone();
    }
    let grid = *x.grid();
    let mut buf = x.samples().to_vec();
    apply_dispersion_in_place(&mut buf, &d.transfer(grid.n_samples, grid.sample_rate()));
    ComplexWaveform::from_parts(grid, buf)
}

/// Multiplies the spectrum of `buf` by a precomputed `transfer`.
pub fn apply_dispersion_in_place<T: Real>(buf: &mut [C<T>], transfer: &[C<T>]) {
    debug_assert_eq!(buf.len(), transfer.len());
    fft_forward(buf);
    buf.iter_mut().zip(transfer).for_each(|(v, h)| *v = *v * *h);
    fft_inverse(buf);
}
