use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Sampling context shared by every waveform of a simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalGrid {
    /// Symbols per second.
    pub symbol_rate: f64,
    pub samples_per_symbol: usize,
    /// Meters.
    pub center_wavelength: f64,
    pub n_samples: usize,
    /// Pulse roll-off; also sets the in-band mask edge `(1 + rolloff)·Rs/2`.
    pub rolloff: f64,
}

impl SignalGrid {
    pub fn new(
        symbol_rate: f64,
        samples_per_symbol: usize,
        center_wavelength: f64,
        n_samples: usize,
        rolloff: f64,
    ) -> Result<Self> {
        let g = Self {
            symbol_rate,
            samples_per_symbol,
            center_wavelength,
            n_samples,
            rolloff,
        };
        g.validate()?;
        Ok(g)
    }

    /// 30 GBd, 2 samples per symbol, 1555 nm, roll-off 0.1.
    pub fn standard(n_samples: usize) -> Result<Self> {
        Self::new(30e9, 2, 1555e-9, n_samples, 0.1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.symbol_rate.is_finite() && self.symbol_rate > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "symbol rate must be positive, got {}",
                self.symbol_rate
            )));
        }
        if self.samples_per_symbol < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 samples per symbol, got {}",
                self.samples_per_symbol
            )));
        }
        if !(self.center_wavelength.is_finite() && self.center_wavelength > 0.0) {
            return Err(Error::InvalidGrid("center wavelength must be positive".into()));
        }
        if !self.n_samples.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_samples must be a power of two, got {}",
                self.n_samples
            )));
        }
        if self.n_samples % self.samples_per_symbol != 0 {
            return Err(Error::InvalidGrid(
                "n_samples must hold a whole number of symbols".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::InvalidGrid(format!(
                "roll-off must lie in [0, 1], got {}",
                self.rolloff
            )));
        }
        Ok(())
    }

    pub fn sample_rate(&self) -> f64 {
        self.symbol_rate * self.samples_per_symbol as f64
    }

    pub fn symbol_period(&self) -> f64 {
        1.0 / self.symbol_rate
    }

    pub fn n_symbols(&self) -> usize {
        self.n_samples / self.samples_per_symbol
    }

    /// Same sampling context on a different length.
    pub fn with_len(&self, n_samples: usize) -> Result<Self> {
        let g = Self { n_samples, ..*self };
        g.validate()?;
        Ok(g)
    }

    /// Frequency of bin `k` in Hz (negative frequencies in the upper half).
    pub fn bin_frequency(&self, k: usize) -> f64 {
        bin_frequency(k, self.n_samples, self.sample_rate())
    }

    pub fn angular_frequencies(&self) -> Vec<f64> {
        angular_frequencies(self.n_samples, self.sample_rate())
    }

    /// Indicator of the bins inside `|f| ≤ (1 + rolloff)·Rs/2`.
    pub fn in_band_mask(&self) -> Vec<bool> {
        in_band_mask(self.n_samples, self.sample_rate(), self.symbol_rate, self.rolloff)
    }

    /// True when both grids share rates, wavelength and roll-off.
    pub fn same_context(&self, other: &SignalGrid) -> bool {
        self.symbol_rate == other.symbol_rate
            && self.samples_per_symbol == other.samples_per_symbol
            && self.center_wavelength == other.center_wavelength
            && self.rolloff == other.rolloff
    }
}

pub fn bin_frequency(k: usize, n: usize, sample_rate: f64) -> f64 {
    let kk = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
    kk * sample_rate / n as f64
}

pub fn angular_frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    (0..n)
        .map(|k| 2.0 * std::f64::consts::PI * bin_frequency(k, n, sample_rate))
        .collect()
}

pub fn in_band_mask(n: usize, sample_rate: f64, symbol_rate: f64, rolloff: f64) -> Vec<bool> {
    let edge = (1.0 + rolloff) * symbol_rate / 2.0 * (1.0 + 1e-12);
    (0..n)
        .map(|k| bin_frequency(k, n, sample_rate).abs() <= edge)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid_rates() {
        let g = SignalGrid::standard(4096).unwrap();
        assert_eq!(g.sample_rate(), 60e9);
        assert_eq!(g.n_symbols(), 2048);
        assert!(g.symbol_period() > 0.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SignalGrid::standard(1000).is_err());
        assert!(SignalGrid::new(30e9, 1, 1555e-9, 1024, 0.1).is_err());
        assert!(SignalGrid::new(-1.0, 2, 1555e-9, 1024, 0.1).is_err());
        assert!(SignalGrid::new(30e9, 2, 1555e-9, 1024, 1.5).is_err());
    }

    #[test]
    fn frequency_axis_matches_fft_layout() {
        assert_eq!(bin_frequency(0, 8, 8.0), 0.0);
        assert_eq!(bin_frequency(3, 8, 8.0), 3.0);
        assert_eq!(bin_frequency(4, 8, 8.0), -4.0);
        assert_eq!(bin_frequency(7, 8, 8.0), -1.0);
    }

    #[test]
    fn mask_width() {
        let g = SignalGrid::standard(1024).unwrap();
        let n_in = g.in_band_mask().iter().filter(|&&b| b).count();
        // (1.1 · 30 GHz) / (60 GHz / 1024) ≈ 563 bins
        assert!((560..=566).contains(&n_in), "{n_in}");
    }
}
