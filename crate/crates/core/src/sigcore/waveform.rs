use num_complex::Complex;

use super::fft::{fft_forward, fft_inverse};
use super::grid::SignalGrid;
use crate::error::{Error, Result};
use crate::scalar::{czero, energy, Real};

/// Complex baseband samples of one tributary.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexWaveform<T: Real> {
    grid: SignalGrid,
    samples: Vec<Complex<T>>,
}

impl<T: Real> ComplexWaveform<T> {
    pub fn new(grid: SignalGrid, samples: Vec<Complex<T>>) -> Result<Self> {
        if samples.len() != grid.n_samples {
            return Err(Error::Shape(format!(
                "waveform has {} samples, grid expects {}",
                samples.len(),
                grid.n_samples
            )));
        }
        if !energy(&samples).is_finite() {
            return Err(Error::param("samples", "energy is not finite"));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: SignalGrid) -> Self {
        Self {
            grid,
            samples: vec![czero(); grid.n_samples],
        }
    }

    pub(crate) fn from_parts(grid: SignalGrid, samples: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(samples.len(), grid.n_samples);
        Self { grid, samples }
    }

    pub fn grid(&self) -> &SignalGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex<T>> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> T {
        energy(&self.samples)
    }

    pub fn mean_power(&self) -> T {
        self.energy() / T::lit(self.len().max(1) as f64)
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// DFT bins of a waveform under the crate's convention (unnormalised forward).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrum<T: Real> {
    grid: SignalGrid,
    bins: Vec<Complex<T>>,
}

impl<T: Real> ComplexSpectrum<T> {
    pub fn new(grid: SignalGrid, bins: Vec<Complex<T>>) -> Result<Self> {
        if bins.len() != grid.n_samples {
            return Err(Error::Shape(format!(
                "spectrum has {} bins, grid expects {}",
                bins.len(),
                grid.n_samples
            )));
        }
        Ok(Self { grid, bins })
    }

    pub fn grid(&self) -> &SignalGrid {
        &self.grid
    }

    pub fn bins(&self) -> &[Complex<T>] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.bins
    }
}

pub fn to_frequency<T: Real>(x: &ComplexWaveform<T>) -> ComplexSpectrum<T> {
    let mut bins = x.samples.clone();
    fft_forward(&mut bins);
    ComplexSpectrum { grid: x.grid, bins }
}

pub fn from_frequency<T: Real>(x: &ComplexSpectrum<T>) -> ComplexWaveform<T> {
    let mut samples = x.bins.clone();
    fft_inverse(&mut samples);
    ComplexWaveform {
        grid: x.grid,
        samples,
    }
}

/// K tributaries on one shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MdmWaveform<T: Real> {
    grid: SignalGrid,
    tributaries: Vec<ComplexWaveform<T>>,
}

impl<T: Real> MdmWaveform<T> {
    pub fn new(tributaries: Vec<ComplexWaveform<T>>) -> Result<Self> {
        let first = tributaries
            .first()
            .ok_or_else(|| Error::Shape("at least one tributary is required".into()))?;
        let grid = first.grid;
        if let Some(bad) = tributaries.iter().position(|t| t.grid != grid) {
            return Err(Error::Shape(format!("tributary {bad} is on a different grid")));
        }
        Ok(Self { grid, tributaries })
    }

    pub fn from_samples(grid: SignalGrid, rows: Vec<Vec<Complex<T>>>) -> Result<Self> {
        let tribs = rows
            .into_iter()
            .map(|r| ComplexWaveform::new(grid, r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(tribs)
    }

    pub fn zeros(grid: SignalGrid, k: usize) -> Self {
        Self {
            grid,
            tributaries: vec![ComplexWaveform::zeros(grid); k],
        }
    }

    pub fn grid(&self) -> &SignalGrid {
        &self.grid
    }

    pub fn k(&self) -> usize {
        self.tributaries.len()
    }

    pub fn tributary(&self, i: usize) -> &ComplexWaveform<T> {
        &self.tributaries[i]
    }

    pub fn tributary_mut(&mut self, i: usize) -> &mut ComplexWaveform<T> {
        &mut self.tributaries[i]
    }

    pub fn tributaries(&self) -> &[ComplexWaveform<T>] {
        &self.tributaries
    }

    pub fn into_tributaries(self) -> Vec<ComplexWaveform<T>> {
        self.tributaries
    }

    pub fn energy(&self) -> T {
        self.tributaries.iter().map(|t| t.energy()).sum()
    }
}
