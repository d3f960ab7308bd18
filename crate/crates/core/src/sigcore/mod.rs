//! Sampling grid, waveforms, transforms, dispersion and seeded randomness.

mod dispersion;
pub mod fft;
mod grid;
mod rng;
mod waveform;

pub use dispersion::{
    apply_dispersion, apply_dispersion_in_place, beta2_l_to_psnm, psnm_to_beta2_l,
    DispersionOperator, DispersionSign,
};
pub use grid::{angular_frequencies, bin_frequency, in_band_mask, SignalGrid, SPEED_OF_LIGHT};
pub use rng::{seeded_rng, DeterministicGenerator};
pub use waveform::{from_frequency, to_frequency, ComplexSpectrum, ComplexWaveform, MdmWaveform};
