//! Direct-detection front end: two-path split with a dispersive element in
//! one path, square-law detection and ADC quantisation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sigcore::fft::{fft_forward, fft_inverse};
use crate::sigcore::{
    apply_dispersion_in_place, seeded_rng, ComplexWaveform, DispersionOperator, DispersionSign,
    MdmWaveform, SignalGrid,
};

/// Per-tributary direct and dispersed intensity traces.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityCapture<T: Real> {
    pub direct: Vec<Vec<T>>,
    pub dispersed: Vec<Vec<T>>,
    pub d_operator: DispersionOperator,
    pub grid: SignalGrid,
    /// Known optical loss of each path, dB; the receiver scales it back out.
    pub direct_loss_db: f64,
    pub dispersed_loss_db: f64,
}

impl<T: Real> IntensityCapture<T> {
    pub fn k(&self) -> usize {
        self.direct.len()
    }

    /// Direct trace with the path loss removed.
    pub fn calibrated_direct(&self, i: usize) -> Vec<T> {
        scale(&self.direct[i], self.direct_loss_db)
    }

    pub fn calibrated_dispersed(&self, i: usize) -> Vec<T> {
        scale(&self.dispersed[i], self.dispersed_loss_db)
    }
}

fn scale<T: Real>(x: &[T], loss_db: f64) -> Vec<T> {
    if loss_db == 0.0 {
        return x.to_vec();
    }
    let g = T::lit(10f64.powf(loss_db / 10.0));
    x.iter().map(|&v| v * g).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaptureOptions {
    /// ADC effective bits; `None` disables quantisation.
    pub enob: Option<f64>,
    /// Rectangular optical filter of width `(1 + rolloff)·Rs` before detection.
    pub optical_filter: bool,
    pub direct_path_loss_db: f64,
    pub dispersed_path_loss_db: f64,
}

impl Default for CaptureOptions {
    fn default() -> Self {
        Self {
            enob: None,
            optical_filter: true,
            direct_path_loss_db: 0.0,
            dispersed_path_loss_db: 0.0,
        }
    }
}

/// `|x[n]|²`.
pub fn detect_intensity<T: Real>(x: &ComplexWaveform<T>) -> Vec<T> {
    x.samples().iter().map(|v| v.norm_sqr()).collect()
}

/// Capture with default options apart from `enob`.
pub fn capture<T: Real>(
    x: &MdmWaveform<T>,
    d: &DispersionOperator,
    enob: Option<f64>,
    seed: u64,
) -> Result<IntensityCapture<T>> {
    let opts = CaptureOptions {
        enob,
        optical_filter: false,
        ..CaptureOptions::default()
    };
    capture_with(x, d, &opts, seed)
}

pub fn capture_with<T: Real>(
    x: &MdmWaveform<T>,
    d: &DispersionOperator,
    opts: &CaptureOptions,
    seed: u64,
) -> Result<IntensityCapture<T>> {
    if d.sign != DispersionSign::Forward {
        return Err(Error::param("d", "the capture element must be a forward operator"));
    }
    let grid = *x.grid();
    let n = grid.n_samples;
    let transfer = d.transfer::<T>(n, grid.sample_rate());
    let mask = grid.in_band_mask();
    let gain_direct = T::lit(10f64.powf(-opts.direct_path_loss_db / 10.0));
    let gain_disp = T::lit(10f64.powf(-opts.dispersed_path_loss_db / 10.0));
    let mut direct = Vec::with_capacity(x.k());
    let mut dispersed = Vec::with_capacity(x.k());
    for (i, t) in x.tributaries().iter().enumerate() {
        let mut field = t.samples().to_vec();
        if opts.optical_filter {
            fft_forward(&mut field);
            field
                .iter_mut()
                .zip(&mask)
                .filter(|(_, &m)| !m)
                .for_each(|(v, _)| *v = crate::scalar::czero());
            fft_inverse(&mut field);
        }
        let mut dfield = field.clone();
        if !d.is_identity() {
            apply_dispersion_in_place(&mut dfield, &transfer);
        }
        let mut a: Vec<T> = field.iter().map(|v| v.norm_sqr() * gain_direct).collect();
        let mut b: Vec<T> = dfield.iter().map(|v| v.norm_sqr() * gain_disp).collect();
        if let Some(enob) = opts.enob {
            a = quantize_labelled(&a, enob, seed, &format!("frontend/adc/direct/{i}"))?;
            b = quantize_labelled(&b, enob, seed, &format!("frontend/adc/dispersed/{i}"))?;
        }
        direct.push(a);
        dispersed.push(b);
    }
    Ok(IntensityCapture {
        direct,
        dispersed,
        d_operator: *d,
        grid,
        direct_loss_db: opts.direct_path_loss_db,
        dispersed_loss_db: opts.dispersed_path_loss_db,
    })
}

/// Mid-rise uniform quantiser over `[0, max(trace)]` with `2^⌈enob⌉` levels.
/// A fractional `enob` adds Gaussian noise so the total error power equals
/// that of an ideal `enob`-bit converter. `enob = ∞` is the identity.
pub fn quantize<T: Real>(trace: &[T], enob: f64, seed: u64) -> Result<Vec<T>> {
    quantize_labelled(trace, enob, seed, "frontend/adc")
}

fn quantize_labelled<T: Real>(trace: &[T], enob: f64, seed: u64, label: &str) -> Result<Vec<T>> {
    if enob == f64::INFINITY {
        return Ok(trace.to_vec());
    }
    if !(enob >= 1.0) || enob.is_nan() {
        return Err(Error::param("enob", format!("must be ≥ 1, got {enob}")));
    }
    let full_scale = trace.iter().fold(0.0f64, |a, v| a.max(v.as_f64()));
    if full_scale <= 0.0 {
        return Ok(trace.iter().map(|_| T::zero()).collect());
    }
    let bits = enob.ceil();
    let levels = 2f64.powf(bits);
    let lsb = full_scale / levels;
    let lsb_eff = full_scale / 2f64.powf(enob);
    let extra_sigma = ((lsb_eff * lsb_eff - lsb * lsb) / 12.0).max(0.0).sqrt();
    let mut rng = seeded_rng(seed, label);
    Ok(trace
        .iter()
        .map(|&v| {
            let q = ((v.as_f64() / lsb).floor()).clamp(0.0, levels - 1.0);
            let mut y = (q + 0.5) * lsb;
            if extra_sigma > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                y += extra_sigma * z;
            }
            T::lit(y.max(0.0))
        })
        .collect())
}
