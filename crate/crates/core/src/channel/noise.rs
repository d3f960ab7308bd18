use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sigcore::{seeded_rng, ComplexWaveform, MdmWaveform};

/// Adds circular complex Gaussian noise with power `P_i / 10^(snr/10)` per
/// tributary, where `P_i` is that tributary's mean sample power. `None` or
/// `+∞` leaves the input untouched.
pub fn add_noise<T: Real>(x: &MdmWaveform<T>, snr_db: Option<f64>, seed: u64) -> Result<MdmWaveform<T>> {
    let snr = match snr_db {
        None => return Ok(x.clone()),
        Some(s) if s == f64::INFINITY => return Ok(x.clone()),
        Some(s) if s.is_nan() || s == f64::NEG_INFINITY => {
            return Err(Error::param("snr_db", "must be finite or +inf"))
        }
        Some(s) => s,
    };
    let tribs = x
        .tributaries()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let p = t.mean_power().as_f64();
            let sigma = (p / 10f64.powf(snr / 10.0) / 2.0).sqrt();
            let mut rng = seeded_rng(seed, &format!("channel/noise/{i}"));
            let s = t
                .samples()
                .iter()
                .map(|v| {
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = rng.sample(StandardNormal);
                    *v + Complex::new(T::lit(sigma * a), T::lit(sigma * b))
                })
                .collect();
            ComplexWaveform::new(*x.grid(), s)
        })
        .collect::<Result<Vec<_>>>()?;
    MdmWaveform::new(tribs)
}

/// `10·log10(P_clean / P_noise)` from a clean/noisy pair.
pub fn measured_snr_db<T: Real>(clean: &ComplexWaveform<T>, noisy: &ComplexWaveform<T>) -> f64 {
    let ps = clean.energy().as_f64();
    let pn: f64 = clean
        .samples()
        .iter()
        .zip(noisy.samples())
        .map(|(a, b)| (*b - *a).norm_sqr().as_f64())
        .sum();
    10.0 * (ps / pn).log10()
}
