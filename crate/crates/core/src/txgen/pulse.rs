//! Root-raised-cosine shaping and matched filtering, both in the frequency domain.
//!
//! With `G(f) = sps·√RC(f)`, shaping unit-power symbols yields unit mean sample
//! power and `matched_symbols(shape(s)) == s`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{czero, Real, C};
use crate::sigcore::fft::{fft_forward, fft_inverse};
use crate::sigcore::{bin_frequency, ComplexWaveform, SignalGrid};

/// Raised-cosine spectrum at `f` given in units of the symbol rate.
pub fn raised_cosine(f: f64, rolloff: f64) -> f64 {
    let f = f.abs();
    let f1 = (1.0 - rolloff) / 2.0;
    let f2 = (1.0 + rolloff) / 2.0;
    if rolloff == 0.0 {
        return if f < 0.5 {
            1.0
        } else if f == 0.5 {
            0.5
        } else {
            0.0
        };
    }
    if f <= f1 {
        1.0
    } else if f <= f2 {
        0.5 * (1.0 + (std::f64::consts::PI / rolloff * (f - f1)).cos())
    } else {
        0.0
    }
}

/// Real RRC filter `G` on an `n`-point grid with the given sampling context.
pub fn rrc_filter<T: Real>(n: usize, grid: &SignalGrid) -> Vec<T> {
    let sps = grid.samples_per_symbol as f64;
    (0..n)
        .map(|k| {
            let f = bin_frequency(k, n, grid.sample_rate()) / grid.symbol_rate;
            T::lit(sps * raised_cosine(f, grid.rolloff).sqrt())
        })
        .collect()
}

/// Spectrum of the shaped waveform for `symbols` on an `n = len·sps` grid.
pub fn shape_spectrum<T: Real>(symbols: &[C<T>], sps: usize, g: &[T]) -> Vec<C<T>> {
    let m = symbols.len();
    debug_assert_eq!(g.len(), m * sps);
    let mut s = symbols.to_vec();
    fft_forward(&mut s);
    (0..m * sps).map(|k| s[k % m] * g[k]).collect()
}

/// Time-domain shaped waveform.
pub fn shape_symbols<T: Real>(symbols: &[C<T>], sps: usize, g: &[T]) -> Vec<C<T>> {
    let mut x = shape_spectrum(symbols, sps, g);
    fft_inverse(&mut x);
    x
}

/// Matched filter followed by decimation at samples `sps·k`, from the
/// spectrum `spec` of the received waveform.
pub fn matched_symbols_from_spectrum<T: Real>(spec: &[C<T>], sps: usize, g: &[T]) -> Vec<C<T>> {
    let n = spec.len();
    let m = n / sps;
    let mut fold = vec![czero::<T>(); m];
    for (k, (v, gk)) in spec.iter().zip(g).enumerate() {
        fold[k % m] = fold[k % m] + *v * *gk;
    }
    fft_inverse(&mut fold);
    let s = T::one() / T::lit((sps * sps) as f64);
    fold.iter_mut().for_each(|v| *v = *v * s);
    fold
}

/// Matched-filtered symbols sampled at `phase + sps·k`.
pub fn matched_symbols<T: Real>(x: &[C<T>], sps: usize, g: &[T], phase: usize) -> Vec<C<T>> {
    let n = x.len();
    let mut spec = x.to_vec();
    fft_forward(&mut spec);
    if phase % n != 0 {
        let w = 2.0 * std::f64::consts::PI * phase as f64 / n as f64;
        for (k, v) in spec.iter_mut().enumerate() {
            let kk = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
            let a = w * kk;
            *v = *v * Complex::new(T::lit(a.cos()), T::lit(a.sin()));
        }
    }
    matched_symbols_from_spectrum(&spec, sps, g)
}

/// Nyquist pulse shaping of one tributary onto `grid` (symbols beyond the
/// sequence are zero).
pub fn pulse_shape<T: Real>(
    symbols: &[C<T>],
    grid: &SignalGrid,
    rolloff: f64,
) -> Result<ComplexWaveform<T>> {
    if !(0.0..=1.0).contains(&rolloff) {
        return Err(Error::param("rolloff", format!("must lie in [0, 1], got {rolloff}")));
    }
    let sps = grid.samples_per_symbol;
    if symbols.len() * sps > grid.n_samples {
        return Err(Error::Shape(format!(
            "{} symbols need {} samples, grid holds {}",
            symbols.len(),
            symbols.len() * sps,
            grid.n_samples
        )));
    }
    let mut padded = symbols.to_vec();
    padded.resize(grid.n_symbols(), czero());
    let g_ctx = SignalGrid { rolloff, ..*grid };
    let g = rrc_filter::<T>(grid.n_samples, &g_ctx);
    ComplexWaveform::new(*grid, shape_symbols(&padded, sps, &g))
}

/// Matched filter and decimation of a waveform at its grid's roll-off.
pub fn matched_filter<T: Real>(x: &ComplexWaveform<T>, phase: usize) -> Vec<C<T>> {
    let grid = x.grid();
    let g = rrc_filter::<T>(grid.n_samples, grid);
    matched_symbols(x.samples(), grid.samples_per_symbol, &g, phase)
}

/// Circular shift of tributary `tributary_index` by `tributary_index · delta` samples.
pub fn decorrelate<T: Real>(
    waveform: &ComplexWaveform<T>,
    tributary_index: usize,
    delta: isize,
) -> ComplexWaveform<T> {
    let n = waveform.len() as isize;
    let shift = (tributary_index as isize * delta).rem_euclid(n.max(1)) as usize;
    let mut s = waveform.samples().to_vec();
    s.rotate_right(shift);
    ComplexWaveform::from_parts(*waveform.grid(), s)
}

/// Worst out-of-band level relative to the in-band peak, in dB.
pub fn out_of_band_level_db<T: Real>(x: &ComplexWaveform<T>) -> f64 {
    let grid = x.grid();
    let mut spec = x.samples().to_vec();
    fft_forward(&mut spec);
    let mask = grid.in_band_mask();
    let mut inb = 0.0f64;
    let mut outb = 0.0f64;
    for (v, &m) in spec.iter().zip(&mask) {
        let p = v.norm_sqr().as_f64();
        if m {
            inb = inb.max(p);
        } else {
            outb = outb.max(p);
        }
    }
    if outb == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (outb / inb).log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigcore::seeded_rng;
    use rand::Rng;

    fn qpsk(n: usize, seed: u64) -> Vec<C<f64>> {
        let mut r = seeded_rng(seed, "pulse-test");
        let a = std::f64::consts::FRAC_1_SQRT_2;
        (0..n)
            .map(|_| Complex::new(if r.gen() { a } else { -a }, if r.gen() { a } else { -a }))
            .collect()
    }

    #[test]
    fn nyquist_sum_is_flat() {
        for &b in &[0.0, 0.1, 0.5, 1.0] {
            for i in 0..50 {
                let f = i as f64 / 100.0;
                let s = raised_cosine(f, b) + raised_cosine(f - 1.0, b);
                assert!((s - 1.0).abs() < 1e-12, "beta {b} f {f}: {s}");
            }
        }
    }

    #[test]
    fn matched_filter_inverts_shaping() {
        let g = SignalGrid::standard(2048).unwrap();
        let s = qpsk(1024, 3);
        let x = pulse_shape(&s, &g, 0.1).unwrap();
        let r = matched_filter(&x, 0);
        let err = crate::scalar::rel_l2(&r, &s);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn unit_mean_power() {
        let g = SignalGrid::standard(8192).unwrap();
        let x = pulse_shape(&qpsk(4096, 5), &g, 0.1).unwrap();
        assert!((x.mean_power() - 1.0).abs() < 0.02);
    }

    #[test]
    fn spectrum_contained() {
        let g = SignalGrid::standard(4096).unwrap();
        let x = pulse_shape(&qpsk(2048, 9), &g, 0.1).unwrap();
        assert!(out_of_band_level_db(&x) < -40.0);
    }

    #[test]
    fn rejects_short_grid() {
        let g = SignalGrid::standard(64).unwrap();
        assert!(pulse_shape(&qpsk(40, 1), &g, 0.1).is_err());
        assert!(pulse_shape(&qpsk(10, 1), &g, 1.5).is_err());
    }

    #[test]
    fn decorrelate_shift_and_back() {
        let g = SignalGrid::standard(256).unwrap();
        let x = pulse_shape(&qpsk(128, 2), &g, 0.1).unwrap();
        let y = decorrelate(&x, 3, 7);
        assert_eq!(y.samples()[21], x.samples()[0]);
        let z = decorrelate(&y, 3, -7);
        assert_eq!(z, x);
        assert_eq!(decorrelate(&x, 4, 0), x);
    }
}
