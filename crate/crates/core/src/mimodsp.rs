//! Post-retrieval DSP: dispersion compensation, K×K equalisation at the
//! symbol rate, QPSK decisions and BER metrology.

use std::io::{BufRead, Write};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::chanest::LsFitter;
use crate::channel::TransferMatrix;
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::scalar::{czero, Real, C};
use crate::sigcore::fft::{fft_forward, fft_inverse};
use crate::sigcore::{apply_dispersion, DispersionOperator, MdmWaveform, SignalGrid};
use crate::txgen::{matched_symbols, rrc_filter};

pub use crate::txgen::demap_qpsk;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualizerMode {
    #[default]
    ZeroForcingFromH,
    MmseFromH,
    DataAidedLs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EqualizerConfig {
    /// Symbol-spaced taps per matrix entry; `None` keeps the full per-bin inverse.
    pub n_taps: Option<usize>,
    pub mode: EqualizerMode,
    /// Noise power added to `C Cᴴ` in MMSE mode.
    pub noise_loading: f64,
    /// Relative singular-value floor for the per-bin inverse (0 = none).
    pub regularization: f64,
    /// Ridge of the data-aided fit.
    pub ls_ridge: f64,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self {
            n_taps: Some(64),
            mode: EqualizerMode::ZeroForcingFromH,
            noise_loading: 0.0,
            regularization: 0.0,
            ls_ridge: 1e-9,
        }
    }
}

/// Applies the backward common dispersion to every tributary.
pub fn compensate_cd<T: Real>(x: &MdmWaveform<T>, h_cd: &DispersionOperator) -> Result<MdmWaveform<T>> {
    if h_cd.center_wavelength != x.grid().center_wavelength {
        return Err(Error::Shape("dispersion operator and waveform use different wavelengths".into()));
    }
    let inv = h_cd.inverse();
    MdmWaveform::new(x.tributaries().iter().map(|t| apply_dispersion(t, &inv)).collect())
}

/// Sampling phase (samples) with the most matched-filter output energy over
/// `range` of symbols.
pub fn timing_phase<T: Real>(x: &MdmWaveform<T>, range: std::ops::Range<usize>) -> usize {
    let grid = *x.grid();
    let sps = grid.samples_per_symbol;
    let g = rrc_filter::<T>(grid.n_samples, &grid);
    (0..sps)
        .map(|ph| {
            let e: f64 = x
                .tributaries()
                .iter()
                .map(|t| {
                    let s = matched_symbols(t.samples(), sps, &g, ph);
                    s[range.clone()].iter().map(|v| v.norm_sqr().as_f64()).sum::<f64>()
                })
                .sum();
            (ph, e)
        })
        .fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a })
        .0
}

/// Matched filter and decimation of every tributary at `phase`.
pub fn matched_streams<T: Real>(x: &MdmWaveform<T>, phase: usize) -> Vec<Vec<C<T>>> {
    let grid = *x.grid();
    let g = rrc_filter::<T>(grid.n_samples, &grid);
    x.tributaries()
        .iter()
        .map(|t| matched_symbols(t.samples(), grid.samples_per_symbol, &g, phase))
        .collect()
}

/// Symbol-rate channel `C(ν) = Σ_aliases G² H / sps²` for each of `m` bins.
fn symbol_rate_channel<T: Real>(h: &TransferMatrix<T>, n: usize, sps: usize, phase: usize) -> Result<Vec<CMat<T>>> {
    let g = rrc_filter::<T>(n, &SignalGrid { n_samples: n, ..*h.grid() });
    let k = h.k();
    let m = n / sps;
    let entries = (0..k * k).map(|e| h.entry_response(e / k, e % k, n)).collect::<Result<Vec<_>>>()?;
    let s = T::one() / T::lit((sps * sps) as f64);
    let w = std::f64::consts::TAU * phase as f64 / n as f64;
    Ok((0..m)
        .map(|r| {
            CMat::from_fn(k, k, |i, j| {
                let e = &entries[i * k + j];
                let mut acc = czero::<T>();
                let mut b = r;
                while b < n {
                    let kk = if b < n / 2 { b as f64 } else { b as f64 - n as f64 };
                    let rot = Complex::new(T::lit((w * kk).cos()), T::lit((w * kk).sin()));
                    acc = acc + e[b] * g[b] * g[b] * rot;
                    b += m;
                }
                acc * s
            })
        })
        .collect())
}

/// Per-bin inverse, optionally truncated to `n_taps` symbol-spaced taps.
fn inverse_response<T: Real>(c: &[CMat<T>], cfg: &EqualizerConfig) -> Result<Vec<CMat<T>>> {
    let k = c[0].rows();
    let mut w = Vec::with_capacity(c.len());
    for (bin, cb) in c.iter().enumerate() {
        let wb = match cfg.mode {
            EqualizerMode::MmseFromH => {
                let ch = cb.adjoint();
                let load = CMat::from_diag(&vec![T::lit(cfg.noise_loading); k]);
                let inner = (cb * &ch).add(&load);
                let inv = inner
                    .inverse(T::lit(cfg.regularization.max(1e-14)))
                    .ok_or(Error::SingularChannel { bin })?;
                &ch * &inv
            }
            _ => cb
                .inverse(T::lit(cfg.regularization.max(1e-14)))
                .ok_or(Error::SingularChannel { bin })?,
        };
        w.push(wb);
    }
    match cfg.n_taps {
        Some(nt) if nt < c.len() => Ok(truncate(&w, nt)),
        _ => Ok(w),
    }
}

fn truncate<T: Real>(w: &[CMat<T>], n_taps: usize) -> Vec<CMat<T>> {
    let m = w.len();
    let k = w[0].rows();
    let mut entries: Vec<Vec<C<T>>> = (0..k * k)
        .map(|e| {
            let mut v: Vec<C<T>> = w.iter().map(|b| b[(e / k, e % k)]).collect();
            fft_inverse(&mut v);
            let lo = n_taps / 2;
            let hi = n_taps - lo;
            for (d, x) in v.iter_mut().enumerate() {
                if d >= hi && d < m - lo {
                    *x = czero();
                }
            }
            fft_forward(&mut v);
            v
        })
        .collect();
    (0..m)
        .map(|b| CMat::from_fn(k, k, |i, j| std::mem::take(&mut entries[i * k + j][b])))
        .collect()
}

fn apply_bins<T: Real>(w: &[CMat<T>], streams: &[Vec<C<T>>]) -> Vec<Vec<C<T>>> {
    let k = streams.len();
    let m = streams[0].len();
    let spectra: Vec<Vec<C<T>>> = streams
        .iter()
        .map(|s| {
            let mut v = s.clone();
            fft_forward(&mut v);
            v
        })
        .collect();
    let mut out = vec![vec![czero::<T>(); m]; k];
    for b in 0..m {
        let y: Vec<C<T>> = spectra.iter().map(|s| s[b]).collect();
        let x = w[b].mul_vec(&y);
        for i in 0..k {
            out[i][b] = x[i];
        }
    }
    for o in &mut out {
        fft_inverse(o);
    }
    out
}

/// Symbols between the first and last taps within 40 dB of the strongest
/// (common dispersion excluded).
pub fn channel_memory_symbols<T: Real>(h: &TransferMatrix<T>) -> usize {
    let l = h.tap_len();
    let power: Vec<f64> = (0..l)
        .map(|t| h.all_taps().iter().map(|e| e[t].norm_sqr().as_f64()).sum())
        .collect();
    let peak = power.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return 0;
    }
    let idx: Vec<usize> = (0..l).filter(|&t| power[t] >= peak * 1e-4).collect();
    (idx[idx.len() - 1] - idx[0] + 1).div_ceil(h.grid().samples_per_symbol)
}

/// Equalises `fields` against `h` (modes from `h`) and returns one symbol
/// stream per tributary, indexed like the transmitted frame.
pub fn mimo_equalize<T: Real>(
    fields: &MdmWaveform<T>,
    h: &TransferMatrix<T>,
    cfg: &EqualizerConfig,
) -> Result<Vec<Vec<C<T>>>> {
    if cfg.mode == EqualizerMode::DataAidedLs {
        return Err(Error::param("mode", "data-aided equalisation needs training symbols; use equalize_data_aided"));
    }
    if fields.k() != h.k() {
        return Err(Error::Shape(format!("{} fields for a {}×{0} channel", fields.k(), h.k())));
    }
    let grid = *fields.grid();
    let sps = grid.samples_per_symbol;
    let n = grid.n_samples;
    if let Some(nt) = cfg.n_taps {
        let memory = channel_memory_symbols(h);
        if nt == 0 || nt < memory {
            return Err(Error::param("n_taps", format!("{nt} taps for {memory} symbols of channel memory")));
        }
    }
    let streams = matched_streams(fields, 0);
    let c = symbol_rate_channel(h, n, sps, 0)?;
    let w = inverse_response(&c, cfg)?;
    Ok(apply_bins(&w, &streams))
}

/// Data-aided LS equaliser trained on `ts_range` (symbols, circular within
/// the guard) against the known training symbols.
pub fn equalize_data_aided<T: Real>(
    fields: &MdmWaveform<T>,
    training: &[Vec<C<f64>>],
    ts_range: std::ops::Range<usize>,
    cfg: &EqualizerConfig,
) -> Result<Vec<Vec<C<T>>>> {
    let phase = timing_phase(fields, ts_range.clone());
    let streams = matched_streams(fields, phase);
    let m = streams[0].len();
    let n_taps = cfg.n_taps.unwrap_or(32).min(ts_range.len() / fields.k().max(1));
    let rx_ts: Vec<Vec<C<T>>> = streams.iter().map(|s| s[ts_range.clone()].to_vec()).collect();
    let fitter = LsFitter::new(&rx_ts, n_taps, cfg.ls_ridge)?;
    let k = fields.k();
    let rows: Vec<Vec<C<T>>> = training
        .iter()
        .map(|t| {
            let tt: Vec<C<T>> = t.iter().map(|v| C::new(T::lit(v.re), T::lit(v.im))).collect();
            fitter.fit(&tt)
        })
        .collect();
    let origin = fitter.origin();
    let mut out = vec![vec![czero::<T>(); m]; k];
    let spectra: Vec<Vec<C<T>>> = streams
        .iter()
        .map(|s| {
            let mut v = s.clone();
            fft_forward(&mut v);
            v
        })
        .collect();
    for (i, row) in rows.iter().enumerate() {
        let mut acc = vec![czero::<T>(); m];
        for j in 0..k {
            let mut hj = vec![czero::<T>(); m];
            for t in 0..n_taps {
                let d = (t as isize - origin as isize).rem_euclid(m as isize) as usize;
                hj[d] = hj[d] + row[j * n_taps + t];
            }
            fft_forward(&mut hj);
            acc.iter_mut()
                .zip(hj.iter().zip(&spectra[j]))
                .for_each(|(a, (x, y))| *a = *a + *x * *y);
        }
        fft_inverse(&mut acc);
        out[i] = acc;
    }
    Ok(out)
}

/// Bit-error statistics across tributaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerReport {
    pub per_tributary: Vec<f64>,
    pub mean: f64,
    /// Population variance of the per-tributary BER.
    pub variance: f64,
    pub bit_errors: Vec<u64>,
    pub bits_compared: Vec<u64>,
    pub pilot_percentage: f64,
}

impl BerReport {
    pub fn total_errors(&self) -> u64 {
        self.bit_errors.iter().sum()
    }

    pub fn total_bits(&self) -> u64 {
        self.bits_compared.iter().sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Counts errors over the symbols where `include` is true (two bits each).
pub fn compute_ber(
    rx_bits: &[Vec<u8>],
    tx_bits: &[Vec<u8>],
    include: &[bool],
    pilot_percentage: f64,
) -> Result<BerReport> {
    if rx_bits.len() != tx_bits.len() || rx_bits.is_empty() {
        return Err(Error::Shape("tributary counts differ".into()));
    }
    let mut errors = Vec::new();
    let mut bits = Vec::new();
    for (r, t) in rx_bits.iter().zip(tx_bits) {
        if r.len() != t.len() || r.len() != 2 * include.len() {
            return Err(Error::Shape(format!(
                "bit streams of {} and {} for {} symbols",
                r.len(),
                t.len(),
                include.len()
            )));
        }
        let mut e = 0u64;
        let mut b = 0u64;
        for (s, _) in include.iter().enumerate().filter(|(_, &m)| m) {
            b += 2;
            e += u64::from(r[2 * s] != t[2 * s]) + u64::from(r[2 * s + 1] != t[2 * s + 1]);
        }
        errors.push(e);
        bits.push(b);
    }
    let per: Vec<f64> = errors
        .iter()
        .zip(&bits)
        .map(|(&e, &b)| if b == 0 { 0.0 } else { e as f64 / b as f64 })
        .collect();
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    let variance = per.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / per.len() as f64;
    Ok(BerReport {
        per_tributary: per,
        mean,
        variance,
        bit_errors: errors,
        bits_compared: bits,
        pilot_percentage,
    })
}

/// Writes `re,im,tributary` rows.
pub fn export_constellation<T: Real, W: Write>(streams: &[Vec<C<T>>], mut w: W) -> Result<()> {
    writeln!(w, "re,im,tributary")?;
    for (i, s) in streams.iter().enumerate() {
        for v in s {
            writeln!(w, "{:?},{:?},{i}", v.re.as_f64(), v.im.as_f64())?;
        }
    }
    Ok(())
}

/// Parses a constellation CSV back into per-tributary streams.
pub fn read_constellation<R: BufRead>(r: R) -> Result<Vec<Vec<Complex<f64>>>> {
    let mut out: Vec<Vec<Complex<f64>>> = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if n == 0 {
            if line.trim() != "re,im,tributary" {
                return Err(Error::Format(format!("unexpected header `{line}`")));
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Format(format!("line {}: `{line}`", n + 1));
        if f.len() != 3 {
            return Err(bad());
        }
        let re: f64 = f[0].parse().map_err(|_| bad())?;
        let im: f64 = f[1].parse().map_err(|_| bad())?;
        let t: usize = f[2].parse().map_err(|_| bad())?;
        if out.len() <= t {
            out.resize(t + 1, Vec::new());
        }
        out[t].push(Complex::new(re, im));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::txgen::map_qpsk;

    #[test]
    fn demap_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(demap_qpsk(&[Complex::new(0.9 * s, 1.1 * s)]), vec![0, 0]);
        assert_eq!(demap_qpsk(&[Complex::new(0.0f64, 0.0)]), vec![0, 0]);
        let bits = vec![0, 1, 1, 0, 1, 1, 0, 0];
        assert_eq!(demap_qpsk(&map_qpsk::<f64>(&bits).unwrap()), bits);
    }

    #[test]
    fn ber_counts() {
        let tx = vec![vec![0u8; 20]];
        let mut rx = tx.clone();
        rx[0][3] = 1;
        rx[0][7] = 1;
        let r = compute_ber(&rx, &tx, &[true; 10], 0.2).unwrap();
        assert_eq!(r.bit_errors, vec![2]);
        assert!((r.mean - 0.1).abs() < 1e-15);
        let inv: Vec<Vec<u8>> = vec![vec![1u8; 20]];
        assert_eq!(compute_ber(&inv, &tx, &[true; 10], 0.2).unwrap().mean, 1.0);
        assert_eq!(compute_ber(&tx, &tx, &[true; 10], 0.2).unwrap().mean, 0.0);
    }

    #[test]
    fn excluded_positions_are_not_counted() {
        let tx = vec![vec![0u8; 8]];
        let rx = vec![vec![1u8, 1, 0, 0, 0, 0, 0, 0]];
        let r = compute_ber(&rx, &tx, &[false, true, true, true], 0.0).unwrap();
        assert_eq!(r.total_errors(), 0);
        assert_eq!(r.total_bits(), 6);
    }

    #[test]
    fn constellation_round_trip() {
        let streams = vec![vec![Complex::new(0.1f64, -0.3), Complex::new(1e-17, 2.5)], vec![]];
        let mut buf = Vec::new();
        export_constellation(&streams, &mut buf).unwrap();
        let back = read_constellation(&buf[..]).unwrap();
        assert_eq!(back[0], streams[0]);
        let mut empty = Vec::new();
        export_constellation::<f64, _>(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap(), "re,im,tributary\n");
    }
}
