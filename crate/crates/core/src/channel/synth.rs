use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::matrix::{MatrixLabel, TransferMatrix};
use super::metrics::MdlMode;
use super::{group_of, K_MODES};
use crate::error::{Error, Result};
use crate::linalg::{expm_i_hermitian, haar_unitary, CMat};
use crate::scalar::{czero, Real, C};
use crate::sigcore::fft::fft_inverse;
use crate::sigcore::{angular_frequencies, seeded_rng, DeterministicGenerator, SignalGrid};

/// Span model parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    pub n_sections: usize,
    /// LP11-group delay relative to LP01 per section, seconds.
    pub section_group_delays: Vec<f64>,
    pub dgd_compensated: bool,
    /// Residual delay spread between the LP11 sub-groups, seconds.
    pub intra_group_dgd: f64,
    /// Mixing strength inside each mode group, 0 (none) to 1 (full).
    pub intra_group_coupling: f64,
    /// Power crosstalk between mode groups at mux and demux, dB (−∞ for none).
    pub inter_group_coupling_db: f64,
    pub mdl_db: f64,
    pub cd_psnm: f64,
    /// `None` for a noiseless link.
    pub snr_db: Option<f64>,
    pub mdl_mode: MdlMode,
    /// Forces the modal tap length (samples).
    pub tap_length: Option<usize>,
    pub seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            n_sections: 0,
            section_group_delays: Vec::new(),
            dgd_compensated: false,
            intra_group_dgd: 0.0,
            intra_group_coupling: 1.0,
            inter_group_coupling_db: -15.0,
            mdl_db: 1.0,
            cd_psnm: 0.0,
            snr_db: None,
            mdl_mode: MdlMode::FrequencyAveraged,
            tap_length: None,
            seed: 1,
        }
    }
}

impl ChannelParams {
    /// Lossless, delay-free, uncoupled channel.
    pub fn ideal() -> Self {
        Self {
            intra_group_coupling: 0.0,
            inter_group_coupling_db: f64::NEG_INFINITY,
            mdl_db: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self, grid: &SignalGrid) -> Result<()> {
        if self.section_group_delays.len() != self.n_sections {
            return Err(Error::param(
                "section_group_delays",
                format!("{} values for {} sections", self.section_group_delays.len(), self.n_sections),
            ));
        }
        if self.section_group_delays.iter().any(|d| !d.is_finite()) || !self.intra_group_dgd.is_finite() {
            return Err(Error::param("delays", "must be finite"));
        }
        if self.dgd_compensated {
            let net: f64 = self.section_group_delays.iter().sum();
            if net.abs() >= grid.symbol_period() {
                return Err(Error::param(
                    "section_group_delays",
                    format!("compensated span leaves {net:e} s net delay, more than one symbol"),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.intra_group_coupling) {
            return Err(Error::param("intra_group_coupling", "must lie in [0, 1]"));
        }
        if self.inter_group_coupling_db > 0.0 || self.inter_group_coupling_db.is_nan() {
            return Err(Error::param("inter_group_coupling_db", "must be ≤ 0 dB"));
        }
        if !(self.mdl_db >= 0.0 && self.mdl_db.is_finite()) {
            return Err(Error::param("mdl_db", "must be finite and ≥ 0"));
        }
        if !self.cd_psnm.is_finite() {
            return Err(Error::param("cd_psnm", "must be finite"));
        }
        if let Some(s) = self.snr_db {
            if s.is_nan() {
                return Err(Error::param("snr_db", "is NaN"));
            }
        }
        Ok(())
    }
}

/// Delays in samples of each tributary through the lumped modal stages.
fn tributary_delays(params: &ChannelParams, grid: &SignalGrid) -> (Vec<Vec<f64>>, Vec<f64>) {
    let fs = grid.sample_rate();
    let sections = params
        .section_group_delays
        .iter()
        .map(|&d| (0..K_MODES).map(|t| if group_of(t) == 1 { d * fs } else { 0.0 }).collect())
        .collect();
    let half = params.intra_group_dgd * fs / 2.0;
    let intra = [0.0, 0.0, -half, -half, half, half].to_vec();
    (sections, intra)
}

fn group_mixer<T: Real>(strength: f64, rng: &mut DeterministicGenerator) -> CMat<T> {
    let mut out = CMat::<T>::identity(K_MODES);
    if strength == 0.0 {
        return out;
    }
    for (lo, hi) in [(0usize, 2usize), (2, 6)] {
        let n = hi - lo;
        let v: CMat<T> = haar_unitary(n, rng);
        let phases: Vec<T> = (0..n)
            .map(|_| T::lit(strength * rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)))
            .collect();
        let g = &(&v * &CMat::from_diag(&phases)) * &v.adjoint();
        let u = expm_i_hermitian(&g);
        for i in 0..n {
            for j in 0..n {
                out[(lo + i, lo + j)] = u[(i, j)];
            }
        }
    }
    out
}

fn inter_group_mixer<T: Real>(db: f64, rng: &mut DeterministicGenerator) -> CMat<T> {
    let eps = if db == f64::NEG_INFINITY { 0.0 } else { 10f64.powf(db / 20.0) };
    let mut b = CMat::<T>::zeros(K_MODES, K_MODES);
    for i in 0..2 {
        for j in 2..K_MODES {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            // each LP01 mode couples to four LP11 modes; unit total strength
            let v = Complex::new(T::lit(eps * re / 8f64.sqrt()), T::lit(eps * im / 8f64.sqrt()));
            b[(i, j)] = v;
            b[(j, i)] = v.conj();
        }
    }
    expm_i_hermitian(&b)
}

/// Input-side loss stage `W·diag(s)·Wᴴ` with `20·log10(s_max/s_min) = mdl_db`
/// and unit mean power gain.
fn mdl_stage<T: Real>(mdl_db: f64, rng: &mut DeterministicGenerator) -> CMat<T> {
    if mdl_db == 0.0 {
        return CMat::identity(K_MODES);
    }
    let s: Vec<f64> = (0..K_MODES)
        .map(|i| {
            let db = -mdl_db / 2.0 + mdl_db * i as f64 / (K_MODES - 1) as f64;
            10f64.powf(db / 20.0)
        })
        .collect();
    let rms = (s.iter().map(|v| v * v).sum::<f64>() / K_MODES as f64).sqrt();
    let s: Vec<T> = s.iter().map(|v| T::lit(v / rms)).collect();
    let w: CMat<T> = haar_unitary(K_MODES, rng);
    &(&w * &CMat::from_diag(&s)) * &w.adjoint()
}

fn delay_diag<T: Real>(delays: &[f64], omega_norm: f64) -> CMat<T> {
    CMat::from_fn(K_MODES, K_MODES, |i, j| {
        if i == j {
            let p = -omega_norm * delays[i];
            Complex::new(T::lit(p.cos()), T::lit(p.sin()))
        } else {
            czero()
        }
    })
}

/// Builds the six-mode span:
/// `H(ω) = CD(ω) · E_out · U_out · Π_s(C_s·Δ_s(ω)) · Δ_intra(ω) · U_in · E_in · S`.
pub fn synthesize_channel<T: Real>(params: &ChannelParams, grid: &SignalGrid) -> Result<TransferMatrix<T>> {
    params.validate(grid)?;
    let mut rng = seeded_rng(params.seed, "channel/synthesis");
    let (sections, intra) = tributary_delays(params, grid);

    // intra-group couplings commute with the per-group section delays, so
    // only the net group delay reaches the end-to-end response.
    let net: f64 = params.section_group_delays.iter().sum::<f64>() * grid.sample_rate();
    let max_delay = net.abs() + intra.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let fractional = sections
        .iter()
        .flatten()
        .chain(&intra)
        .any(|d| (d - d.round()).abs() > 1e-9);
    let needed = 2 * max_delay.ceil() as usize + 1;
    let l = match params.tap_length {
        Some(l) => {
            if l < needed {
                return Err(Error::param(
                    "tap_length",
                    format!("{l} taps cannot hold delays spanning {needed} samples"),
                ));
            }
            l
        }
        None => {
            let base = needed.next_power_of_two().max(8);
            if fractional {
                (base * 4).max(64)
            } else {
                base
            }
        }
    };

    let e_in = inter_group_mixer::<T>(params.inter_group_coupling_db, &mut rng);
    let e_out = inter_group_mixer::<T>(params.inter_group_coupling_db, &mut rng);
    let u_in = group_mixer::<T>(params.intra_group_coupling, &mut rng);
    let u_out = group_mixer::<T>(params.intra_group_coupling, &mut rng);
    let couplings: Vec<CMat<T>> = (0..params.n_sections)
        .map(|_| group_mixer(params.intra_group_coupling, &mut rng))
        .collect();
    let s = mdl_stage::<T>(params.mdl_db, &mut rng);

    let input = &(&u_in * &e_in) * &s;
    let omegas = angular_frequencies(l, grid.sample_rate());
    let fs = grid.sample_rate();
    let mut entries = vec![vec![czero::<T>(); l]; K_MODES * K_MODES];
    for (b, &w) in omegas.iter().enumerate() {
        let wn = w / fs;
        let mut h = &delay_diag::<T>(&intra, wn) * &input;
        for (c, d) in couplings.iter().zip(&sections) {
            h = &(c * &delay_diag::<T>(d, wn)) * &h;
        }
        h = &(&e_out * &u_out) * &h;
        for i in 0..K_MODES {
            for j in 0..K_MODES {
                entries[i * K_MODES + j][b] = h[(i, j)];
            }
        }
    }
    let origin = l / 2;
    let taps = entries
        .into_iter()
        .map(|mut e| {
            fft_inverse(&mut e);
            (0..l).map(|t| e[(t + l - origin) % l]).collect::<Vec<C<T>>>()
        })
        .collect();
    Ok(TransferMatrix::new(K_MODES, taps, origin, *grid, MatrixLabel::TrueChannel)?
        .with_common_cd(params.cd_psnm))
}
