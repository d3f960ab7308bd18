use std::io::Write;

use serde::{Deserialize, Serialize};

use super::matrix::TransferMatrix;
use super::ModeGroup;
use crate::error::Result;
use crate::linalg::{hermitian_eigen, CMat};
use crate::scalar::Real;
use crate::sigcore::in_band_mask;

/// How singular values are pooled across frequency.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdlMode {
    /// Eigenvalues of `HᴴH` averaged over in-band bins.
    #[default]
    FrequencyAveraged,
    /// Largest per-bin MDL over the in-band bins.
    WorstCase,
}

fn analysis_len(l: usize) -> usize {
    (2 * l).next_power_of_two().max(256)
}

fn eig_ratio_db<T: Real>(m: &CMat<T>) -> f64 {
    let (ev, _) = hermitian_eigen(m);
    let max = ev.iter().fold(f64::MIN, |a, v| a.max(v.as_f64()));
    let min = ev.iter().fold(f64::MAX, |a, v| a.min(v.as_f64()));
    if min <= 0.0 {
        return f64::INFINITY;
    }
    10.0 * (max / min).log10()
}

/// Mode-dependent loss `10·log10(σ²_max / σ²_min)` in dB.
pub fn mdl_of<T: Real>(h: &TransferMatrix<T>, mode: MdlMode) -> f64 {
    let n = analysis_len(h.tap_len());
    let g = h.grid();
    let resp = h.frequency_response(n).expect("analysis grid covers the taps");
    let mask = in_band_mask(n, g.sample_rate(), g.symbol_rate, g.rolloff);
    let k = h.k();
    match mode {
        MdlMode::FrequencyAveraged => {
            let mut acc = CMat::<T>::zeros(k, k);
            let mut count = 0usize;
            for (hb, _) in resp.iter().zip(&mask).filter(|(_, &m)| m) {
                acc = acc.add(&(&hb.adjoint() * hb));
                count += 1;
            }
            let acc = acc.scale(num_complex::Complex::new(T::one() / T::lit(count as f64), T::zero()));
            eig_ratio_db(&acc).max(0.0)
        }
        MdlMode::WorstCase => resp
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(hb, _)| eig_ratio_db(&(&hb.adjoint() * hb)))
            .fold(0.0, f64::max),
    }
}

/// MDL of a single K×K matrix.
pub fn mdl_of_matrix<T: Real>(m: &CMat<T>) -> f64 {
    eig_ratio_db(&(&m.adjoint() * m)).max(0.0)
}

/// Power-vs-delay profile aggregated over a pair of mode groups.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpulseProfile {
    /// Delay of each tap in symbol periods.
    pub delay_ts: Vec<f64>,
    pub power: Vec<f64>,
}

impl ImpulseProfile {
    pub fn total_energy(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn peak_delay_ts(&self) -> f64 {
        let (i, _) = self
            .power
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |a, (i, &p)| if p > a.1 { (i, p) } else { a });
        self.delay_ts[i]
    }

    /// Extent in symbol periods between the first and last taps within
    /// `threshold_db` of the peak.
    pub fn span_ts(&self, threshold_db: f64) -> f64 {
        let peak = self.power.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let floor = peak * 10f64.powf(threshold_db / 10.0);
        let idx: Vec<usize> = (0..self.power.len()).filter(|&i| self.power[i] >= floor).collect();
        self.delay_ts[*idx.last().unwrap()] - self.delay_ts[idx[0]]
    }

    /// Power-weighted RMS delay spread in symbol periods.
    pub fn rms_spread_ts(&self) -> f64 {
        let e = self.total_energy();
        if e == 0.0 {
            return 0.0;
        }
        let mean: f64 = self.delay_ts.iter().zip(&self.power).map(|(d, p)| d * p).sum::<f64>() / e;
        (self
            .delay_ts
            .iter()
            .zip(&self.power)
            .map(|(d, p)| (d - mean).powi(2) * p)
            .sum::<f64>()
            / e)
            .sqrt()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "delay_ts,power")?;
        for (d, p) in self.delay_ts.iter().zip(&self.power) {
            writeln!(w, "{d},{p:e}")?;
        }
        Ok(())
    }
}

/// `Σ |h_ij(n)|²` over outputs `i ∈ to_group`, inputs `j ∈ from_group`. The
/// common dispersion, if any, is folded into the taps first.
pub fn impulse_response<T: Real>(
    h: &TransferMatrix<T>,
    from_group: ModeGroup,
    to_group: ModeGroup,
) -> ImpulseProfile {
    let owned;
    let h = if h.common_cd_psnm() != 0.0 {
        owned = h
            .materialize(analysis_len(h.tap_len()))
            .expect("analysis grid covers the taps");
        &owned
    } else {
        h
    };
    let sps = h.grid().samples_per_symbol as f64;
    let l = h.tap_len();
    let mut power = vec![0.0f64; l];
    for i in to_group.tributaries().filter(|&i| i < h.k()) {
        for j in from_group.tributaries().filter(|&j| j < h.k()) {
            for (p, v) in power.iter_mut().zip(h.taps(i, j)) {
                *p += v.norm_sqr().as_f64();
            }
        }
    }
    let delay_ts = (0..l).map(|t| (t as f64 - h.origin() as f64) / sps).collect();
    ImpulseProfile { delay_ts, power }
}

/// Rows `(i, j, tap, power)` of `|h_ij(n)|²` for heat-map plots.
pub fn write_tap_heatmap_csv<T: Real, W: Write>(h: &TransferMatrix<T>, mut w: W) -> Result<()> {
    writeln!(w, "output,input,delay_samples,power")?;
    for i in 0..h.k() {
        for j in 0..h.k() {
            for (t, v) in h.taps(i, j).iter().enumerate() {
                writeln!(w, "{i},{j},{},{:e}", t as isize - h.origin() as isize, v.norm_sqr().as_f64())?;
            }
        }
    }
    Ok(())
}
