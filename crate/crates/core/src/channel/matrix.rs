use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::scalar::{czero, Real, C};
use crate::sigcore::fft::{fft_forward, fft_inverse};
use crate::sigcore::{DispersionOperator, MdmWaveform, SignalGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixLabel {
    TrueChannel,
    /// Intermediate estimate inside the reconstruction loop.
    EstimateHei,
    FinalEstimate,
    /// Modal part after removing the common dispersion.
    Modal,
    Equalizer,
}

impl MatrixLabel {
    pub fn code(self) -> u8 {
        match self {
            MatrixLabel::TrueChannel => 0,
            MatrixLabel::EstimateHei => 1,
            MatrixLabel::FinalEstimate => 2,
            MatrixLabel::Modal => 3,
            MatrixLabel::Equalizer => 4,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => MatrixLabel::TrueChannel,
            1 => MatrixLabel::EstimateHei,
            2 => MatrixLabel::FinalEstimate,
            3 => MatrixLabel::Modal,
            4 => MatrixLabel::Equalizer,
            _ => return None,
        })
    }
}

/// K×K impulse responses `h_ij(n)` (output `i`, input `j`), sample spaced.
///
/// Tap `l` sits at delay `l − origin` samples. An optional common chromatic
/// dispersion is carried analytically and applied exactly on any grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix<T: Real> {
    k: usize,
    taps: Vec<Vec<C<T>>>,
    origin: usize,
    grid: SignalGrid,
    label: MatrixLabel,
    common_cd_psnm: f64,
}

impl<T: Real> TransferMatrix<T> {
    pub fn new(
        k: usize,
        taps: Vec<Vec<C<T>>>,
        origin: usize,
        grid: SignalGrid,
        label: MatrixLabel,
    ) -> Result<Self> {
        if k == 0 || taps.len() != k * k {
            return Err(Error::Shape(format!("expected {} tap vectors, got {}", k * k, taps.len())));
        }
        let l = taps[0].len();
        if l == 0 || taps.iter().any(|t| t.len() != l) {
            return Err(Error::Shape("tap vectors must share a nonzero length".into()));
        }
        if origin >= l {
            return Err(Error::Shape(format!("origin {origin} outside {l} taps")));
        }
        if taps.iter().flatten().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::param("taps", "non-finite tap"));
        }
        Ok(Self {
            k,
            taps,
            origin,
            grid,
            label,
            common_cd_psnm: 0.0,
        })
    }

    pub fn identity(k: usize, grid: SignalGrid) -> Self {
        Self::from_single_tap(&CMat::identity(k), grid, MatrixLabel::TrueChannel)
    }

    /// One-tap matrix from a K×K complex matrix.
    pub fn from_single_tap(m: &CMat<T>, grid: SignalGrid, label: MatrixLabel) -> Self {
        let k = m.rows();
        let taps = (0..k * k).map(|e| vec![m[(e / k, e % k)]]).collect();
        Self {
            k,
            taps,
            origin: 0,
            grid,
            label,
            common_cd_psnm: 0.0,
        }
    }

    /// Embeds a single-tap matrix at the centre of `l` taps.
    pub fn centred(m: &CMat<T>, l: usize, grid: SignalGrid, label: MatrixLabel) -> Self {
        let k = m.rows();
        let origin = l / 2;
        let taps = (0..k * k)
            .map(|e| {
                let mut t = vec![czero(); l];
                t[origin] = m[(e / k, e % k)];
                t
            })
            .collect();
        Self {
            k,
            taps,
            origin,
            grid,
            label,
            common_cd_psnm: 0.0,
        }
    }

    pub fn with_common_cd(mut self, psnm: f64) -> Self {
        self.common_cd_psnm = psnm;
        self
    }

    pub fn with_label(mut self, label: MatrixLabel) -> Self {
        self.label = label;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tap_len(&self) -> usize {
        self.taps[0].len()
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn grid(&self) -> &SignalGrid {
        &self.grid
    }

    pub fn label(&self) -> MatrixLabel {
        self.label
    }

    pub fn common_cd_psnm(&self) -> f64 {
        self.common_cd_psnm
    }

    pub fn taps(&self, i: usize, j: usize) -> &[C<T>] {
        &self.taps[i * self.k + j]
    }

    pub fn all_taps(&self) -> &[Vec<C<T>>] {
        &self.taps
    }

    pub fn tap_energy(&self) -> T {
        self.taps.iter().flatten().map(|v| v.norm_sqr()).sum()
    }

    /// Matrix of tap `l`.
    pub fn tap_matrix(&self, l: usize) -> CMat<T> {
        CMat::from_fn(self.k, self.k, |i, j| self.taps[i * self.k + j][l])
    }

    /// Spectrum of entry `(i, j)` on an `n`-point grid, common CD included.
    pub fn entry_response(&self, i: usize, j: usize, n: usize) -> Result<Vec<C<T>>> {
        let l = self.tap_len();
        if n < l {
            return Err(Error::Shape(format!("{n}-point grid shorter than {l} taps")));
        }
        let mut buf = vec![czero::<T>(); n];
        for (t, v) in self.taps(i, j).iter().enumerate() {
            let d = (t as isize - self.origin as isize).rem_euclid(n as isize) as usize;
            buf[d] = buf[d] + *v;
        }
        fft_forward(&mut buf);
        if self.common_cd_psnm != 0.0 {
            let cd = DispersionOperator::for_grid(self.common_cd_psnm, &self.grid)
                .transfer::<T>(n, self.grid.sample_rate());
            buf.iter_mut().zip(&cd).for_each(|(v, c)| *v = *v * *c);
        }
        Ok(buf)
    }

    /// `H(ω_k)` for all `n` bins, as K×K matrices.
    pub fn frequency_response(&self, n: usize) -> Result<Vec<CMat<T>>> {
        let k = self.k;
        let entries = (0..k * k)
            .map(|e| self.entry_response(e / k, e % k, n))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..n)
            .map(|b| CMat::from_fn(k, k, |i, j| entries[i * k + j][b]))
            .collect())
    }

    /// Taps-only equivalent on an `n`-point circular grid (common CD folded
    /// in), with the origin at `n/2`.
    pub fn materialize(&self, n: usize) -> Result<Self> {
        let k = self.k;
        let origin = n / 2;
        let taps = (0..k * k)
            .map(|e| {
                let mut h = self.entry_response(e / k, e % k, n)?;
                fft_inverse(&mut h);
                Ok((0..n).map(|t| h[(t + n - origin) % n]).collect())
            })
            .collect::<Result<Vec<Vec<C<T>>>>>()?;
        Ok(Self {
            k,
            taps,
            origin,
            grid: self.grid,
            label: self.label,
            common_cd_psnm: 0.0,
        })
    }
}

/// `out_i = Σ_j h_ij ⊛ x_j` with circular convolution on the waveform grid.
pub fn apply_channel<T: Real>(x: &MdmWaveform<T>, h: &TransferMatrix<T>) -> Result<MdmWaveform<T>> {
    let k = h.k();
    if x.k() != k {
        return Err(Error::Shape(format!("waveform has {} tributaries, channel {k}", x.k())));
    }
    let grid = *x.grid();
    if !grid.same_context(h.grid()) {
        return Err(Error::Shape("waveform and channel sampling contexts differ".into()));
    }
    let n = grid.n_samples;
    let spectra: Vec<Vec<C<T>>> = x
        .tributaries()
        .iter()
        .map(|t| {
            let mut s = t.samples().to_vec();
            fft_forward(&mut s);
            s
        })
        .collect();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let mut acc = vec![czero::<T>(); n];
        for (j, xs) in spectra.iter().enumerate() {
            let hij = h.entry_response(i, j, n)?;
            acc.iter_mut()
                .zip(hij.iter().zip(xs))
                .for_each(|(a, (hv, xv))| *a = *a + *hv * *xv);
        }
        fft_inverse(&mut acc);
        out.push(acc);
    }
    MdmWaveform::from_samples(grid, out)
}
