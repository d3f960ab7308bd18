use crate::channel::{MatrixLabel, TransferMatrix};
use crate::error::{Error, Result};
use crate::scalar::{Real, C};
use crate::sigcore::fft::fft_inverse;
use crate::sigcore::{angular_frequencies, in_band_mask, DispersionOperator};

/// `h = h_cd ∗ h_md`.
#[derive(Clone, Debug)]
pub struct DispersionSplit<T: Real> {
    pub h_cd: DispersionOperator,
    pub h_md: TransferMatrix<T>,
}

impl<T: Real> DispersionSplit<T> {
    pub fn cd_psnm(&self) -> f64 {
        self.h_cd.signed_psnm()
    }

    /// `h_md` with the common dispersion put back (analytically).
    pub fn recompose(&self) -> TransferMatrix<T> {
        self.h_md
            .clone()
            .with_common_cd(self.cd_psnm())
            .with_label(MatrixLabel::FinalEstimate)
    }
}

/// Grid on which the modal part is tabulated.
pub fn split_grid_len(tap_len: usize) -> usize {
    (2 * tap_len.next_power_of_two()).max(64)
}

/// Separates the common dispersion from `h`.
///
/// The common spectral phase is read from `det H(ω)`, which carries `K` times
/// any phase shared by all modes; a weighted quadratic fit over the in-band
/// bins (weights `|det H|^(1/K)`) gives the dispersion. With `oracle_psnm` the
/// fit is skipped and the given value used.
pub fn split_dispersion<T: Real>(h: &TransferMatrix<T>, oracle_psnm: Option<f64>) -> Result<DispersionSplit<T>> {
    let grid = *h.grid();
    let n = split_grid_len(h.tap_len());
    let fs = grid.sample_rate();
    let resp = h.frequency_response(n)?;
    let psnm = match oracle_psnm {
        Some(v) => v,
        None => fit_common_cd(&resp, n, h.k(), &grid)?,
    };
    let cd = DispersionOperator::for_grid(psnm, &grid).transfer::<T>(n, fs);
    let k = h.k();
    let origin = n / 2;
    let taps = (0..k * k)
        .map(|e| {
            let mut s: Vec<C<T>> = resp.iter().zip(&cd).map(|(m, c)| m[(e / k, e % k)] * c.conj()).collect();
            fft_inverse(&mut s);
            (0..n).map(|t| s[(t + n - origin) % n]).collect()
        })
        .collect();
    let h_md = TransferMatrix::new(k, taps, origin, grid, MatrixLabel::Modal)?;
    Ok(DispersionSplit {
        h_cd: DispersionOperator::for_grid(psnm, &grid),
        h_md,
    })
}

fn fit_common_cd<T: Real>(
    resp: &[crate::linalg::CMat<T>],
    n: usize,
    k: usize,
    grid: &crate::sigcore::SignalGrid,
) -> Result<f64> {
    let fs = grid.sample_rate();
    let omega = angular_frequencies(n, fs);
    let mask = in_band_mask(n, fs, grid.symbol_rate, grid.rolloff);
    let mut bins: Vec<usize> = (0..n).filter(|&b| mask[b]).collect();
    bins.sort_by(|&a, &b| omega[a].total_cmp(&omega[b]));
    let dets: Vec<C<f64>> = bins
        .iter()
        .map(|&b| {
            let d = resp[b].det();
            C::new(d.re.as_f64(), d.im.as_f64())
        })
        .collect();
    if dets.len() < 3 || dets.iter().all(|d| d.norm() == 0.0) {
        return Err(Error::SingularChannel { bin: bins.first().copied().unwrap_or(0) });
    }
    let mut phase = Vec::with_capacity(dets.len());
    let mut prev = dets[0].arg();
    phase.push(prev);
    for d in &dets[1..] {
        let mut p = d.arg();
        while p - prev > std::f64::consts::PI {
            p -= std::f64::consts::TAU;
        }
        while p - prev < -std::f64::consts::PI {
            p += std::f64::consts::TAU;
        }
        phase.push(p);
        prev = p;
    }
    // scale ω to O(1) for conditioning
    let wmax = bins.iter().map(|&b| omega[b].abs()).fold(0.0, f64::max);
    let mut a = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for ((&b, p), d) in bins.iter().zip(&phase).zip(&dets) {
        let x = omega[b] / wmax;
        let w = d.norm().powf(1.0 / k as f64);
        let basis = [1.0, x, x * x];
        for r in 0..3 {
            rhs[r] += w * basis[r] * p;
            for c in 0..3 {
                a[r][c] += w * basis[r] * basis[c];
            }
        }
    }
    let coef = solve3(a, rhs).ok_or(Error::SingularChannel { bin: bins[0] })?;
    let c2 = coef[2] / (wmax * wmax);
    let per_psnm = DispersionOperator::for_grid(1.0, grid).phase_at(1.0);
    Ok(c2 / (k as f64 * per_psnm))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let p = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            for cc in c..3 {
                a[r][cc] -= f * a[c][cc];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}
