use crate::channel::{MatrixLabel, TransferMatrix};
use crate::error::{Error, Result};
use crate::linalg::{CMat, Cholesky};
use crate::scalar::{czero, Real, C};
use crate::sigcore::fft::{fft_forward, fft_inverse};
use crate::sigcore::{MdmWaveform, SignalGrid};

/// Circular multi-input least-squares fit of `L` taps per input.
///
/// Tap `l` sits at delay `l − L/2`. The normal equations are block Toeplitz;
/// their blocks are circular cross-correlations of the inputs, computed by FFT.
pub struct LsFitter<T: Real> {
    n: usize,
    l: usize,
    origin: usize,
    inputs: Vec<Vec<C<T>>>,
    chol: Cholesky<T>,
}

impl<T: Real> LsFitter<T> {
    /// `ridge` is relative to the mean diagonal of the Gram matrix.
    pub fn new(inputs: &[Vec<C<T>>], l: usize, ridge: f64) -> Result<Self> {
        let k = inputs.len();
        if k == 0 || l == 0 {
            return Err(Error::param("inputs", "need at least one input and one tap"));
        }
        let n = inputs[0].len();
        if inputs.iter().any(|x| x.len() != n) {
            return Err(Error::Shape("inputs differ in length".into()));
        }
        if !(ridge >= 0.0) {
            return Err(Error::param("ridge", "must be ≥ 0"));
        }
        if n < k * l {
            return Err(Error::Identifiability(format!(
                "{n} samples cannot determine {k}×{l} taps"
            )));
        }
        let spectra: Vec<Vec<C<T>>> = inputs
            .iter()
            .map(|x| {
                let mut s = x.clone();
                fft_forward(&mut s);
                s
            })
            .collect();
        let origin = l / 2;
        let dim = k * l;
        // c[j][j'][τ] = Σ_n conj(x_j[n]) x_j'[n + τ]
        let mut corr = vec![Vec::new(); k * k];
        for j in 0..k {
            for jp in 0..k {
                let mut c: Vec<C<T>> = spectra[j]
                    .iter()
                    .zip(&spectra[jp])
                    .map(|(a, b)| a.conj() * *b)
                    .collect();
                fft_inverse(&mut c);
                corr[j * k + jp] = c;
            }
        }
        let mut gram = CMat::from_fn(dim, dim, |r, c| {
            let (j, lr) = (r / l, r % l);
            let (jp, lc) = (c / l, c % l);
            let tau = (lr as isize - lc as isize).rem_euclid(n as isize) as usize;
            corr[j * k + jp][tau]
        });
        let trace: T = (0..dim).map(|i| gram[(i, i)].re).sum();
        if ridge > 0.0 {
            let lam = T::lit(ridge) * trace / T::lit(dim as f64);
            gram = gram.add(&CMat::from_diag(&vec![lam; dim]));
        }
        let chol = Cholesky::factor(&gram, T::lit(1e-12)).map_err(|pivot| {
            Error::Identifiability(format!(
                "training matrix is rank deficient (pivot {pivot} of {dim}); use a ridge or a richer sequence"
            ))
        })?;
        Ok(Self {
            n,
            l,
            origin,
            inputs: spectra,
            chol,
        })
    }

    pub fn tap_len(&self) -> usize {
        self.l
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    /// Taps (input-major, `L` per input) best explaining `y`.
    pub fn fit(&self, y: &[C<T>]) -> Vec<C<T>> {
        let mut ys = y.to_vec();
        fft_forward(&mut ys);
        self.fit_spectrum(&ys)
    }

    fn fit_spectrum(&self, ys: &[C<T>]) -> Vec<C<T>> {
        let n = self.n;
        let mut b = Vec::with_capacity(self.inputs.len() * self.l);
        for x in &self.inputs {
            let mut c: Vec<C<T>> = x.iter().zip(ys).map(|(a, v)| a.conj() * *v).collect();
            fft_inverse(&mut c);
            for t in 0..self.l {
                let d = (t as isize - self.origin as isize).rem_euclid(n as isize) as usize;
                b.push(c[d]);
            }
        }
        self.chol.solve_in_place(&mut b);
        b
    }

    /// `Σ_j h_j ⊛ x_j`.
    pub fn synthesize(&self, taps: &[C<T>]) -> Vec<C<T>> {
        let n = self.n;
        let mut acc = vec![czero::<T>(); n];
        for (j, x) in self.inputs.iter().enumerate() {
            let mut h = vec![czero::<T>(); n];
            for t in 0..self.l {
                let d = (t as isize - self.origin as isize).rem_euclid(n as isize) as usize;
                h[d] = h[d] + taps[j * self.l + t];
            }
            fft_forward(&mut h);
            acc.iter_mut()
                .zip(h.iter().zip(x))
                .for_each(|(a, (hv, xv))| *a = *a + *hv * *xv);
        }
        fft_inverse(&mut acc);
        acc
    }

    /// Orthogonal projection of `v` onto the span of the shifted inputs.
    pub fn project(&self, v: &mut [C<T>]) {
        let taps = self.fit(v);
        v.copy_from_slice(&self.synthesize(&taps));
    }
}

impl<T: Real> crate::retrieval::Consensus<T> for LsFitter<T> {
    fn project(&self, v: &mut [C<T>]) {
        LsFitter::project(self, v)
    }
}

/// Assembles fitted rows into a transfer matrix.
pub(crate) fn rows_to_matrix<T: Real>(
    rows: &[Vec<C<T>>],
    l: usize,
    origin: usize,
    grid: SignalGrid,
    label: MatrixLabel,
) -> Result<TransferMatrix<T>> {
    let k = rows.len();
    let taps = (0..k * k)
        .map(|e| rows[e / k][(e % k) * l..(e % k + 1) * l].to_vec())
        .collect();
    TransferMatrix::new(k, taps, origin, grid, label)
}

/// Least-squares `L`-tap channel from received and transmitted fields over
/// one (circular) training window.
pub fn ls_channel_fit<T: Real>(
    rx: &MdmWaveform<T>,
    tx: &MdmWaveform<T>,
    l_est: usize,
    ridge: f64,
) -> Result<TransferMatrix<T>> {
    if rx.grid().n_samples != tx.grid().n_samples {
        return Err(Error::Shape("received and transmitted windows differ in length".into()));
    }
    let k = tx.k();
    let sps = tx.grid().samples_per_symbol;
    let symbols = tx.grid().n_samples / sps;
    if symbols < k * l_est {
        return Err(Error::Identifiability(format!(
            "{symbols} training symbols below K·L = {}",
            k * l_est
        )));
    }
    let inputs: Vec<Vec<C<T>>> = tx.tributaries().iter().map(|t| t.samples().to_vec()).collect();
    let fitter = LsFitter::new(&inputs, l_est, ridge)?;
    let rows: Vec<Vec<C<T>>> = rx.tributaries().iter().map(|t| fitter.fit(t.samples())).collect();
    rows_to_matrix(&rows, l_est, fitter.origin(), *tx.grid(), MatrixLabel::EstimateHei)
}
