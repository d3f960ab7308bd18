use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ls::{rows_to_matrix, LsFitter};
use crate::channel::{mdl_of, MatrixLabel, MdlMode, TransferMatrix};
use crate::error::{Error, Result};
use crate::frontend::IntensityCapture;
use crate::linalg::{haar_unitary, CMat};
use crate::retrieval::{run_raar, PhaseProblem, RaarSettings};
use crate::scalar::{czero, Real, C};
use crate::sigcore::fft::{fft_forward, fft_inverse};
use crate::sigcore::{apply_dispersion, seeded_rng, DispersionOperator, MdmWaveform, SignalGrid};
use crate::txgen::{shape_frame, MdmFrame};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMatrix {
    /// Random Haar unitary on the centre tap.
    #[default]
    Unitary,
    Identity,
    /// `EstimatorOptions::supplied_matrix`.
    Supplied,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorOptions {
    pub n_outer_iterations: usize,
    pub initial_matrix: InitialMatrix,
    /// Ridge relative to the mean diagonal of the normal equations.
    pub ls_regularization: f64,
    /// Taps per matrix entry, samples.
    pub channel_tap_length: usize,
    /// Phase-retrieval steps per outer iteration.
    pub inner_iterations: usize,
    pub relaxation: f64,
    /// Fit residual below which the estimate counts as converged.
    pub convergence_tolerance: f64,
    /// Residual growth below this level never counts as divergence.
    pub divergence_floor: f64,
    /// Relative step growth that still counts as a plateau.
    pub divergence_growth_tolerance: f64,
    pub seed: u64,
    /// Receiver timing offset of the training window, samples.
    #[serde(skip)]
    pub lag: isize,
    #[serde(skip)]
    pub supplied_matrix: Option<TransferMatrix<f64>>,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            n_outer_iterations: 15,
            initial_matrix: InitialMatrix::Unitary,
            ls_regularization: 1e-6,
            channel_tap_length: 64,
            inner_iterations: 10,
            relaxation: 0.95,
            convergence_tolerance: 1e-6,
            divergence_floor: 1e-6,
            divergence_growth_tolerance: 1e-2,
            seed: 1,
            lag: 0,
            supplied_matrix: None,
        }
    }
}

impl EstimatorOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_outer_iterations == 0 {
            return Err(Error::param("n_outer_iterations", "must be ≥ 1"));
        }
        if self.channel_tap_length == 0 {
            return Err(Error::param("channel_tap_length", "must be ≥ 1"));
        }
        if !(self.ls_regularization >= 0.0) {
            return Err(Error::param("ls_regularization", "must be ≥ 0"));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::param("relaxation", "must lie in (0, 1]"));
        }
        if !(self.divergence_growth_tolerance >= 0.0) {
            return Err(Error::param("divergence_growth_tolerance", "must be ≥ 0"));
        }
        if self.initial_matrix == InitialMatrix::Supplied && self.supplied_matrix.is_none() {
            return Err(Error::param("initial_matrix", "supplied, but no matrix given"));
        }
        Ok(())
    }
}

/// Outcome of the training-sequence loop.
#[derive(Clone, Debug)]
pub struct Estimation<T: Real> {
    pub h: TransferMatrix<T>,
    /// MDL of the initial matrix followed by one entry per outer iteration.
    pub mdl_history: Vec<f64>,
    /// Intensity residual of the predicted training fields per outer iteration.
    pub fit_residuals: Vec<f64>,
    /// Retrieved training-window fields, one per tributary.
    pub ts_fields: Vec<Vec<C<T>>>,
    /// First trace sample of the training window.
    pub ts_window_start: usize,
    /// First outer iteration (1-based) meeting the tolerance.
    pub converged_at: Option<usize>,
}

/// Training-window sample range `[start, start + len)` for a receiver lag.
pub fn ts_window(frame: &MdmFrame, sps: usize, lag: isize, n: usize) -> (usize, usize) {
    let start = (frame.layout.ts_start as isize * sps as isize + lag).rem_euclid(n as isize) as usize;
    (start, frame.spec.ts_length * sps)
}

/// Lag (samples) maximising the normalised circular cross-correlation between
/// each direct capture and `reference` (the channel-free training intensity).
pub fn time_align<T: Real>(capture: &IntensityCapture<T>, reference: &[T]) -> Result<Vec<isize>> {
    Ok(time_align_scored(capture, reference)?.into_iter().map(|(l, _)| l).collect())
}

/// [`time_align`] plus the normalised correlation at each chosen lag.
pub fn time_align_scored<T: Real>(capture: &IntensityCapture<T>, reference: &[T]) -> Result<Vec<(isize, f64)>> {
    let n = reference.len();
    if capture.direct.iter().any(|d| d.len() != n) {
        return Err(Error::Shape("reference and capture lengths differ".into()));
    }
    let (r, r_norm) = centred_spectrum(reference);
    Ok(capture
        .direct
        .iter()
        .map(|d| {
            let (s, s_norm) = centred_spectrum(d);
            let mut c: Vec<C<T>> = r.iter().zip(&s).map(|(a, b)| a.conj() * *b).collect();
            fft_inverse(&mut c);
            let best = (0..n)
                .max_by(|&a, &b| c[a].re.partial_cmp(&c[b].re).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(&a)))
                .unwrap_or(0);
            let denom = r_norm * s_norm;
            let score = if denom > 0.0 { c[best].re.as_f64() / denom } else { 0.0 };
            let lag = if best > n / 2 { best as isize - n as isize } else { best as isize };
            (lag, score)
        })
        .collect())
}

/// Spectrum of the mean-removed trace and its time-domain norm.
fn centred_spectrum<T: Real>(x: &[T]) -> (Vec<C<T>>, f64) {
    let n = x.len();
    let mean = x.iter().map(|v| v.as_f64()).sum::<f64>() / n as f64;
    let norm = x.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>().sqrt();
    let mut s: Vec<C<T>> = x.iter().map(|&v| C::new(T::lit(v.as_f64() - mean), T::zero())).collect();
    fft_forward(&mut s);
    (s, norm)
}

/// Alignment when the span dispersion is unknown: the training reference is
/// dispersed by each candidate (ps/nm) and the candidate with the strongest
/// mean normalised correlation wins. Returns the lags and that candidate.
pub fn align_with_cd_search<T: Real>(
    capture: &IntensityCapture<T>,
    frame: &MdmFrame,
    candidates_psnm: &[f64],
) -> Result<(Vec<isize>, f64)> {
    let grid = capture.grid;
    let ts = training_only(frame, &grid)?;
    let mut best: Option<(f64, Vec<isize>, f64)> = None;
    for &psnm in candidates_psnm.iter().chain(candidates_psnm.is_empty().then_some(&0.0)) {
        let d = DispersionOperator::for_grid(psnm, &grid);
        let mut reference = vec![T::zero(); grid.n_samples];
        for t in ts.tributaries() {
            let y = apply_dispersion(t, &d);
            reference.iter_mut().zip(y.samples()).for_each(|(a, v)| *a += v.norm_sqr());
        }
        let scored = time_align_scored(capture, &reference)?;
        let mean = scored.iter().map(|s| s.1).sum::<f64>() / scored.len().max(1) as f64;
        if best.as_ref().map_or(true, |b| mean > b.0) {
            best = Some((mean, scored.into_iter().map(|s| s.0).collect(), psnm));
        }
    }
    let (_, lags, psnm) = best.expect("at least one candidate");
    Ok((lags, psnm))
}

fn training_only<T: Real>(frame: &MdmFrame, grid: &SignalGrid) -> Result<MdmWaveform<T>> {
    let mut ts_only = frame.clone();
    let l = frame.layout;
    for row in &mut ts_only.tributaries {
        for (i, v) in row.iter_mut().enumerate() {
            if i < l.ts_start || i >= l.ts_end {
                *v = C::new(0.0, 0.0);
            }
        }
    }
    shape_frame::<T>(&ts_only, grid)
}

/// Median of the per-tributary lags.
pub fn common_lag(lags: &[isize]) -> isize {
    let mut v = lags.to_vec();
    v.sort_unstable();
    v.get(v.len() / 2).copied().unwrap_or(0)
}

/// Channel-free training intensity `Σ_j |x_j|²` of the frame, with every
/// symbol outside the training sequence zeroed.
pub fn training_intensity<T: Real>(frame: &MdmFrame, grid: &SignalGrid) -> Result<Vec<T>> {
    let x = training_only::<T>(frame, grid)?;
    let mut acc = vec![T::zero(); grid.n_samples];
    for t in x.tributaries() {
        acc.iter_mut().zip(t.samples()).for_each(|(a, v)| *a += v.norm_sqr());
    }
    Ok(acc)
}

fn initial_taps<T: Real>(opts: &EstimatorOptions, k: usize, l: usize, grid: SignalGrid) -> Result<TransferMatrix<T>> {
    let m: CMat<T> = match opts.initial_matrix {
        InitialMatrix::Unitary => haar_unitary(k, &mut seeded_rng(opts.seed, "chanest/initial")),
        InitialMatrix::Identity => CMat::identity(k),
        InitialMatrix::Supplied => {
            let s = opts.supplied_matrix.as_ref().expect("validated");
            if s.k() != k {
                return Err(Error::Shape(format!("supplied matrix is {}×{0}, need {k}×{k}", s.k())));
            }
            let taps = s
                .all_taps()
                .iter()
                .map(|t| {
                    let mut out = vec![czero::<T>(); l];
                    for (i, v) in t.iter().enumerate() {
                        let pos = i as isize - s.origin() as isize + (l / 2) as isize;
                        if (0..l as isize).contains(&pos) {
                            out[pos as usize] = C::new(T::lit(v.re), T::lit(v.im));
                        }
                    }
                    out
                })
                .collect();
            return TransferMatrix::new(k, taps, l / 2, grid, MatrixLabel::EstimateHei);
        }
    };
    Ok(TransferMatrix::centred(&m, l, grid, MatrixLabel::EstimateHei))
}

fn matrix_rows<T: Real>(h: &TransferMatrix<T>) -> Vec<Vec<C<T>>> {
    let k = h.k();
    (0..k)
        .map(|i| (0..k).flat_map(|j| h.taps(i, j).to_vec()).collect())
        .collect()
}

/// Alternates phase retrieval over the training window with the LS channel fit.
///
/// Each outer iteration predicts the received training fields from the
/// current estimate, refines them by a few product-space retrieval steps whose
/// consensus set is the range of the training convolution (so the refined
/// fields are always explainable by some channel), then refits the channel.
pub fn estimate_transfer_matrix<T: Real>(
    capture: &IntensityCapture<T>,
    frame: &MdmFrame,
    opts: &EstimatorOptions,
) -> Result<Estimation<T>> {
    opts.validate()?;
    let grid = capture.grid;
    let sps = grid.samples_per_symbol;
    let n = grid.n_samples;
    let k = frame.k();
    if capture.k() != k {
        return Err(Error::Shape(format!("capture has {} tributaries, frame {k}", capture.k())));
    }
    let l = opts.channel_tap_length;
    if frame.spec.ts_length < k * l {
        return Err(Error::Identifiability(format!(
            "training sequence of {} symbols below K·L_est = {}",
            frame.spec.ts_length,
            k * l
        )));
    }
    let (start, len) = ts_window(frame, sps, opts.lag, n);
    let tx = shape_frame::<T>(frame, &grid)?;
    let ts_start_tx = frame.layout.ts_start * sps;
    let inputs: Vec<Vec<C<T>>> = tx
        .tributaries()
        .iter()
        .map(|t| (0..len).map(|j| t.samples()[(ts_start_tx + j) % n]).collect())
        .collect();
    let fitter = LsFitter::new(&inputs, l, opts.ls_regularization)?;
    let wgrid = SignalGrid { n_samples: len, ..grid };
    let forward = capture.d_operator.transfer::<T>(len, grid.sample_rate());
    let problems: Vec<PhaseProblem<T>> = (0..k)
        .map(|i| {
            let d = capture.calibrated_direct(i);
            let e = capture.calibrated_dispersed(i);
            PhaseProblem::new(
                (0..len).map(|j| d[(start + j) % n]).collect(),
                (0..len).map(|j| e[(start + j) % n]).collect(),
                forward.clone(),
                0..len,
                0..len,
            )
        })
        .collect();
    let settings = RaarSettings {
        iterations: opts.inner_iterations,
        beta: opts.relaxation,
        escape_period: 0,
        escape_strength: 0.3,
        escape_min_improvement: 0.0,
        record_period: opts.inner_iterations.max(1),
        stop_below: None,
    };

    let mut h = initial_taps::<T>(opts, k, l, wgrid)?;
    let mut rows = matrix_rows(&h);
    let mut mdl_history = vec![mdl_of(&h, MdlMode::FrequencyAveraged)];
    let mut fit_residuals = Vec::with_capacity(opts.n_outer_iterations);
    let mut converged_at = None;
    let mut growth = 0;
    let mut fields = Vec::new();
    for it in 1..=opts.n_outer_iterations {
        let refined: Vec<(Vec<C<T>>, f64)> = problems
            .par_iter()
            .zip(rows.par_iter())
            .enumerate()
            .map(|(i, (p, row))| {
                let init = fitter.synthesize(row);
                let mut rng = seeded_rng(opts.seed, &format!("chanest/{it}/{i}"));
                let out = run_raar(p, &fitter, init, &settings, &mut rng);
                let taps = fitter.fit(&out.field);
                let pred = fitter.synthesize(&taps);
                let r = p.residual(&pred);
                (taps, r)
            })
            .collect();
        rows = refined.iter().map(|r| r.0.clone()).collect();
        let res = refined.iter().map(|r| r.1).sum::<f64>() / k as f64;
        h = rows_to_matrix(&rows, l, fitter.origin(), wgrid, MatrixLabel::EstimateHei)?;
        mdl_history.push(mdl_of(&h, MdlMode::FrequencyAveraged));
        if let Some(&prev) = fit_residuals.last() {
            if res > prev * (1.0 + opts.divergence_growth_tolerance) && res > opts.divergence_floor {
                growth += 1;
            } else {
                growth = 0;
            }
        }
        fit_residuals.push(res);
        if !res.is_finite() || growth >= 3 {
            return Err(Error::Diverged {
                iteration: it,
                residuals: fit_residuals,
            });
        }
        if converged_at.is_none() && res < opts.convergence_tolerance {
            converged_at = Some(it);
        }
        if it == opts.n_outer_iterations {
            fields = rows.iter().map(|r| fitter.synthesize(r)).collect();
        }
    }
    Ok(Estimation {
        h: h.with_label(MatrixLabel::FinalEstimate),
        mdl_history,
        fit_residuals,
        ts_fields: fields,
        ts_window_start: start,
        converged_at,
    })
}

/// Transmitted training-window fields (tributaries × samples), as seen by the fit.
pub fn training_fields<T: Real>(frame: &MdmFrame, grid: &SignalGrid) -> Result<MdmWaveform<T>> {
    let tx = shape_frame::<T>(frame, grid)?;
    let sps = grid.samples_per_symbol;
    let len = frame.spec.ts_length * sps;
    let start = frame.layout.ts_start * sps;
    let wgrid = SignalGrid { n_samples: len, ..*grid };
    MdmWaveform::from_samples(
        wgrid,
        tx.tributaries()
            .iter()
            .map(|t| t.samples()[start..start + len].to_vec())
            .collect(),
    )
}
