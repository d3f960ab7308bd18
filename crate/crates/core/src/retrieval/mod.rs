//! Field recovery from the direct and dispersed intensity captures.
//!
//! Each block of the trace is solved independently by relaxed averaged
//! alternating reflections between the two magnitude constraints and the
//! spectral/pilot constraint, with periodic phase-kick escapes, several random
//! starts per round and extra rounds while the residual stays high.

mod engine;
mod project;

use std::io::Write;

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use engine::{run_raar, PhaseProblem, RaarOutcome, RaarSettings};
pub use project::{
    apply_pilot_constraint, escape_local_minimum, gs_iterate, intensity_residual,
    project_intensity, project_spectrum, Consensus, FieldConstraint, PilotConstraint,
};

use crate::error::{Error, Result};
use crate::frontend::IntensityCapture;
use crate::scalar::{czero, Real, C};
use crate::sigcore::{in_band_mask, seeded_rng, ComplexWaveform, DispersionOperator, SignalGrid};
use crate::txgen::rrc_filter;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalOptions {
    /// Iterations per start.
    pub max_iterations: usize,
    pub escape_period: usize,
    /// Standard deviation of the escape phase kick, rad.
    pub escape_strength: f64,
    pub escape_min_improvement: f64,
    pub n_parallel_inits: usize,
    /// Further rounds of starts while no start meets the threshold.
    pub restart_rounds: usize,
    /// Window length in samples.
    pub block_length: usize,
    /// Samples discarded on each side of a window.
    pub block_overlap: usize,
    /// Window edge (samples) where the dispersed intensity is not enforced.
    pub trusted_margin: usize,
    pub convergence_threshold: f64,
    /// RAAR relaxation.
    pub relaxation: f64,
    pub spectral_mask: bool,
    /// Residual sampling period of the history, iterations.
    pub record_period: usize,
    pub seed: u64,
    /// Receiver-side pilots `(symbol index in the trace, value)`.
    #[serde(skip)]
    pub pilots: Vec<(usize, Complex<f64>)>,
    /// Common dispersion removed before the pilots are compared, ps/nm.
    #[serde(skip)]
    pub pilot_cd_psnm: f64,
    /// Sample range `[start, end)` to recover (may wrap); everything by default.
    #[serde(skip)]
    pub region: Option<(usize, usize)>,
}

impl Default for RetrievalOptions {
    fn default() -> Self {
        Self {
            max_iterations: 600,
            escape_period: 100,
            escape_strength: 0.3,
            escape_min_improvement: 0.01,
            n_parallel_inits: 2,
            restart_rounds: 6,
            block_length: 1024,
            block_overlap: 128,
            trusted_margin: 16,
            convergence_threshold: 1e-4,
            relaxation: 0.95,
            spectral_mask: true,
            record_period: 10,
            seed: 1,
            pilots: Vec::new(),
            pilot_cd_psnm: 0.0,
            region: None,
        }
    }
}

impl RetrievalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be ≥ 1"));
        }
        if self.n_parallel_inits == 0 {
            return Err(Error::param("n_parallel_inits", "must be ≥ 1"));
        }
        if self.block_overlap == 0 || 2 * self.block_overlap >= self.block_length {
            return Err(Error::param(
                "block_overlap",
                format!("need 0 < 2·overlap < block length {}", self.block_length),
            ));
        }
        if !(self.convergence_threshold > 0.0) {
            return Err(Error::param("convergence_threshold", "must be > 0"));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::param("relaxation", "must lie in (0, 1]"));
        }
        if !(self.escape_strength > 0.0) {
            return Err(Error::param("escape_strength", "must be > 0"));
        }
        if 2 * self.trusted_margin >= self.block_length {
            return Err(Error::param("trusted_margin", "larger than half a block"));
        }
        Ok(())
    }

    fn settings(&self) -> RaarSettings {
        RaarSettings {
            iterations: self.max_iterations,
            beta: self.relaxation,
            escape_period: self.escape_period,
            escape_strength: self.escape_strength,
            escape_min_improvement: self.escape_min_improvement,
            record_period: self.record_period,
            stop_below: Some(self.convergence_threshold),
        }
    }
}

/// Outcome of one window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockReport {
    /// First kept sample.
    pub start: usize,
    pub residual: f64,
    pub iterations: usize,
    pub init_index: usize,
    pub n_pilots: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct RetrievalResult<T: Real> {
    /// Recovered field (zero outside the region).
    pub field: ComplexWaveform<T>,
    /// `(iteration, residual)`; block residuals are averaged, finished blocks
    /// hold their final value.
    pub residual_history: Vec<(usize, f64)>,
    pub iterations_used: usize,
    pub init_index_chosen: usize,
    pub blocks: Vec<BlockReport>,
}

impl<T: Real> RetrievalResult<T> {
    /// Mean block residual; equals the last history entry.
    pub fn residual(&self) -> f64 {
        self.residual_history.last().map_or(0.0, |r| r.1)
    }

    pub fn converged(&self) -> bool {
        self.blocks.iter().all(|b| b.converged)
    }

    pub fn write_residual_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,residual")?;
        for (i, r) in &self.residual_history {
            writeln!(w, "{i},{r:e}")?;
        }
        Ok(())
    }
}

struct Window {
    /// Trace sample of window sample 0.
    start: usize,
    /// Kept samples `[keep.0, keep.1)` of the window.
    keep: (usize, usize),
}

struct BlockOut<T: Real> {
    field: Vec<C<T>>,
    report: BlockReport,
    history: Vec<(usize, f64)>,
}

/// Recovers the field of one tributary.
pub fn retrieve<T: Real>(
    capture: &IntensityCapture<T>,
    tributary: usize,
    opts: &RetrievalOptions,
) -> Result<RetrievalResult<T>> {
    opts.validate()?;
    if tributary >= capture.k() {
        return Err(Error::param("tributary", format!("{tributary} ≥ K = {}", capture.k())));
    }
    let grid = capture.grid;
    let direct = capture.calibrated_direct(tributary);
    let dispersed = capture.calibrated_dispersed(tributary);
    let n = direct.len();
    let sps = grid.samples_per_symbol;
    let n_sym = n / sps;

    let mut pilot_at: Vec<Option<C<T>>> = vec![None; n_sym];
    for &(p, v) in &opts.pilots {
        if p >= n_sym {
            return Err(Error::param("pilots", format!("symbol {p} outside {n_sym}")));
        }
        pilot_at[p] = Some(Complex::new(T::lit(v.re), T::lit(v.im)));
    }

    let (windows, w) = plan_windows(n, sps, opts);
    let single = windows.len() == 1 && w == n;
    let margin = if single { 0 } else { opts.trusted_margin };
    let wgrid = SignalGrid { n_samples: w, ..grid };
    let fs = grid.sample_rate();
    let forward = capture.d_operator.transfer::<T>(w, fs);
    let g = rrc_filter::<T>(w, &wgrid);
    let mask = opts
        .spectral_mask
        .then(|| in_band_mask(w, fs, grid.symbol_rate, grid.rolloff));
    let cd = (opts.pilot_cd_psnm != 0.0)
        .then(|| DispersionOperator::for_grid(opts.pilot_cd_psnm, &grid).transfer::<T>(w, fs));
    let settings = opts.settings();

    let outs: Vec<BlockOut<T>> = windows
        .par_iter()
        .enumerate()
        .map(|(b, win)| {
            let idx = |j: usize| (win.start + j) % n;
            let i1: Vec<T> = (0..w).map(|j| direct[idx(j)]).collect();
            let i2: Vec<T> = (0..w).map(|j| dispersed[idx(j)]).collect();
            let scored = if single { 0..w } else { win.keep.0..win.keep.1 };
            let problem = PhaseProblem::new(i1, i2, forward.clone(), margin..w - margin, scored);
            let (lo, hi) = (margin / 2, w / sps - margin / 2);
            let pilots: Vec<(usize, C<T>)> = (lo..hi)
                .filter_map(|k| pilot_at[idx(sps * k) / sps].map(|v| (k, v)))
                .collect();
            let pc = (!pilots.is_empty())
                .then(|| PilotConstraint::new(sps, g.clone(), &pilots, cd.clone()))
                .transpose()?;
            let constraint = FieldConstraint {
                mask: mask.clone(),
                pilots: pc,
            };
            let out = solve_window(&problem, &constraint, &settings, opts, tributary, b);
            Ok(BlockOut {
                report: BlockReport {
                    start: idx(win.keep.0),
                    residual: out.1.residual,
                    iterations: out.1.iterations,
                    init_index: out.0,
                    n_pilots: pilots.len(),
                    converged: out.1.residual < opts.convergence_threshold,
                },
                history: out.1.history,
                field: out.1.field,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut field = vec![czero::<T>(); n];
    let mut prev: Option<usize> = None;
    for (b, (win, out)) in windows.iter().zip(&outs).enumerate() {
        let idx = |j: usize| (win.start + j) % n;
        let mut y = out.field.clone();
        if out.report.n_pilots == 0 {
            if let Some(p) = prev {
                // phase continuity with the previous block over the shared samples
                let pw = &windows[p];
                let shared: Vec<usize> = (0..win.keep.0)
                    .filter(|&j| {
                        let t = idx(j);
                        let off = (t + n - pw.start) % n;
                        off >= pw.keep.0 && off < pw.keep.1
                    })
                    .collect();
                let acc = shared
                    .iter()
                    .fold(czero::<T>(), |s, &j| s + y[j].conj() * field[idx(j)]);
                let r = acc.norm();
                if r > T::zero() {
                    let rot = acc / r;
                    y.iter_mut().for_each(|v| *v = *v * rot);
                }
            }
        }
        for j in win.keep.0..win.keep.1 {
            field[idx(j)] = y[j];
        }
        prev = Some(b);
    }

    let history = merge_histories(outs.iter().map(|o| &o.history).collect());
    Ok(RetrievalResult {
        field: ComplexWaveform::new(grid, field)?,
        residual_history: history,
        iterations_used: outs.iter().map(|o| o.report.iterations).max().unwrap_or(0),
        init_index_chosen: outs.first().map_or(0, |o| o.report.init_index),
        blocks: outs.into_iter().map(|o| o.report).collect(),
    })
}

fn plan_windows(n: usize, sps: usize, opts: &RetrievalOptions) -> (Vec<Window>, usize) {
    let (rs, re) = opts.region.unwrap_or((0, n));
    let rs_al = rs - rs % sps;
    let len = if re > rs_al { re - rs_al } else { re + n - rs_al }.min(n);
    if opts.block_length >= n || len == 0 {
        return (
            vec![Window {
                start: 0,
                keep: (0, n),
            }],
            n,
        );
    }
    let w = opts.block_length;
    let p = opts.block_overlap - opts.block_overlap % sps;
    let b = w - 2 * p;
    let count = len.div_ceil(b);
    let windows = (0..count)
        .map(|i| {
            let kept = (len - i * b).min(b);
            Window {
                start: (rs_al + i * b + n - p) % n,
                keep: (p, p + kept),
            }
        })
        .collect();
    (windows, w)
}

/// Rounds of parallel starts; lowest residual wins, ties by start index.
fn solve_window<T: Real>(
    problem: &PhaseProblem<T>,
    constraint: &FieldConstraint<T>,
    settings: &RaarSettings,
    opts: &RetrievalOptions,
    tributary: usize,
    block: usize,
) -> (usize, RaarOutcome<T>) {
    let w = problem.len();
    if problem.direct.iter().all(|v| *v == T::zero()) && problem.dispersed.iter().all(|v| *v == T::zero()) {
        return (
            0,
            RaarOutcome {
                field: vec![czero(); w],
                residual: 0.0,
                history: vec![(0, 0.0)],
                iterations: 0,
                escapes: 0,
            },
        );
    }
    let mut best: Option<(usize, RaarOutcome<T>)> = None;
    for round in 0..=opts.restart_rounds {
        let outs: Vec<(usize, RaarOutcome<T>)> = (0..opts.n_parallel_inits)
            .into_par_iter()
            .map(|i| {
                let index = round * opts.n_parallel_inits + i;
                let mut rng = seeded_rng(opts.seed, &format!("retrieval/{tributary}/{block}/{index}"));
                let init: Vec<C<T>> = problem
                    .amp_direct()
                    .iter()
                    .map(|&a| {
                        let ph: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
                        Complex::new(a * T::lit(ph.cos()), a * T::lit(ph.sin()))
                    })
                    .collect();
                let mut out = run_raar(problem, constraint, init, settings, &mut rng);
                if let Some(rot) = constraint.pilots.as_ref().and_then(|p| p.anchor_phase(&out.field)) {
                    out.field.iter_mut().for_each(|v| *v = *v * rot);
                }
                (index, out)
            })
            .collect();
        for (i, o) in outs {
            if best.as_ref().map_or(true, |b| o.residual < b.1.residual) {
                best = Some((i, o));
            }
        }
        if best.as_ref().is_some_and(|b| b.1.residual < opts.convergence_threshold) {
            break;
        }
    }
    best.expect("at least one start")
}

fn merge_histories(hs: Vec<&Vec<(usize, f64)>>) -> Vec<(usize, f64)> {
    let mut steps: Vec<usize> = hs.iter().flat_map(|h| h.iter().map(|x| x.0)).collect();
    steps.sort_unstable();
    steps.dedup();
    if hs.is_empty() {
        return vec![(0, 0.0)];
    }
    steps
        .into_iter()
        .map(|s| {
            let sum: f64 = hs
                .iter()
                .map(|h| {
                    h.iter()
                        .take_while(|x| x.0 <= s)
                        .last()
                        .or(h.first())
                        .map_or(0.0, |x| x.1)
                })
                .sum();
            (s, sum / hs.len() as f64)
        })
        .collect()
}
