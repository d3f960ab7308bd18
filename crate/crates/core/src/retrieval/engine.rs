//! Relaxed averaged alternating reflections in the product space of the two
//! intensity measurements.
//!
//! The iterate is a pair `(u1, u2)`, one copy per measurement. `P_M` replaces
//! the magnitudes of `u1` (direct) and of `D·u2` (dispersed); `P_C` averages
//! the copies, applies the consensus constraint and duplicates the result.

use std::ops::Range;

use rand::Rng;

use super::project::{magnitude_replace, normalised_error, phase_kick, Consensus};
use crate::scalar::{Real, C};
use crate::sigcore::fft::{fft_forward, fft_inverse};

/// One window of measurements.
pub struct PhaseProblem<T: Real> {
    pub direct: Vec<T>,
    pub dispersed: Vec<T>,
    amp_direct: Vec<T>,
    amp_dispersed: Vec<T>,
    /// Dispersion transfer on the window grid.
    forward: Vec<C<T>>,
    /// Samples where the dispersed intensity is enforced.
    pub trusted: Range<usize>,
    /// Samples scored by the residual.
    pub scored: Range<usize>,
}

impl<T: Real> PhaseProblem<T> {
    pub fn new(direct: Vec<T>, dispersed: Vec<T>, forward: Vec<C<T>>, trusted: Range<usize>, scored: Range<usize>) -> Self {
        let amp_direct = direct.iter().map(|v| v.max(T::zero()).sqrt()).collect();
        let amp_dispersed = dispersed.iter().map(|v| v.max(T::zero()).sqrt()).collect();
        Self {
            direct,
            dispersed,
            amp_direct,
            amp_dispersed,
            forward,
            trusted,
            scored,
        }
    }

    pub fn len(&self) -> usize {
        self.direct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.direct.is_empty()
    }

    pub fn amp_direct(&self) -> &[T] {
        &self.amp_direct
    }

    fn disperse(&self, v: &mut [C<T>], backward: bool) {
        fft_forward(v);
        if backward {
            v.iter_mut().zip(&self.forward).for_each(|(x, h)| *x = *x * h.conj());
        } else {
            v.iter_mut().zip(&self.forward).for_each(|(x, h)| *x = *x * *h);
        }
        fft_inverse(v);
    }

    fn project_measurements(&self, u1: &[C<T>], u2: &[C<T>]) -> (Vec<C<T>>, Vec<C<T>>) {
        let mut m1 = u1.to_vec();
        magnitude_replace(&mut m1, &self.amp_direct);
        let mut z = u2.to_vec();
        self.disperse(&mut z, false);
        let r = self.trusted.clone();
        magnitude_replace(&mut z[r.clone()], &self.amp_dispersed[r]);
        self.disperse(&mut z, true);
        (m1, z)
    }

    /// Residual of a single field over the scored samples.
    pub fn residual(&self, y: &[C<T>]) -> f64 {
        let mut z = y.to_vec();
        self.disperse(&mut z, false);
        let r = self.scored.clone();
        (normalised_error(y, &self.direct, r.clone()) + normalised_error(&z, &self.dispersed, r)) / 2.0
    }
}

#[derive(Clone, Debug)]
pub struct RaarSettings {
    pub iterations: usize,
    pub beta: f64,
    /// 0 disables the escape.
    pub escape_period: usize,
    pub escape_strength: f64,
    /// Relative improvement over one escape period below which the kick fires.
    pub escape_min_improvement: f64,
    pub record_period: usize,
    /// Stops once the residual is below this value and has stalled.
    pub stop_below: Option<f64>,
}

pub struct RaarOutcome<T: Real> {
    pub field: Vec<C<T>>,
    pub residual: f64,
    /// `(iteration, residual)` samples.
    pub history: Vec<(usize, f64)>,
    pub iterations: usize,
    pub escapes: usize,
}

fn estimate<T: Real, P: Consensus<T> + ?Sized>(p: &PhaseProblem<T>, c: &P, u1: &[C<T>], u2: &[C<T>]) -> Vec<C<T>> {
    let (m1, m2) = p.project_measurements(u1, u2);
    let mut v: Vec<C<T>> = m1.iter().zip(&m2).map(|(a, b)| (*a + *b) * T::lit(0.5)).collect();
    c.project(&mut v);
    v
}

/// Runs RAAR from `init` and returns the consensus estimate `P_C(P_M(u))`.
pub fn run_raar<T: Real, P: Consensus<T> + ?Sized, R: Rng>(
    problem: &PhaseProblem<T>,
    consensus: &P,
    init: Vec<C<T>>,
    s: &RaarSettings,
    rng: &mut R,
) -> RaarOutcome<T> {
    let beta = T::lit(s.beta);
    let half_beta = beta * T::lit(0.5);
    let one_minus = T::one() - beta;
    let two = T::lit(2.0);
    let mut u1 = init.clone();
    let mut u2 = init;
    let record = s.record_period.max(1);
    let mut history = Vec::new();
    let mut last_check = f64::INFINITY;
    let mut escapes = 0;
    let mut it = 0;
    let mut stop_prev = f64::INFINITY;
    while it < s.iterations {
        let (m1, m2) = problem.project_measurements(&u1, &u2);
        let mut c: Vec<C<T>> = m1
            .iter()
            .zip(&m2)
            .zip(u1.iter().zip(&u2))
            .map(|((a, b), (x, y))| ((*a * two - *x) + (*b * two - *y)) * T::lit(0.5))
            .collect();
        consensus.project(&mut c);
        for k in 0..u1.len() {
            let r1 = m1[k] * two - u1[k];
            let r2 = m2[k] * two - u2[k];
            u1[k] = (c[k] * two - r1 + u1[k]) * half_beta + m1[k] * one_minus;
            u2[k] = (c[k] * two - r2 + u2[k]) * half_beta + m2[k] * one_minus;
        }
        it += 1;
        let check_escape = s.escape_period > 0 && it % s.escape_period == 0;
        if it % record == 0 || check_escape || it == s.iterations {
            let r = problem.residual(&estimate(problem, consensus, &u1, &u2));
            if it % record == 0 || it == s.iterations {
                history.push((it, r));
            }
            if check_escape {
                let improvement = if last_check.is_finite() && last_check > 0.0 {
                    (last_check - r) / last_check
                } else {
                    1.0
                };
                if let Some(th) = s.stop_below {
                    if r < th && (stop_prev - r) / stop_prev.max(f64::MIN_POSITIVE) < s.escape_min_improvement {
                        break;
                    }
                    stop_prev = r;
                }
                if improvement < s.escape_min_improvement && s.stop_below.map_or(true, |th| r >= th) {
                    phase_kick(&mut [&mut u1, &mut u2], s.escape_strength, rng);
                    escapes += 1;
                }
                last_check = r;
            }
        }
    }
    let field = estimate(problem, consensus, &u1, &u2);
    let residual = problem.residual(&field);
    match history.last_mut() {
        Some(last) if last.0 == it => last.1 = residual,
        _ => history.push((it, residual)),
    }
    RaarOutcome {
        field,
        residual,
        history,
        iterations: it,
        escapes,
    }
}
