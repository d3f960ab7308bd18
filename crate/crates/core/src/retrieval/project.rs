use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::{czero, Real, C};
use crate::sigcore::fft::{fft_forward, fft_inverse};
use crate::sigcore::{seeded_rng, ComplexWaveform, DispersionOperator};
use crate::txgen::{matched_symbols_from_spectrum, rrc_filter, shape_spectrum};

/// Replaces magnitudes by `amp`, keeping phases; zero samples get phase 0.
pub(crate) fn magnitude_replace<T: Real>(v: &mut [C<T>], amp: &[T]) {
    for (x, &a) in v.iter_mut().zip(amp) {
        let r = x.norm();
        *x = if r > T::zero() {
            *x * (a / r)
        } else {
            Complex::new(a, T::zero())
        };
    }
}

/// Symbol-domain pilot constraint on a window of `positions.len()` known
/// matched-filter outputs.
///
/// The correction `x + shape(p − mf(x))` restricted to the pilot indices is the
/// orthogonal projection onto `{x : mf(x)_k = p_k}`, because the shaping
/// operator scaled by `1/√sps` is an isometry whose adjoint is `√sps·mf`.
#[derive(Clone, Debug)]
pub struct PilotConstraint<T: Real> {
    sps: usize,
    g: Vec<T>,
    positions: Vec<usize>,
    values: Vec<C<T>>,
    /// Optional common-dispersion transfer; pilots then constrain the
    /// dispersion-compensated field.
    cd: Option<Vec<C<T>>>,
}

impl<T: Real> PilotConstraint<T> {
    pub fn new(
        sps: usize,
        g: Vec<T>,
        pilots: &[(usize, C<T>)],
        cd: Option<Vec<C<T>>>,
    ) -> Result<Self> {
        let n = g.len();
        if sps == 0 || n % sps != 0 {
            return Err(Error::Shape(format!("{n} samples is not a whole number of symbols")));
        }
        if let Some(c) = &cd {
            if c.len() != n {
                return Err(Error::Shape("dispersion transfer length differs from the window".into()));
            }
        }
        let m = n / sps;
        if let Some(&(p, _)) = pilots.iter().find(|(p, _)| *p >= m) {
            return Err(Error::param("pilots", format!("position {p} outside {m} symbols")));
        }
        Ok(Self {
            sps,
            g,
            positions: pilots.iter().map(|p| p.0).collect(),
            values: pilots.iter().map(|p| p.1).collect(),
            cd,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Applies the constraint to a spectrum in place.
    pub(crate) fn apply_spectrum(&self, spec: &mut [C<T>]) {
        if self.positions.is_empty() {
            return;
        }
        if let Some(cd) = &self.cd {
            spec.iter_mut().zip(cd).for_each(|(v, h)| *v = *v * h.conj());
        }
        let a = matched_symbols_from_spectrum(spec, self.sps, &self.g);
        let mut corr = vec![czero::<T>(); a.len()];
        for (&k, &p) in self.positions.iter().zip(&self.values) {
            corr[k] = p - a[k];
        }
        let s = shape_spectrum(&corr, self.sps, &self.g);
        spec.iter_mut().zip(&s).for_each(|(v, c)| *v = *v + *c);
        if let Some(cd) = &self.cd {
            spec.iter_mut().zip(cd).for_each(|(v, h)| *v = *v * *h);
        }
    }

    /// Unit phasor aligning the field's pilot outputs to the pilot values.
    pub(crate) fn anchor_phase(&self, field: &[C<T>]) -> Option<C<T>> {
        if self.positions.is_empty() {
            return None;
        }
        let mut spec = field.to_vec();
        fft_forward(&mut spec);
        if let Some(cd) = &self.cd {
            spec.iter_mut().zip(cd).for_each(|(v, h)| *v = *v * h.conj());
        }
        let a = matched_symbols_from_spectrum(&spec, self.sps, &self.g);
        let acc = self
            .positions
            .iter()
            .zip(&self.values)
            .fold(czero::<T>(), |s, (&k, &p)| s + a[k].conj() * p);
        let r = acc.norm();
        (r > T::zero()).then(|| acc / r)
    }
}

/// Joint constraint of the retrieval: rectangular spectrum, then pilots.
///
/// Both parts are orthogonal projections that commute (the pilot correction
/// is band-limited by the pulse), so the composition is the projection onto
/// their intersection.
#[derive(Clone, Debug)]
pub struct FieldConstraint<T: Real> {
    pub mask: Option<Vec<bool>>,
    pub pilots: Option<PilotConstraint<T>>,
}

impl<T: Real> FieldConstraint<T> {
    pub fn none() -> Self {
        Self {
            mask: None,
            pilots: None,
        }
    }
}

/// Constraint applied to the averaged product-space iterate.
pub trait Consensus<T: Real>: Sync {
    fn project(&self, v: &mut [C<T>]);
}

impl<T: Real> Consensus<T> for FieldConstraint<T> {
    fn project(&self, v: &mut [C<T>]) {
        if self.mask.is_none() && self.pilots.is_none() {
            return;
        }
        fft_forward(v);
        if let Some(mask) = &self.mask {
            v.iter_mut().zip(mask).filter(|(_, &m)| !m).for_each(|(x, _)| *x = czero());
        }
        if let Some(p) = &self.pilots {
            p.apply_spectrum(v);
        }
        fft_inverse(v);
    }
}

/// Magnitude replacement: `|out| = √target`, phase kept (phase 0 where `x = 0`).
pub fn project_intensity<T: Real>(x: &ComplexWaveform<T>, target: &[T]) -> Result<ComplexWaveform<T>> {
    if target.len() != x.len() {
        return Err(Error::Shape(format!("{} targets for {} samples", target.len(), x.len())));
    }
    if target.iter().any(|&t| !(t >= T::zero())) {
        return Err(Error::param("target", "intensities must be ≥ 0"));
    }
    let amp: Vec<T> = target.iter().map(|t| t.sqrt()).collect();
    let mut s = x.samples().to_vec();
    magnitude_replace(&mut s, &amp);
    Ok(ComplexWaveform::from_parts(*x.grid(), s))
}

/// Zeroes every bin outside `mask`.
pub fn project_spectrum<T: Real>(x: &ComplexWaveform<T>, mask: &[bool]) -> Result<ComplexWaveform<T>> {
    if mask.len() != x.len() {
        return Err(Error::Shape(format!("mask of {} bins for {} samples", mask.len(), x.len())));
    }
    let c = FieldConstraint {
        mask: Some(mask.to_vec()),
        pilots: None,
    };
    let mut s = x.samples().to_vec();
    c.project(&mut s);
    Ok(ComplexWaveform::from_parts(*x.grid(), s))
}

/// Forces the matched-filter outputs at the pilot symbol positions to the
/// pilot values, with the minimum-norm change to the waveform.
pub fn apply_pilot_constraint<T: Real>(
    x: &ComplexWaveform<T>,
    pilots: &[(usize, C<T>)],
) -> Result<ComplexWaveform<T>> {
    let grid = *x.grid();
    let p = PilotConstraint::new(grid.samples_per_symbol, rrc_filter(x.len(), &grid), pilots, None)?;
    let mut s = x.samples().to_vec();
    fft_forward(&mut s);
    p.apply_spectrum(&mut s);
    fft_inverse(&mut s);
    Ok(ComplexWaveform::from_parts(grid, s))
}

/// One plain Gerchberg–Saxton cycle: direct magnitude, forward dispersion,
/// dispersed magnitude, backward dispersion, spectrum, pilots.
pub fn gs_iterate<T: Real>(
    state: &ComplexWaveform<T>,
    direct: &[T],
    dispersed: &[T],
    d: &DispersionOperator,
    constraint: &FieldConstraint<T>,
) -> Result<ComplexWaveform<T>> {
    let n = state.len();
    if direct.len() != n || dispersed.len() != n {
        return Err(Error::Shape("capture and state lengths differ".into()));
    }
    let grid = *state.grid();
    let fwd = d.transfer::<T>(n, grid.sample_rate());
    let a1: Vec<T> = direct.iter().map(|t| t.sqrt()).collect();
    let a2: Vec<T> = dispersed.iter().map(|t| t.sqrt()).collect();
    let mut s = state.samples().to_vec();
    magnitude_replace(&mut s, &a1);
    fft_forward(&mut s);
    s.iter_mut().zip(&fwd).for_each(|(v, h)| *v = *v * *h);
    fft_inverse(&mut s);
    magnitude_replace(&mut s, &a2);
    fft_forward(&mut s);
    s.iter_mut().zip(&fwd).for_each(|(v, h)| *v = *v * h.conj());
    fft_inverse(&mut s);
    constraint.project(&mut s);
    Ok(ComplexWaveform::from_parts(grid, s))
}

/// Normalised intensity mismatch, averaged over both captures.
pub fn intensity_residual<T: Real>(
    field: &[C<T>],
    direct: &[T],
    dispersed: &[T],
    d: &DispersionOperator,
    sample_rate: f64,
) -> f64 {
    let n = field.len();
    let mut z = field.to_vec();
    if !d.is_identity() {
        let fwd = d.transfer::<T>(n, sample_rate);
        fft_forward(&mut z);
        z.iter_mut().zip(&fwd).for_each(|(v, h)| *v = *v * *h);
        fft_inverse(&mut z);
    }
    (normalised_error(field, direct, 0..n) + normalised_error(&z, dispersed, 0..n)) / 2.0
}

pub(crate) fn normalised_error<T: Real>(y: &[C<T>], target: &[T], r: std::ops::Range<usize>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in r {
        let t = target[k].as_f64();
        let e = y[k].norm_sqr().as_f64() - t;
        num += e * e;
        den += t * t;
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        num / den
    }
}

/// Multiplies every sample by `exp(jφ[n])`, `φ ~ N(0, strength²)`.
pub fn escape_local_minimum<T: Real>(
    state: &ComplexWaveform<T>,
    strength: f64,
    seed: u64,
) -> Result<ComplexWaveform<T>> {
    if !(strength > 0.0 && strength.is_finite()) {
        return Err(Error::param("strength", "must be finite and > 0"));
    }
    let mut s = state.samples().to_vec();
    let mut rng = seeded_rng(seed, "retrieval/escape");
    phase_kick(&mut [&mut s], strength, &mut rng);
    Ok(ComplexWaveform::from_parts(*state.grid(), s))
}

/// Applies one random phase profile to every buffer.
pub(crate) fn phase_kick<T: Real, R: Rng>(bufs: &mut [&mut Vec<C<T>>], strength: f64, rng: &mut R) {
    let n = bufs[0].len();
    for k in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let a = strength * z;
        let rot = Complex::new(T::lit(a.cos()), T::lit(a.sin()));
        for b in bufs.iter_mut() {
            b[k] = b[k] * rot;
        }
    }
}
