//! Frame layout per tributary (symbol indices):
//!
//! ```text
//! | CP (guard) | training sequence | CS (guard) | payload (pilot groups) | tail |
//! ```
//!
//! The guards are cyclic copies of the training sequence so that the training
//! window is circularly consistent after any channel shorter than the guard.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::qpsk::{map_qpsk, Prbs11};
use crate::error::{Error, Result};
use crate::scalar::C;
use crate::sigcore::fft::{fft_forward, fft_inverse};
use crate::sigcore::seeded_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameSpec {
    /// Training-sequence symbols.
    pub ts_length: usize,
    /// Payload symbols (pilots included).
    pub payload_length: usize,
    /// Fraction of payload symbols that are pilots, in (0, 1].
    pub pilot_percentage: f64,
    /// Contiguous pilot symbols per group (`M`).
    pub pilot_group_size: usize,
    /// Cyclic guard on each side of the training sequence, in symbols.
    pub guard_length: usize,
    /// Circular offset of the payload data between consecutive tributaries, in symbols.
    pub decorrelation_delay: usize,
    /// Total frame symbols; the smallest power of two holding the content when absent.
    pub total_symbols: Option<usize>,
    pub seed: u64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            ts_length: 2048,
            payload_length: 1 << 14,
            pilot_percentage: 0.2,
            pilot_group_size: 1,
            guard_length: 64,
            decorrelation_delay: 128,
            total_symbols: None,
            seed: 1,
        }
    }
}

/// Symbol-index boundaries of a frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLayout {
    pub ts_start: usize,
    pub ts_end: usize,
    pub payload_start: usize,
    pub payload_end: usize,
    pub total: usize,
}

impl FrameSpec {
    pub fn content_symbols(&self) -> usize {
        2 * self.guard_length + self.ts_length + self.payload_length
    }

    pub fn n_groups(&self) -> usize {
        let m = self.pilot_group_size.max(1);
        ((self.pilot_percentage * self.payload_length as f64) / m as f64 + 1e-9).floor() as usize
    }

    pub fn layout(&self) -> Result<FrameLayout> {
        let content = self.content_symbols();
        let total = match self.total_symbols {
            Some(t) => t,
            None => content.next_power_of_two(),
        };
        if total < content {
            return Err(Error::Frame(format!(
                "total of {total} symbols cannot hold {content} symbols of content"
            )));
        }
        let ts_start = self.guard_length;
        let ts_end = ts_start + self.ts_length;
        let payload_start = ts_end + self.guard_length;
        Ok(FrameLayout {
            ts_start,
            ts_end,
            payload_start,
            payload_end: payload_start + self.payload_length,
            total,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.ts_length == 0 || self.payload_length == 0 {
            return Err(Error::Frame("training sequence and payload must be non-empty".into()));
        }
        if self.pilot_group_size == 0 {
            return Err(Error::Frame("pilot group size must be at least 1".into()));
        }
        if !(self.pilot_percentage > 0.0 && self.pilot_percentage <= 1.0) {
            return Err(Error::Frame(format!(
                "pilot percentage must lie in (0, 1], got {}",
                self.pilot_percentage
            )));
        }
        if self.n_groups() == 0 {
            return Err(Error::Frame(format!(
                "{} of {} payload symbols gives no full group of {}",
                self.pilot_percentage, self.payload_length, self.pilot_group_size
            )));
        }
        if self.guard_length > self.ts_length {
            return Err(Error::Frame("guard longer than the training sequence".into()));
        }
        self.layout().map(|_| ())
    }

    /// Evenly spaced groups; the first starts at the first payload symbol.
    pub fn pilot_positions(&self) -> Result<Vec<(usize, usize)>> {
        self.validate()?;
        let l = self.layout()?;
        let ng = self.n_groups();
        let m = self.pilot_group_size;
        let p = self.payload_length;
        let mut out = Vec::with_capacity(ng * m);
        for g in 0..ng {
            let start = l.payload_start + g * p / ng;
            for j in 0..m {
                out.push((start + j, g));
            }
        }
        Ok(out)
    }
}

/// Transmitted symbols of all tributaries plus the bookkeeping the receiver shares.
#[derive(Clone, Debug, PartialEq)]
pub struct MdmFrame {
    pub spec: FrameSpec,
    pub layout: FrameLayout,
    /// K × total symbols.
    pub tributaries: Vec<Vec<C<f64>>>,
    /// `(symbol position, group id)`, identical for every tributary.
    pub pilot_index_table: Vec<(usize, usize)>,
    /// K training sequences.
    pub ts_symbols: Vec<Vec<C<f64>>>,
}

impl MdmFrame {
    pub fn k(&self) -> usize {
        self.tributaries.len()
    }

    pub fn total_symbols(&self) -> usize {
        self.layout.total
    }

    /// Pilot positions of one tributary (shared geometry).
    pub fn pilot_table(&self, _tributary: usize) -> &[(usize, usize)] {
        &self.pilot_index_table
    }

    /// `(position, symbol)` for the pilots of `tributary`.
    pub fn pilot_symbols(&self, tributary: usize) -> Vec<(usize, C<f64>)> {
        self.pilot_index_table
            .iter()
            .map(|&(p, _)| (p, self.tributaries[tributary][p]))
            .collect()
    }

    /// True for payload positions that carry data (not pilots).
    pub fn data_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.layout.total];
        mask[self.layout.payload_start..self.layout.payload_end]
            .iter_mut()
            .for_each(|m| *m = true);
        for &(p, _) in &self.pilot_index_table {
            mask[p] = false;
        }
        mask
    }

    pub fn n_groups(&self) -> usize {
        self.pilot_index_table.last().map_or(0, |&(_, g)| g + 1)
    }
}

fn random_qpsk<R: Rng>(rng: &mut R, n: usize) -> Vec<C<f64>> {
    let bits: Vec<u8> = (0..2 * n).map(|_| rng.gen_range(0..2u8)).collect();
    map_qpsk(&bits).expect("even bit count")
}

/// Largest normalised circular cross-correlation magnitude over all lags.
pub fn max_cross_correlation(a: &[C<f64>], b: &[C<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len().next_power_of_two() * 2;
    let mut fa = a.to_vec();
    fa.resize(n, Complex::new(0.0, 0.0));
    let mut fb = b.to_vec();
    fb.resize(n, Complex::new(0.0, 0.0));
    // circular correlation over the sequence period: fold the linear result.
    fft_forward(&mut fa);
    fft_forward(&mut fb);
    let mut x: Vec<C<f64>> = fa.iter().zip(&fb).map(|(p, q)| p * q.conj()).collect();
    fft_inverse(&mut x);
    let len = a.len();
    let ea = a.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let eb = b.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let norm = (ea * eb).sqrt();
    (0..len)
        .map(|lag| {
            let lin = x[lag] + if lag == 0 { Complex::new(0.0, 0.0) } else { x[n - len + lag] };
            lin.norm() / norm
        })
        .fold(0.0, f64::max)
}

/// Builds the K-tributary frame.
///
/// Payload data is a PRBS-11 stream whose copies are circularly offset by
/// `decorrelation_delay` symbols per tributary; training sequences, pilots
/// and tail are independent seeded QPSK per tributary.
pub fn build_frame(spec: &FrameSpec, k: usize) -> Result<MdmFrame> {
    if k == 0 {
        return Err(Error::param("k", "at least one tributary"));
    }
    spec.validate()?;
    let layout = spec.layout()?;
    let pilots = spec.pilot_positions()?;

    let mut state_rng = seeded_rng(spec.seed, "frame/prbs-state");
    let state: u16 = state_rng.gen_range(1..0x800);
    let prbs_bits: Vec<u8> = Prbs11::new(state).take(2 * spec.payload_length).collect();
    let base_data = map_qpsk::<f64>(&prbs_bits)?;

    let mut ts_symbols = Vec::with_capacity(k);
    for i in 0..k {
        let mut attempt = 0u32;
        loop {
            let mut rng = seeded_rng(spec.seed, &format!("frame/ts/{i}/{attempt}"));
            let cand = random_qpsk(&mut rng, spec.ts_length);
            let ok = ts_symbols
                .iter()
                .all(|prev: &Vec<C<f64>>| max_cross_correlation(prev, &cand) < 0.2);
            if ok || attempt >= 64 {
                ts_symbols.push(cand);
                break;
            }
            attempt += 1;
        }
    }

    let mut tributaries = Vec::with_capacity(k);
    for (i, ts) in ts_symbols.iter().enumerate() {
        let mut s = vec![Complex::new(0.0, 0.0); layout.total];
        let g = spec.guard_length;
        let n = spec.ts_length;
        s[layout.ts_start..layout.ts_end].copy_from_slice(ts);
        s[..g].copy_from_slice(&ts[n - g..]);
        s[layout.ts_end..layout.ts_end + g].copy_from_slice(&ts[..g]);

        let shift = (i * spec.decorrelation_delay) % spec.payload_length;
        for j in 0..spec.payload_length {
            s[layout.payload_start + j] =
                base_data[(j + spec.payload_length - shift) % spec.payload_length];
        }

        let mut prng = seeded_rng(spec.seed, &format!("frame/pilots/{i}"));
        let pv = random_qpsk(&mut prng, pilots.len());
        for (&(p, _), v) in pilots.iter().zip(pv) {
            s[p] = v;
        }

        let tail_len = layout.total - layout.payload_end;
        let mut trng = seeded_rng(spec.seed, &format!("frame/tail/{i}"));
        s[layout.payload_end..].copy_from_slice(&random_qpsk(&mut trng, tail_len));
        tributaries.push(s);
    }

    Ok(MdmFrame {
        spec: spec.clone(),
        layout,
        tributaries,
        pilot_index_table: pilots,
        ts_symbols,
    })
}
