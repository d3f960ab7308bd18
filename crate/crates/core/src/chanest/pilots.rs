use num_complex::Complex;

use super::split::DispersionSplit;
use crate::error::{Error, Result};
use crate::scalar::{czero, Real, C};
use crate::sigcore::SignalGrid;
use crate::txgen::{matched_symbols_from_spectrum, rrc_filter, shape_spectrum, MdmFrame};

/// Receiver-side pilot values per tributary, `(symbol index, value)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotTable {
    pub tributaries: Vec<Vec<(usize, Complex<f64>)>>,
    /// Receiver positions are the transmit positions shifted by this many symbols.
    pub shift_symbols: isize,
    /// Fraction of the symbol-spaced response energy that pilot symbols
    /// alone account for at the kept positions (1 = exact pilot values).
    pub coverage: f64,
}

/// Symbol-spaced response `r[i][j][d]` of shaping, `h_md` and the matched
/// filter, for `d ∈ [−half, half]`.
fn symbol_response<T: Real>(split: &DispersionSplit<T>, grid: &SignalGrid) -> Result<(Vec<Vec<Vec<Complex<f64>>>>, usize)> {
    let h = &split.h_md;
    let k = h.k();
    let sps = grid.samples_per_symbol;
    let m = (h.tap_len().div_ceil(sps) * 2).next_power_of_two().max(64);
    let n = m * sps;
    let half = m / 2 - 1;
    let wgrid = SignalGrid { n_samples: n, ..*grid };
    let g = rrc_filter::<T>(n, &wgrid);
    let centre = m / 2;
    let mut unit = vec![czero::<T>(); m];
    unit[centre] = C::new(T::one(), T::zero());
    let s = shape_spectrum(&unit, sps, &g);
    let entries = (0..k * k)
        .map(|e| h.entry_response(e / k, e % k, n))
        .collect::<Result<Vec<_>>>()?;
    let mut r = vec![vec![Vec::new(); k]; k];
    for i in 0..k {
        for j in 0..k {
            let spec: Vec<C<T>> = s.iter().zip(&entries[i * k + j]).map(|(a, b)| *a * *b).collect();
            let y = matched_symbols_from_spectrum(&spec, sps, &g);
            r[i][j] = (0..=2 * half)
                .map(|t| {
                    let v = y[centre - half + t];
                    Complex::new(v.re.as_f64(), v.im.as_f64())
                })
                .collect();
        }
    }
    Ok((r, half))
}

/// Forward-propagates each pilot group through `h_md` (never `h_cd`).
///
/// Only the pilot symbols of the group enter, so the values are exact at
/// receiver positions whose channel memory stays inside the group; groups of
/// `M` keep their central `M − 2·⌊(M−1)/2⌋` positions.
pub fn propagate_pilots<T: Real>(frame: &MdmFrame, split: &DispersionSplit<T>, m: usize) -> Result<PilotTable> {
    if m != frame.spec.pilot_group_size {
        return Err(Error::param(
            "m",
            format!("group size {m} differs from the frame's {}", frame.spec.pilot_group_size),
        ));
    }
    let grid = *split.h_md.grid();
    let k = frame.k();
    if split.h_md.k() != k {
        return Err(Error::Shape("modal matrix and frame disagree on K".into()));
    }
    let (r, half) = symbol_response(split, &grid)?;
    let energy: Vec<f64> = (0..=2 * half)
        .map(|d| r.iter().flatten().map(|v| v[d].norm_sqr()).sum())
        .collect();
    let trim = (m - 1) / 2;
    let kept: Vec<isize> = (trim..m - trim).map(|q| q as isize).collect();
    // shift with the most response energy landing on group members
    let covered = |s: isize| -> f64 {
        kept.iter()
            .map(|&q| {
                (0..m as isize)
                    .map(|p| q + s - p + half as isize)
                    .filter(|d| (0..=2 * half as isize).contains(d))
                    .map(|d| energy[d as usize])
                    .sum::<f64>()
            })
            .sum()
    };
    let h = half as isize;
    let shift = (-h..=h)
        .max_by(|&a, &b| covered(a).total_cmp(&covered(b)).then(b.abs().cmp(&a.abs())).then(b.cmp(&a)))
        .unwrap_or(0);
    let total_energy: f64 = energy.iter().sum::<f64>() * kept.len() as f64;
    let coverage = if total_energy > 0.0 { covered(shift) / total_energy } else { 1.0 };
    let total = frame.total_symbols() as isize;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &(p, g) in &frame.pilot_index_table {
        if groups.len() <= g {
            groups.resize(g + 1, Vec::new());
        }
        groups[g].push(p);
    }
    let mut out = vec![Vec::new(); k];
    for members in &groups {
        for &q0 in &members[trim..members.len() - trim] {
            let q = q0 as isize + shift;
            let qi = q.rem_euclid(total) as usize;
            for (i, row) in out.iter_mut().enumerate() {
                let mut acc = Complex::new(0.0, 0.0);
                for &p in members {
                    let d = q - p as isize + half as isize;
                    if d < 0 || d > 2 * half as isize {
                        continue;
                    }
                    for j in 0..k {
                        acc += r[i][j][d as usize] * frame.tributaries[j][p];
                    }
                }
                row.push((qi, acc));
            }
        }
    }
    for row in &mut out {
        row.sort_by_key(|e| e.0);
    }
    Ok(PilotTable {
        tributaries: out,
        shift_symbols: shift,
        coverage,
    })
}
