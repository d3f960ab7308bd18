//! Little-endian binary dumps shared by the CLI verbs.
//!
//! ```text
//! magic "FRXD" | version u32 | kind u8 | label u8 | reserved u16
//! symbol_rate f64 | samples_per_symbol u32 | center_wavelength f64 | rolloff f64
//! n_samples u64 | k u32 | n_arrays u32 | length u64 | origin u64 | aux [f64; 3]
//! body: n_arrays × length × (re f64, im f64)
//! ```

use std::io::{Read, Write};

use num_complex::Complex;

use crate::channel::{MatrixLabel, TransferMatrix};
use crate::error::{Error, Result};
use crate::frontend::IntensityCapture;
use crate::scalar::{Real, C};
use crate::sigcore::{ComplexWaveform, DispersionOperator, MdmWaveform, SignalGrid};

pub const MAGIC: [u8; 4] = *b"FRXD";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DumpKind {
    /// K complex waveforms.
    Fields = 0,
    /// K direct then K dispersed intensity traces (imaginary parts zero).
    Capture = 1,
    /// K² tap vectors, row-major.
    Matrix = 2,
    /// K symbol streams.
    Symbols = 3,
}

impl DumpKind {
    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => DumpKind::Fields,
            1 => DumpKind::Capture,
            2 => DumpKind::Matrix,
            3 => DumpKind::Symbols,
            _ => return Err(Error::Format(format!("unknown kind {c}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DumpKind::Fields => "fields",
            DumpKind::Capture => "capture",
            DumpKind::Matrix => "matrix",
            DumpKind::Symbols => "symbols",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DumpHeader {
    pub kind: DumpKind,
    pub label: u8,
    pub grid: SignalGrid,
    pub k: usize,
    pub n_arrays: usize,
    pub length: usize,
    pub origin: usize,
    pub aux: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dump {
    pub header: DumpHeader,
    pub arrays: Vec<Vec<Complex<f64>>>,
}

fn to_c64<T: Real>(v: &C<T>) -> Complex<f64> {
    Complex::new(v.re.as_f64(), v.im.as_f64())
}

fn from_c64<T: Real>(v: &Complex<f64>) -> C<T> {
    C::new(T::lit(v.re), T::lit(v.im))
}

impl Dump {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let h = &self.header;
        if self.arrays.len() != h.n_arrays || self.arrays.iter().any(|a| a.len() != h.length) {
            return Err(Error::Format("array shape disagrees with header".into()));
        }
        let mut buf = Vec::with_capacity(96 + 16 * h.n_arrays * h.length);
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.push(h.kind as u8);
        buf.push(h.label);
        buf.extend_from_slice(&0u16.to_le_bytes());
        buf.extend_from_slice(&h.grid.symbol_rate.to_le_bytes());
        buf.extend_from_slice(&(h.grid.samples_per_symbol as u32).to_le_bytes());
        buf.extend_from_slice(&h.grid.center_wavelength.to_le_bytes());
        buf.extend_from_slice(&h.grid.rolloff.to_le_bytes());
        buf.extend_from_slice(&(h.grid.n_samples as u64).to_le_bytes());
        buf.extend_from_slice(&(h.k as u32).to_le_bytes());
        buf.extend_from_slice(&(h.n_arrays as u32).to_le_bytes());
        buf.extend_from_slice(&(h.length as u64).to_le_bytes());
        buf.extend_from_slice(&(h.origin as u64).to_le_bytes());
        for a in h.aux {
            buf.extend_from_slice(&a.to_le_bytes());
        }
        for arr in &self.arrays {
            for v in arr {
                buf.extend_from_slice(&v.re.to_le_bytes());
                buf.extend_from_slice(&v.im.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor { b: &bytes, at: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let kind = DumpKind::from_code(cur.take(1)?[0])?;
        let label = cur.take(1)?[0];
        cur.take(2)?;
        let symbol_rate = cur.f64()?;
        let samples_per_symbol = cur.u32()? as usize;
        let center_wavelength = cur.f64()?;
        let rolloff = cur.f64()?;
        let n_samples = cur.u64()? as usize;
        let k = cur.u32()? as usize;
        let n_arrays = cur.u32()? as usize;
        let length = cur.u64()? as usize;
        let origin = cur.u64()? as usize;
        let aux = [cur.f64()?, cur.f64()?, cur.f64()?];
        let expected = n_arrays
            .checked_mul(length)
            .and_then(|v| v.checked_mul(16))
            .ok_or_else(|| Error::Format("size overflow".into()))?;
        if bytes.len() - cur.at != expected {
            return Err(Error::Format(format!(
                "body holds {} bytes, header implies {expected}",
                bytes.len() - cur.at
            )));
        }
        let arrays = (0..n_arrays)
            .map(|_| {
                (0..length)
                    .map(|_| Ok(Complex::new(cur.f64()?, cur.f64()?)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            header: DumpHeader {
                kind,
                label,
                grid: SignalGrid {
                    symbol_rate,
                    samples_per_symbol,
                    center_wavelength,
                    n_samples,
                    rolloff,
                },
                k,
                n_arrays,
                length,
                origin,
                aux,
            },
            arrays,
        })
    }

    pub fn from_fields<T: Real>(x: &MdmWaveform<T>) -> Self {
        Self {
            header: DumpHeader {
                kind: DumpKind::Fields,
                label: 0,
                grid: *x.grid(),
                k: x.k(),
                n_arrays: x.k(),
                length: x.grid().n_samples,
                origin: 0,
                aux: [0.0; 3],
            },
            arrays: x.tributaries().iter().map(|t| t.samples().iter().map(to_c64).collect()).collect(),
        }
    }

    pub fn from_symbols<T: Real>(streams: &[Vec<C<T>>], grid: SignalGrid) -> Self {
        let length = streams.first().map_or(0, |s| s.len());
        Self {
            header: DumpHeader {
                kind: DumpKind::Symbols,
                label: 0,
                grid,
                k: streams.len(),
                n_arrays: streams.len(),
                length,
                origin: 0,
                aux: [0.0; 3],
            },
            arrays: streams.iter().map(|s| s.iter().map(to_c64).collect()).collect(),
        }
    }

    pub fn from_capture<T: Real>(c: &IntensityCapture<T>) -> Self {
        let k = c.k();
        let real = |v: &Vec<T>| v.iter().map(|x| Complex::new(x.as_f64(), 0.0)).collect();
        Self {
            header: DumpHeader {
                kind: DumpKind::Capture,
                label: 0,
                grid: c.grid,
                k,
                n_arrays: 2 * k,
                length: c.grid.n_samples,
                origin: 0,
                aux: [c.d_operator.signed_psnm(), c.direct_loss_db, c.dispersed_loss_db],
            },
            arrays: c.direct.iter().chain(&c.dispersed).map(real).collect(),
        }
    }

    pub fn from_matrix<T: Real>(h: &TransferMatrix<T>) -> Self {
        Self {
            header: DumpHeader {
                kind: DumpKind::Matrix,
                label: h.label().code(),
                grid: *h.grid(),
                k: h.k(),
                n_arrays: h.k() * h.k(),
                length: h.tap_len(),
                origin: h.origin(),
                aux: [h.common_cd_psnm(), 0.0, 0.0],
            },
            arrays: h.all_taps().iter().map(|t| t.iter().map(to_c64).collect()).collect(),
        }
    }

    fn expect(&self, kind: DumpKind) -> Result<()> {
        if self.header.kind != kind {
            return Err(Error::Format(format!(
                "expected a {} dump, found {}",
                kind.name(),
                self.header.kind.name()
            )));
        }
        Ok(())
    }

    pub fn to_fields<T: Real>(&self) -> Result<MdmWaveform<T>> {
        self.expect(DumpKind::Fields)?;
        let tribs = self
            .arrays
            .iter()
            .map(|a| ComplexWaveform::new(self.header.grid, a.iter().map(from_c64).collect()))
            .collect::<Result<Vec<_>>>()?;
        MdmWaveform::new(tribs)
    }

    pub fn to_capture<T: Real>(&self) -> Result<IntensityCapture<T>> {
        self.expect(DumpKind::Capture)?;
        let k = self.header.k;
        let real = |a: &Vec<Complex<f64>>| a.iter().map(|v| T::lit(v.re)).collect::<Vec<T>>();
        let g = self.header.grid;
        let psnm = self.header.aux[0];
        Ok(IntensityCapture {
            direct: self.arrays[..k].iter().map(real).collect(),
            dispersed: self.arrays[k..].iter().map(real).collect(),
            d_operator: DispersionOperator::for_grid(psnm.abs(), &g),
            grid: g,
            direct_loss_db: self.header.aux[1],
            dispersed_loss_db: self.header.aux[2],
        })
    }

    pub fn to_matrix<T: Real>(&self) -> Result<TransferMatrix<T>> {
        self.expect(DumpKind::Matrix)?;
        let label = MatrixLabel::from_code(self.header.label)
            .ok_or_else(|| Error::Format(format!("unknown matrix label {}", self.header.label)))?;
        let taps = self.arrays.iter().map(|a| a.iter().map(from_c64).collect()).collect();
        Ok(TransferMatrix::new(self.header.k, taps, self.header.origin, self.header.grid, label)?
            .with_common_cd(self.header.aux[0]))
    }

    /// Human-readable summary used by `inspect`.
    pub fn summary(&self) -> String {
        let h = &self.header;
        let energy: Vec<f64> = self
            .arrays
            .iter()
            .map(|a| a.iter().map(|v| v.norm_sqr()).sum())
            .collect();
        let mut s = format!(
            "kind: {}\nk: {}\narrays: {} × {}\nsymbol rate: {} Bd\nsamples/symbol: {}\nwavelength: {} m\nroll-off: {}\ngrid samples: {}\n",
            h.kind.name(),
            h.k,
            h.n_arrays,
            h.length,
            h.grid.symbol_rate,
            h.grid.samples_per_symbol,
            h.grid.center_wavelength,
            h.grid.rolloff,
            h.grid.n_samples
        );
        match h.kind {
            DumpKind::Matrix => {
                let label = MatrixLabel::from_code(h.label).map_or("?".to_string(), |l| format!("{l:?}"));
                s += &format!("label: {label}\norigin: {}\ncommon CD: {} ps/nm\n", h.origin, h.aux[0]);
            }
            DumpKind::Capture => {
                s += &format!("D: {} ps/nm\npath losses: {} / {} dB\n", h.aux[0], h.aux[1], h.aux[2]);
            }
            _ => {}
        }
        for (i, e) in energy.iter().enumerate() {
            s += &format!("array {i}: energy {e:.6e}\n");
        }
        s
    }
}

struct Cursor<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.b.len() {
            return Err(Error::Format("truncated header or body".into()));
        }
        let s = &self.b[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let g = SignalGrid::standard(64).unwrap();
        let taps = (0..4).map(|e| vec![Complex::new(e as f64, -0.5), Complex::new(0.25, 1.0)]).collect();
        let h = TransferMatrix::new(2, taps, 1, g, MatrixLabel::Modal).unwrap().with_common_cd(510.0);
        let mut buf = Vec::new();
        Dump::from_matrix(&h).write(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"FRXD");
        let back: TransferMatrix<f64> = Dump::read(&buf[..]).unwrap().to_matrix().unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn truncated_body_rejected() {
        let g = SignalGrid::standard(16).unwrap();
        let x = MdmWaveform::<f64>::zeros(g, 2);
        let mut buf = Vec::new();
        Dump::from_fields(&x).write(&mut buf).unwrap();
        buf.pop();
        assert!(matches!(Dump::read(&buf[..]), Err(Error::Format(_))));
        assert!(Dump::read(&b"XXXX"[..]).is_err());
    }

    #[test]
    fn kind_mismatch_rejected() {
        let g = SignalGrid::standard(16).unwrap();
        let d = Dump::from_fields(&MdmWaveform::<f64>::zeros(g, 1));
        assert!(d.to_matrix::<f64>().is_err());
    }
}
