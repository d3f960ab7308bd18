//! Transmit side: PRBS payload, Gray QPSK, framing with training sequence and
//! pilot groups, RRC shaping.

mod frame;
mod pulse;
mod qpsk;

pub use frame::{build_frame, max_cross_correlation, FrameLayout, FrameSpec, MdmFrame};
pub use pulse::{
    decorrelate, matched_filter, matched_symbols, matched_symbols_from_spectrum,
    out_of_band_level_db, pulse_shape, raised_cosine, rrc_filter, shape_spectrum, shape_symbols,
};
pub use qpsk::{decision_distance, demap_qpsk, map_qpsk, Prbs11};

use crate::error::Result;
use crate::scalar::{Real, C};
use crate::sigcore::{MdmWaveform, SignalGrid};

/// Shapes every tributary of `frame` onto `grid`.
pub fn shape_frame<T: Real>(frame: &MdmFrame, grid: &SignalGrid) -> Result<MdmWaveform<T>> {
    let tribs = frame
        .tributaries
        .iter()
        .map(|s| {
            let st: Vec<C<T>> = s.iter().map(|v| C::new(T::lit(v.re), T::lit(v.im))).collect();
            pulse_shape(&st, grid, grid.rolloff)
        })
        .collect::<Result<Vec<_>>>()?;
    MdmWaveform::new(tribs)
}
