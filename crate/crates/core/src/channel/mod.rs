//! Six-mode multimode span: coupling, modal delays, common dispersion,
//! mode-dependent loss and additive noise.

mod matrix;
mod metrics;
mod noise;
mod synth;

pub use matrix::{apply_channel, MatrixLabel, TransferMatrix};
pub use metrics::{
    impulse_response, mdl_of, mdl_of_matrix, write_tap_heatmap_csv, ImpulseProfile, MdlMode,
};
pub use noise::{add_noise, measured_snr_db};
pub use synth::{synthesize_channel, ChannelParams};

use serde::{Deserialize, Serialize};

/// Tributaries: 0, 1 = LP01 x/y; 2–5 = LP11a/b x/y.
pub const K_MODES: usize = 6;

/// Mode group of a tributary index (0 = LP01, 1 = LP11).
pub fn group_of(tributary: usize) -> usize {
    usize::from(tributary >= 2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeGroup {
    Lp01,
    Lp11,
    All,
}

impl ModeGroup {
    pub fn tributaries(self) -> std::ops::Range<usize> {
        match self {
            ModeGroup::Lp01 => 0..2,
            ModeGroup::Lp11 => 2..K_MODES,
            ModeGroup::All => 0..K_MODES,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModeGroup::Lp01 => "lp01",
            ModeGroup::Lp11 => "lp11",
            ModeGroup::All => "all",
        }
    }
}
