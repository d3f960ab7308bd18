//! Transfer-matrix reconstruction over the training sequence, dispersion
//! split and pilot forward-propagation.

mod estimate;
mod ls;
mod pilots;
mod split;

pub use estimate::{
    align_with_cd_search, common_lag, estimate_transfer_matrix, time_align, time_align_scored, training_fields,
    training_intensity,
    ts_window, Estimation, EstimatorOptions, InitialMatrix,
};
pub use ls::{ls_channel_fit, LsFitter};
pub use pilots::{propagate_pilots, PilotTable};
pub use split::{split_dispersion, split_grid_len, DispersionSplit};
