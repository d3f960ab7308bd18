pub mod error;
pub mod linalg;
pub mod scalar;
pub mod sigcore;
pub mod txgen;
pub mod channel;
pub mod frontend;
pub mod retrieval;
pub mod chanest;
pub mod mimodsp;

pub use error::{Error, Result};
pub use scalar::{Real, C};
pub mod io;
pub mod runner;

pub use chanest::{DispersionSplit, Estimation, EstimatorOptions};
pub use channel::{ChannelParams, TransferMatrix};
pub use frontend::IntensityCapture;
pub use mimodsp::{BerReport, EqualizerConfig};
pub use retrieval::{RetrievalOptions, RetrievalResult};
pub use runner::{run_scenario, ScenarioConfig};
pub use sigcore::{ComplexWaveform, DispersionOperator, MdmWaveform, SignalGrid};
pub use txgen::{FrameSpec, MdmFrame};

/// Double-precision aliases.
pub type Waveform = ComplexWaveform<f64>;
pub type Waveform32 = ComplexWaveform<f32>;
pub type Fields = MdmWaveform<f64>;
pub type Fields32 = MdmWaveform<f32>;
pub type Channel = TransferMatrix<f64>;
pub type Channel32 = TransferMatrix<f32>;
