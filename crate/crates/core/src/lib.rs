//! Secure key rates for BB84 and Ekert-type quantum key distribution over
//! lossy, noisy channels, with attenuated, down-converter and
//! entanglement-swapping sources.

pub mod channel;
pub mod config;
pub mod error;
pub mod fockoracle;
pub mod protocols;
pub mod ratecore;
pub mod security;
pub mod sources;
pub mod verify;

pub use channel::{ArmLoss, ChannelParams};
pub use config::{CurveSpec, RunConfig};
pub use error::{Error, Result};
pub use protocols::{Grid, Optimum, RateModel, RatePoint, RateValue, Stats, SweepMode, SweepSpec};
pub use ratecore::{DisturbanceRecord, EcBenchmarkTable};
pub use security::{KeyBudget, SecurityParams};
pub use sources::{
    ClickStats, CoincidenceStats, ModelOptions, PdcCoefficients, PdcFormula, Protocol, SourceSpec,
};
pub use verify::{Suite, VerifyReport};
