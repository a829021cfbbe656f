//! Star-QAM transmission over channels with phase-noise memory: constellation
//! design, the CPAN surrogate channel, a split-step fiber link, successive
//! interference cancellation receivers and achievable-rate estimation.

pub mod air;
pub mod constellation;
pub mod cpan;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod fiber;
pub mod registry;
pub mod sic;

pub use constellation::{build_star_qam, build_star_qam_with, Constellation, SymbolSequence};
pub use cpan::{fit_params, CpanParams, FitReport};
pub use error::{Error, Result};
pub use experiment::{run_campaign, ExperimentConfig};
pub use sic::{run_sic, BeliefMode, SicSchedule};
