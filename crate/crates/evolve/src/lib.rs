//! Evolutionary training of patch-navigation policies: PGPE with the ClipUp
//! optimizer against episode fitness, plus run persistence and validation.

pub mod error;
pub mod fitness;
pub mod pgpe;
pub mod train;

pub use error::EvolveError;
pub use fitness::{episode_fitness, straight_line_bound, validation_cost};
pub use pgpe::{EsConfig, EsState, Gradients, Pgpe, PopulationSample};
pub use train::{train, validate, GenerationSummary, TrainOutcome, TrainSetup, ValidationReport};
