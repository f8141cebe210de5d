//! Multi-agent simulation of air-pollution crisis management.
//!
//! Emission-source agents choose between reducing and resuming emission
//! under a reward/penalty regulation scheme. Gaussian plume dispersion maps
//! emission rates onto a chain of receptor boxes, a small neural network
//! forecasts the next aggregate concentration, and forecasts above the goal
//! level penalize agents in proportion to their share of the emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod config;
pub mod dispersion;
pub mod engine;
pub mod predictor;
pub mod report;
pub mod species;
pub mod weather;

pub use agents::{AgentState, Decision, EmissionCommand, RewardRecord};
pub use config::{ConfigError, ScenarioConfig};
pub use dispersion::{ConcentrationField, DispersionError, EmissionSource, PlumeQuery, SigmaPair};
pub use engine::{EngineError, Forecaster, Policy, RunResult, Simulation, StepRecord};
pub use predictor::{NetworkParameters, PredictorError, PredictorInput, TrainingConfig};
pub use report::{Arm, MatrixResult};
pub use species::{PerSpecies, Species};
pub use weather::{WeatherError, WeatherState, WeatherStatsTarget};
