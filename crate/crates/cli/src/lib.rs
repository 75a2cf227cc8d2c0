//! Scenario-driven front end for the funnel-cbf toolkit.
//!
//! Scenarios are JSON files naming a built-in plant, a funnel boundary, a
//! reference signal, a controller, simulation settings, and (optionally) a
//! verification section. The binary exposes four verbs: `simulate`,
//! `compare`, `verify`, and `export`.

pub mod commands;
pub mod scenario;
pub mod svg;

pub use commands::{cmd_compare, cmd_export, cmd_simulate, cmd_verify, Overrides};
pub use scenario::{load_scenario, CliError, LoadedScenario, ScenarioSpec};
