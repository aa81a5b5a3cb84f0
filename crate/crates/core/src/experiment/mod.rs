//! Experiment configs and the artifact-writing runner.
//!
//! A config is a small `key = value` file with `[section]` headers:
//!
//! ```text
//! experiment = chsh
//! trials = 4000
//! seed = 42
//! mode = mc
//!
//! [chsh]
//! variant = sum
//! grid_step = pi/46
//! ```
//!
//! Every run writes `results.csv` (fixed columns per experiment, shortest
//! round-trip floats), `meta.json`, and `field.csv` for BPM experiments.

mod config;
mod run;

pub use config::{
    parse_angle, parse_config, BpmBlock, ChshBlock, EvalMode, ExperimentConfig, ExperimentKind, GhzBlock,
    MetrologyBlock, NfieldBlock, ThetaChoice,
};
pub use run::{execute, run_experiment, Artifacts, RunReport};
