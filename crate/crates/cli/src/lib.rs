//! Scenario runner for toric-code steepest-entropy-ascent relaxation
//! experiments: configuration, parallel trajectory sweeps, serialization and
//! the built-in validation suite.

pub mod checks;
pub mod config;
pub mod output;
pub mod runner;
pub mod scenario;
