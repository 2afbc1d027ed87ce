//! Scenario runner for the moving spin-orbit dot simulator.
//!
//! A scenario is a TOML file (see [`scenario`]) run through one of four
//! subcommands: `simulate`, `contours`, `sweep` and `verify`.

pub mod error;
pub mod run;
pub mod scenario;
pub mod units;

pub use error::{CliError, ConfigError};
pub use scenario::Scenario;
