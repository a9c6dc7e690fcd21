//! Configuration, verification suites and report emission behind `vel`.

pub mod config;
pub mod report;
pub mod suites;

pub use config::{parse_config, Config, ConfigError, Format, Overrides};
pub use report::{Check, SuiteReport};
