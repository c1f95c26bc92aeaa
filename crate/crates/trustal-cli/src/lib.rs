//! Command implementations behind the `trustal` binary, exposed as a
//! library so integration tests can drive them directly.

pub mod commands;
pub mod config;
pub mod output;

pub use config::UsageError;
