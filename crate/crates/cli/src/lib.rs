//! Command implementations and exporters behind the `mrac` binary.

pub mod commands;
pub mod export;
