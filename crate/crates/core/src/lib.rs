//! Model reference adaptive control for switched MIMO plants with matched
//! uncertainty and an unknown control matrix.
//!
//! The controller estimates the ideal feedback gains from filtered plant
//! signals (DREM), detects parameter switches from an indicator that
//! vanishes on clean data, resets its filters after each detection and
//! drives the estimate with a dead-zone adaptive law.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adaptation;
pub mod config;
pub mod detector;
pub mod dynamics;
pub mod engine;
pub mod filters;
pub mod integrator;
pub mod matrix;
pub mod metrics;
pub mod regression;
pub mod verify;

pub use matrix::{MatError, Matrix};
