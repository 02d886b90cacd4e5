//! Grant-free random access over LEO satellite links with training-sequence
//! aided OTFS: channel model, TS-OTFS modem, two-stage activity detection and
//! channel estimation, parallel time-domain multi-user detection, and a
//! reproducible Monte-Carlo harness.

pub mod access;
pub mod channel;
pub mod detector;
pub mod harness;
pub mod modem;
pub mod numerics;
pub mod selftest;

pub use numerics::{ComplexMatrix, LinearOperator, RngStream};
