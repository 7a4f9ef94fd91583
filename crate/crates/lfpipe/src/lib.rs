//! Lightfield refocusing toolkit.
//!
//! Implements computational refocusing for calibrated plenoptic captures
//! two ways: a reference spatial-domain shift-and-integrate path, and a
//! clock-accurate simulation of the switch-driven semi-systolic FIR filter
//! array that computes the same thing in streaming hardware. The two paths
//! are kept bit-comparable so the filter architecture can be verified
//! against the reference, and a closed-form cycle model predicts the
//! array's latency and throughput.

pub mod array;
pub mod error;
pub mod fir;
pub mod io;
pub mod lightfield;
pub mod metrics;
pub mod refocus;
pub mod switches;
pub mod synth;
pub mod timing;

pub use error::{Error, Result};
