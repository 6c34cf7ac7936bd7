//! Visual-password speaker verification from mouth-ROI frame sequences.
//!
//! The pipeline runs frames → [`features::WordSignature`] →
//! [`matching`] (normalization, interpolation, nearest-neighbour distance) →
//! [`auth`] (threshold calibration and thresholded accept/deny with try
//! counting) → [`eval`] (two-session evaluation protocol and reports).

pub mod auth;
pub mod error;
pub mod eval;
pub mod exec;
pub mod features;
pub mod matching;
pub mod numeric;
pub mod roi;
pub mod transforms;

pub use error::{Error, Result};
pub use exec::Execution;
