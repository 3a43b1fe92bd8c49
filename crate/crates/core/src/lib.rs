//! Interrupt-and-access MAC for safety-critical vehicular messages.
//!
//! Signal generation and detection are generic over [`Scalar`] (`f32` or
//! `f64`); the crate-root aliases fix the common `f64` instantiation.

pub mod aloha;
pub mod channel;
pub mod coded;
pub mod detector;
pub mod error;
pub mod marcum;
pub mod protocol;
pub mod rng;
pub mod scalar;
pub mod signal;
pub mod stats;
pub mod waveform_io;

pub use error::{Error, Result};
pub use rng::SimRng;
pub use scalar::Scalar;
pub use stats::RateEstimate;

pub type Sequence = signal::ComplexSequence<f64>;
pub type Sequence32 = signal::ComplexSequence<f32>;
pub type Detector = detector::DetectorConfig<f64>;
pub type Detector32 = detector::DetectorConfig<f32>;
