//! Quantum phase-sensitive detection of AC magnetic fields with an NV ensemble.
//!
//! Everything numeric is generic over [`num::Real`] (`f32` or `f64`); the aliases at the crate
//! root fix the scalar to `f64`.

pub mod analyzer;
pub mod audio;
pub mod error;
pub mod lockin;
pub mod num;
pub mod physics;
pub mod sensor;
pub mod signal;

pub use error::{Error, Result};

pub type SignalComponent = signal::SignalComponent<f64>;
pub type CompositeSignal = signal::CompositeSignal<f64>;
pub type TimeSeries = signal::TimeSeries<f64>;
pub type Spectrum = signal::Spectrum<f64>;
pub type PulseSequence = physics::PulseSequence<f64>;
pub type DriveConfig = physics::DriveConfig<f64>;
