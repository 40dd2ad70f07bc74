use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::num::Real;

/// Detunings and Rabi frequencies of the two microwave drives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig<T> {
    /// rad/s, MW1 detuning from resonance.
    pub delta_omega_1: T,
    /// rad/s, MW2 detuning from resonance.
    pub delta_omega_2: T,
    /// rad/s, MW1 Rabi frequency.
    pub rabi_1: T,
    /// rad/s, MW2 Rabi frequency.
    pub rabi_2: T,
    /// Hz, frequency difference of the drives (rotating-frame modulation rate).
    pub delta_f: T,
}

/// `|delta_omega / Omega|` above which the near-resonance approximation is flagged.
pub const NEAR_RESONANCE_LIMIT: f64 = 0.1;

impl<T: Real> DriveConfig<T> {
    pub fn new(
        delta_omega_1: T,
        delta_omega_2: T,
        rabi_1: T,
        rabi_2: T,
        delta_f: T,
    ) -> Result<Self> {
        if !(rabi_1 > T::zero()) || !(rabi_2 > T::zero()) {
            return Err(invalid("rabi", "Rabi frequencies must be > 0"));
        }
        if !delta_f.is_finite() || delta_f < T::zero() {
            return Err(invalid("delta_f", "must be finite and >= 0"));
        }
        Ok(Self {
            delta_omega_1,
            delta_omega_2,
            rabi_1,
            rabi_2,
            delta_f,
        })
    }

    /// Resonant drives with the given modulation rate (Rabi 2 pi * 10 MHz).
    pub fn resonant(delta_f: T) -> Self {
        let rabi = T::TAU() * T::lit(10e6);
        Self {
            delta_omega_1: T::zero(),
            delta_omega_2: T::zero(),
            rabi_1: rabi,
            rabi_2: rabi,
            delta_f,
        }
    }

    /// `(pi/2)(dw1/Omega1 - dw2/Omega2)`, the phase picked up during the two pi/2 pulses.
    pub fn detuning_correction(&self) -> T {
        T::FRAC_PI_2() * (self.delta_omega_1 / self.rabi_1 - self.delta_omega_2 / self.rabi_2)
    }

    /// True when either drive is too far off resonance for the first-order correction.
    pub fn near_resonance_violated(&self) -> bool {
        let limit = T::lit(NEAR_RESONANCE_LIMIT);
        (self.delta_omega_1 / self.rabi_1).abs() > limit
            || (self.delta_omega_2 / self.rabi_2).abs() > limit
    }
}

/// Spin projection `sin[phi + (pi/2)(dw1/O1 - dw2/O2) + 2 pi df t]` read out with the
/// frequency-offset second drive.
pub fn ramsey_two_drive_expectation<T: Real>(drive: &DriveConfig<T>, phi: T, t: T) -> T {
    (phi + drive.detuning_correction() + T::TAU() * drive.delta_f * t).sin()
}
