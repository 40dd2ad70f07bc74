//! Spin-readout models: switching and filter functions, accumulated phase, two-drive readout and
//! heterodyne frequency arithmetic.

mod drive;
mod filter;
mod heterodyne;
mod phase;
mod sequence;

pub use drive::{ramsey_two_drive_expectation, DriveConfig, NEAR_RESONANCE_LIMIT};
pub use filter::{
    filter_closed_form, filter_complex, filter_curve_csv, filter_numeric_oracle, FilterResponse,
    FilterValue, SINGULAR_THRESHOLD,
};
pub use heterodyne::{heterodyne_frequency, nearest_reference_index, reference_shift};
pub use phase::{accumulated_phase, accumulated_phase_complex, PhaseKernel};
pub use sequence::{PulseSequence, Segment, SequenceKind};

use serde::{Deserialize, Serialize};

use crate::num::Real;

/// Electron gyromagnetic ratio, 2 pi * 28 Hz/nT, in rad/(s T).
pub const GAMMA_E: f64 = 2.0 * std::f64::consts::PI * 28e9;

/// Optional contrast envelope `exp(-(t_phi / t2)^p)`. Disabled by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoherence<T> {
    pub enabled: bool,
    /// Seconds.
    pub t2: T,
    pub exponent: T,
}

impl<T: Real> Default for Decoherence<T> {
    fn default() -> Self {
        Self {
            enabled: false,
            t2: T::lit(200e-6),
            exponent: T::one(),
        }
    }
}

impl<T: Real> Decoherence<T> {
    /// Ramsey-type dephasing time of the ensemble.
    pub fn t2_star() -> T {
        T::lit(8.5e-6)
    }

    pub fn factor(&self, t_phi: T) -> T {
        if self.enabled {
            (-(t_phi / self.t2).powf(self.exponent)).exp()
        } else {
            T::one()
        }
    }
}
