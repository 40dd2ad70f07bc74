use super::sequence::PulseSequence;
use crate::error::{Error, Result};
use crate::num::Real;

/// Reference index `k` whose comb line `k / t_seq` is nearest to `signal_freq`.
pub fn nearest_reference_index<T: Real>(signal_freq: T, seq: &PulseSequence<T>) -> i64 {
    (signal_freq * seq.t_seq()).round().to_i64().unwrap_or(0)
}

/// Signed heterodyne frequency `f - k / (m t_phi)` in Hz.
pub fn heterodyne_frequency<T: Real>(signal_freq: T, seq: &PulseSequence<T>, k: i64) -> Result<T> {
    let fs = T::one() / seq.t_seq();
    let offset = signal_freq - T::lit(k as f64) * fs;
    let half = fs / T::lit(2.0);
    if !(offset.abs() < half) {
        return Err(Error::OutOfBand {
            k,
            offset: offset.to_f64_lossy(),
            half_rate: half.to_f64_lossy(),
        });
    }
    Ok(offset)
}

/// Heterodyne shift `w_ref * dT_seq / T_seq` (rad/s) when only the sequence length changes.
pub fn reference_shift<T: Real>(seq: &PulseSequence<T>, delta_t_seq: T, omega_ref: T) -> T {
    omega_ref * delta_t_seq / seq.t_seq()
}
