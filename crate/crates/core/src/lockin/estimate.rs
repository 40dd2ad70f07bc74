use crate::error::{invalid, Error, Result};
use crate::num::Real;
use crate::physics::{filter_closed_form, PulseSequence};
use crate::sensor::SensorConfig;

/// Amplitude below this fraction of the largest input magnitude leaves the phase undefined.
pub const UNDEFINED_PHASE_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFit<T> {
    pub phase: T,
    pub amplitude: T,
}

/// Least-squares fit of `A sin(2 pi k / N + phi)` to one evenly sampled cycle.
///
/// With `S = (2/N) sum s_k sin(2 pi k/N) = A cos(phi)` and
/// `C = (2/N) sum s_k cos(2 pi k/N) = A sin(phi)` the normal equations decouple.
pub fn lsq_phase_fit<T: Real>(samples: &[T]) -> Result<PhaseFit<T>> {
    let n = samples.len();
    if n < 4 || !n.is_multiple_of(2) {
        return Err(invalid(
            "samples",
            format!("need an even count >= 4, got {n}"),
        ));
    }
    let nf = T::from_count(n);
    let step = T::TAU() / nf;
    let (mut s, mut c) = (T::zero(), T::zero());
    let mut scale = T::zero();
    for (k, &v) in samples.iter().enumerate() {
        let arg = step * T::from_count(k);
        s += v * arg.sin();
        c += v * arg.cos();
        scale = scale.max(v.abs());
    }
    let two_over_n = T::lit(2.0) / nf;
    let (s, c) = (s * two_over_n, c * two_over_n);
    let amplitude = s.hypot(c);
    if !(amplitude > T::lit(UNDEFINED_PHASE_RATIO) * scale) {
        return Err(Error::PhaseUndefined {
            amplitude: amplitude.to_f64_lossy(),
        });
    }
    Ok(PhaseFit {
        phase: c.atan2(s),
        amplitude,
    })
}

/// Shot-noise limited phase uncertainty `(2 / sqrt(N)) / (C sqrt(photons))` in rad.
pub fn phase_noise_from<T: Real>(contrast: T, photons: T, samples_per_cycle: usize) -> T {
    T::lit(2.0) / (T::from_count(samples_per_cycle).sqrt() * contrast * photons.sqrt())
}

/// [`phase_noise_from`] with the sensor's contrast and photon number.
pub fn phase_noise(sensor: &SensorConfig, samples_per_cycle: usize) -> f64 {
    phase_noise_from(sensor.contrast, sensor.photons, samples_per_cycle)
}

/// Shot-noise limited field sensitivity of the two-drive readout, T/sqrt(Hz):
/// `2 / (gamma |G| C) * sqrt(2 t_seq / photons)` with `|G|` at `2 pi / t_phi`.
pub fn sensitivity(sensor: &SensorConfig, seq: &PulseSequence<f64>) -> Result<f64> {
    let g = filter_closed_form(seq, seq.principal_omega())?
        .value
        .magnitude;
    if g == 0.0 {
        return Err(invalid(
            "sequence",
            "filter vanishes at its principal frequency",
        ));
    }
    let c = sensor.effective_contrast(seq);
    Ok(2.0 / (sensor.gamma_e * g * c) * (2.0 * seq.t_seq() / sensor.photons).sqrt())
}

/// Sensitivity of the plain fluorescence readout, better by `sqrt(2)`.
pub fn sensitivity_fluorescence(sensor: &SensorConfig, seq: &PulseSequence<f64>) -> Result<f64> {
    Ok(sensitivity(sensor, seq)? / std::f64::consts::SQRT_2)
}

/// Linear dynamic range `20 log10(180 deg / (k_sf eta sqrt(bw)))`.
///
/// `k_sf` in deg/nT, `eta` in T/sqrt(Hz), `bandwidth` in Hz.
pub fn ldr_db(k_sf_deg_per_nt: f64, eta: f64, bandwidth: f64) -> Result<f64> {
    if !(k_sf_deg_per_nt > 0.0 && eta > 0.0 && bandwidth > 0.0) {
        return Err(invalid("ldr", "k_sf, eta and bandwidth must all be > 0"));
    }
    let eta_nt = eta * 1e9;
    Ok(20.0 * (180.0 / (k_sf_deg_per_nt * eta_nt * bandwidth.sqrt())).log10())
}
