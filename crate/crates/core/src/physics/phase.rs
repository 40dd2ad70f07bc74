use num_complex::Complex;

use super::filter::filter_complex;
use super::sequence::PulseSequence;
use crate::error::Result;
use crate::num::Real;
use crate::signal::CompositeSignal;

/// Precomputed per-component filter gains for repeated phase evaluation.
///
/// The phase picked up in the window starting at `t0` is
/// `gamma_e * Re[sum_k B_k G(w_k) e^{-i(phi_k + w_k t0)}]` for the stationary tones, plus the
/// exact switching-weighted integral of any scheduled or sampled parts.
#[derive(Debug, Clone)]
pub struct PhaseKernel<'a, T> {
    seq: PulseSequence<T>,
    signal: &'a CompositeSignal<T>,
    gamma_e: T,
    /// `(w_k, gamma_e * B_k * G(w_k) * e^{-i phi_k})`
    tones: Vec<(T, Complex<T>)>,
}

impl<'a, T: Real> PhaseKernel<'a, T> {
    pub fn new(seq: &PulseSequence<T>, signal: &'a CompositeSignal<T>, gamma_e: T) -> Result<Self> {
        let tones = signal
            .components
            .iter()
            .map(|c| {
                let w = c.angular_frequency();
                let g = filter_complex(seq, w)?;
                Ok((w, g * Complex::from_polar(gamma_e * c.amplitude, -c.phase)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            seq: *seq,
            signal,
            gamma_e,
            tones,
        })
    }

    pub fn sequence(&self) -> &PulseSequence<T> {
        &self.seq
    }

    /// Complex phase of the stationary tones for the window starting at `t0`.
    pub fn complex_at(&self, t0: T) -> Complex<T> {
        self.tones
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, &(w, gain)| {
                acc + gain * Complex::from_polar(T::one(), -w * t0)
            })
    }

    /// Real accumulated phase (rad) for the window starting at `t0`.
    pub fn phase_at(&self, t0: T) -> T {
        let mut phase = self.complex_at(t0).re;
        if !self.signal.is_stationary() {
            let mut acc = T::zero();
            for seg in self.seq.segments() {
                acc += seg.sign
                    * self
                        .signal
                        .integrate_nonstationary(t0 + seg.start, t0 + seg.end);
            }
            phase += self.gamma_e * acc;
        }
        phase
    }

    /// Phase of measurement `index`, whose window is `[index * t_seq, index * t_seq + t_phi]`.
    pub fn phase_for_index(&self, index: u64) -> T {
        self.phase_at(T::lit(index as f64) * self.seq.t_seq())
    }
}

/// Accumulated quantum phase (rad) of measurement `index`.
pub fn accumulated_phase<T: Real>(
    seq: &PulseSequence<T>,
    signal: &CompositeSignal<T>,
    index: u64,
    gamma_e: T,
) -> Result<T> {
    Ok(PhaseKernel::new(seq, signal, gamma_e)?.phase_for_index(index))
}

/// Complex form `sum_k G(w_k) gamma_e B_k e^{-i phi_k} e^{-i w_k index t_seq}` (stationary tones).
pub fn accumulated_phase_complex<T: Real>(
    seq: &PulseSequence<T>,
    signal: &CompositeSignal<T>,
    index: u64,
    gamma_e: T,
) -> Result<Complex<T>> {
    let k = PhaseKernel::new(seq, signal, gamma_e)?;
    Ok(k.complex_at(T::lit(index as f64) * seq.t_seq()))
}
