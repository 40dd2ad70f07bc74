//! Microwave filter functions `G(w) = integral_0^{t_phi} g(t) e^{-iwt} dt`.
//!
//! The closed forms are
//!
//! * Ramsey: `(2/w) sin(wT/2) e^{-iwT/2}`
//! * CPMG-n, n odd: `4 sin^2(wT/4n) cos(wT/2) / (w cos(wT/2n)) e^{i(-wT/2 + pi/2)}`
//! * CPMG-n, n even: `4 sin^2(wT/4n) sin(wT/2) / (w cos(wT/2n)) e^{i(-wT/2 - pi)}`
//!
//! The signed prefactor may be negative; [`FilterValue`] folds that sign into the phase.

use std::fmt::Write as _;

use num_complex::Complex;

use super::sequence::{PulseSequence, SequenceKind};
use crate::error::{Error, Result};
use crate::num::{wrap_phase, Real};

/// `|cos(wT/2n)|` below which the closed form hands over to the piecewise integral.
pub const SINGULAR_THRESHOLD: f64 = 1e-6;

/// Filter response in polar form: magnitude in seconds, phase in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterValue<T> {
    pub magnitude: T,
    pub phase: T,
}

impl<T: Real> FilterValue<T> {
    pub fn from_complex(z: Complex<T>) -> Self {
        Self {
            magnitude: z.norm(),
            phase: z.arg(),
        }
    }

    pub fn to_complex(self) -> Complex<T> {
        Complex::from_polar(self.magnitude, self.phase)
    }

    fn from_signed(amplitude: T, phase: T) -> Self {
        if amplitude < T::zero() {
            Self {
                magnitude: -amplitude,
                phase: wrap_phase(phase + T::PI()),
            }
        } else {
            Self {
                magnitude: amplitude,
                phase: wrap_phase(phase),
            }
        }
    }
}

/// Closed-form evaluation plus a flag telling whether the singular-point fallback was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterResponse<T> {
    pub value: FilterValue<T>,
    pub singular: bool,
}

fn check_omega<T: Real>(omega: T) -> Result<()> {
    if omega < T::zero() || !omega.is_finite() {
        return Err(Error::NegativeFrequency(omega.to_f64_lossy()));
    }
    Ok(())
}

fn dc_response<T: Real>(seq: &PulseSequence<T>) -> FilterValue<T> {
    let magnitude = match seq.kind {
        SequenceKind::Ramsey => seq.t_phi,
        // segments alternate with equal interior lengths; odd n leaves zero net area
        SequenceKind::Cpmg(_) => T::zero(),
    };
    FilterValue {
        magnitude,
        phase: T::zero(),
    }
}

/// Closed-form filter function.
pub fn filter_closed_form<T: Real>(seq: &PulseSequence<T>, omega: T) -> Result<FilterResponse<T>> {
    check_omega(omega)?;
    if omega == T::zero() {
        return Ok(FilterResponse {
            value: dc_response(seq),
            singular: false,
        });
    }
    let two = T::lit(2.0);
    let x = omega * seq.t_phi;
    let base = -x / two;
    let value = match seq.kind {
        SequenceKind::Ramsey => FilterValue::from_signed(two * (x / two).sin() / omega, base),
        SequenceKind::Cpmg(n) => {
            let nf = T::from_count(n as usize);
            let denom = (x / (two * nf)).cos();
            if denom.abs() < T::lit(SINGULAR_THRESHOLD) {
                return Ok(FilterResponse {
                    value: filter_numeric_oracle(seq, omega)?,
                    singular: true,
                });
            }
            let s = (x / (T::lit(4.0) * nf)).sin();
            let lead = T::lit(4.0) * s * s / (omega * denom);
            if n % 2 == 1 {
                FilterValue::from_signed(lead * (x / two).cos(), base + T::FRAC_PI_2())
            } else {
                FilterValue::from_signed(lead * (x / two).sin(), base - T::PI())
            }
        }
    };
    Ok(FilterResponse {
        value,
        singular: false,
    })
}

/// Complex closed-form response `G(w)`.
pub fn filter_complex<T: Real>(seq: &PulseSequence<T>, omega: T) -> Result<Complex<T>> {
    Ok(filter_closed_form(seq, omega)?.value.to_complex())
}

/// Piecewise-exact integral of `g(t) e^{-iwt}` over the window.
///
/// Each constant-sign piece `[a, b)` contributes `e^{-iw(a+b)/2} 2 sin(w(b-a)/2) / w`.
pub fn filter_numeric_oracle<T: Real>(seq: &PulseSequence<T>, omega: T) -> Result<FilterValue<T>> {
    check_omega(omega)?;
    let two = T::lit(2.0);
    let mut acc = Complex::new(T::zero(), T::zero());
    for seg in seq.segments() {
        let len = seg.end - seg.start;
        let weight = if omega == T::zero() {
            len
        } else {
            two * (omega * len / two).sin() / omega
        };
        let mid = (seg.start + seg.end) / two;
        acc = acc + Complex::from_polar(seg.sign * weight, -omega * mid);
    }
    Ok(FilterValue::from_complex(acc))
}

/// CSV `omega_rad_s,magnitude_s,phase_rad` of the closed form over `omegas`.
pub fn filter_curve_csv<T: Real>(seq: &PulseSequence<T>, omegas: &[T]) -> Result<String> {
    let mut out = String::from("omega_rad_s,magnitude_s,phase_rad\n");
    for &w in omegas {
        let v = filter_closed_form(seq, w)?.value;
        let _ = writeln!(
            out,
            "{},{},{}",
            w.to_f64_lossy(),
            v.magnitude.to_f64_lossy(),
            v.phase.to_f64_lossy()
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::phase_difference;
    use std::f64::consts::PI;

    const T_PHI: f64 = 50e-6;

    fn seq(kind: SequenceKind) -> PulseSequence<f64> {
        PulseSequence::new(kind, T_PHI, 2).unwrap()
    }

    #[test]
    fn hahn_peak_is_two_t_over_pi() {
        let g = filter_closed_form(&seq(SequenceKind::Cpmg(1)), 2.0 * PI / T_PHI).unwrap();
        assert!((g.value.magnitude - 2.0 * T_PHI / PI).abs() < 1e-12 * T_PHI);
        let o = filter_numeric_oracle(&seq(SequenceKind::Cpmg(1)), 2.0 * PI / T_PHI).unwrap();
        assert!((o.magnitude - 2.0 * T_PHI / PI).abs() < 1e-12 * T_PHI);
    }

    #[test]
    fn hahn_equal_at_half_frequency() {
        let s = seq(SequenceKind::Cpmg(1));
        let a = filter_closed_form(&s, 2.0 * PI / T_PHI)
            .unwrap()
            .value
            .magnitude;
        let b = filter_closed_form(&s, PI / T_PHI).unwrap().value.magnitude;
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn hahn_refocuses_dc() {
        let s = seq(SequenceKind::Cpmg(1));
        // 4 sin^2(wT/4) / w ~ w T^2 / 4 near DC
        let w = 1e-3;
        let tiny = filter_closed_form(&s, w).unwrap().value.magnitude;
        assert!((tiny - w * T_PHI * T_PHI / 4.0).abs() < 1e-9 * tiny);
        assert_eq!(filter_closed_form(&s, 0.0).unwrap().value.magnitude, 0.0);
    }

    #[test]
    fn cpmg2_leads_hahn_by_quarter_turn() {
        let w = 2.0 * PI / T_PHI;
        let h = filter_closed_form(&seq(SequenceKind::Cpmg(1)), w)
            .unwrap()
            .value;
        let c = filter_closed_form(&seq(SequenceKind::Cpmg(2)), w)
            .unwrap()
            .value;
        assert!((h.magnitude - c.magnitude).abs() < 1e-12 * T_PHI);
        assert!((phase_difference(c.phase, h.phase).abs() - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ramsey_low_frequency_limit_is_window_length() {
        let s = seq(SequenceKind::Ramsey);
        let o = filter_numeric_oracle(&s, 1e-3).unwrap();
        assert!((o.magnitude - T_PHI).abs() < 1e-12 * T_PHI);
        assert_eq!(filter_numeric_oracle(&s, 0.0).unwrap().magnitude, T_PHI);
        let c = filter_closed_form(&s, 1e-3).unwrap().value;
        assert!((c.magnitude - T_PHI).abs() < 1e-12 * T_PHI);
    }

    #[test]
    fn singular_points_delegate_without_nan() {
        // cos(wT/2n) = 0 at wT = n pi (2k + 1)
        for n in 1..=6u32 {
            let s = seq(SequenceKind::Cpmg(n));
            let w = n as f64 * PI / T_PHI;
            let r = filter_closed_form(&s, w).unwrap();
            assert!(r.singular, "n = {n}");
            assert!(r.value.magnitude.is_finite());
            let near = filter_closed_form(&s, w * (1.0 + 1e-4)).unwrap();
            assert!(!near.singular);
            assert!((near.value.magnitude - r.value.magnitude).abs() < 1e-3 * T_PHI);
        }
    }

    #[test]
    fn negative_frequency_rejected() {
        assert!(filter_closed_form(&seq(SequenceKind::Cpmg(1)), -1.0).is_err());
        assert!(filter_numeric_oracle(&seq(SequenceKind::Cpmg(1)), -1.0).is_err());
    }

    #[test]
    fn cpmg2_zero_where_sin_half_vanishes() {
        // sin(wT/2) = 0 at w = 2 pi k / T; k = 2 avoids the sin^2(wT/8) double zero at k = 4
        let s = seq(SequenceKind::Cpmg(2));
        let g = filter_closed_form(&s, 2.0 * 2.0 * PI / T_PHI)
            .unwrap()
            .value;
        assert!(g.magnitude < 1e-12 * T_PHI);
    }

    #[test]
    fn f32_closed_form_tracks_f64() {
        let s32 = PulseSequence::<f32>::hahn(50e-6, 2).unwrap();
        let g = filter_closed_form(&s32, (2.0 * PI / T_PHI) as f32)
            .unwrap()
            .value;
        assert!((g.magnitude as f64 - 2.0 * T_PHI / PI).abs() < 1e-5 * T_PHI);
    }

    #[test]
    fn curve_csv_has_header_only_for_empty_range() {
        let csv = filter_curve_csv::<f64>(&seq(SequenceKind::Cpmg(1)), &[]).unwrap();
        assert_eq!(csv, "omega_rad_s,magnitude_s,phase_rad\n");
    }
}
