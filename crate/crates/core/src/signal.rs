//! Analytic AC field models, uniformly sampled series and one-sided amplitude spectra.
//!
//! Field convention: a component with amplitude `B`, frequency `f` and phase `phi` contributes
//! `B cos(2 pi f t + phi)`, the real part of `B e^{-i(wt + phi)}`.

use std::fmt::Write as _;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::{wrap_phase, Real};

/// One sinusoidal component of a magnetic field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalComponent<T> {
    /// Tesla.
    pub amplitude: T,
    /// Hz.
    pub frequency: T,
    /// Radians in `[-pi, pi)`.
    pub phase: T,
}

impl<T: Real> SignalComponent<T> {
    pub fn new(amplitude: T, frequency: T, phase: T) -> Result<Self> {
        if !(amplitude >= T::zero()) || !amplitude.is_finite() {
            return Err(invalid(
                "amplitude",
                format!("must be finite and >= 0, got {amplitude}"),
            ));
        }
        if !(frequency > T::zero()) || !frequency.is_finite() {
            return Err(invalid(
                "frequency",
                format!("must be finite and > 0, got {frequency}"),
            ));
        }
        if !phase.is_finite() {
            return Err(invalid("phase", "must be finite"));
        }
        Ok(Self {
            amplitude,
            frequency,
            phase: wrap_phase(phase),
        })
    }

    pub fn angular_frequency(&self) -> T {
        T::TAU() * self.frequency
    }

    pub fn evaluate(&self, t: T) -> T {
        self.amplitude * (self.angular_frequency() * t + self.phase).cos()
    }

    /// Exact integral over `[a, b]`, written around the midpoint to avoid cancellation.
    pub fn integrate(&self, a: T, b: T) -> T {
        let w = self.angular_frequency();
        let two = T::lit(2.0);
        let mid = (a + b) / two;
        let half = (b - a) / two;
        self.amplitude * two * (w * mid + self.phase).cos() * (w * half).sin() / w
    }
}

/// Components active on `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSegment<T> {
    pub start: T,
    pub end: T,
    pub components: Vec<SignalComponent<T>>,
}

/// A field known only through samples, linearly interpolated and zero outside its support.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform<T> {
    /// Samples in tesla.
    pub series: TimeSeries<T>,
}

impl<T: Real> SampledWaveform<T> {
    fn support(&self) -> (T, T) {
        let n = self.series.values.len();
        let span = if n == 0 {
            T::zero()
        } else {
            T::from_count(n - 1) / self.series.sample_rate
        };
        (self.series.start_time, self.series.start_time + span)
    }

    fn evaluate(&self, t: T) -> T {
        let v = &self.series.values;
        if v.len() < 2 {
            return T::zero();
        }
        let x = (t - self.series.start_time) * self.series.sample_rate;
        if x < T::zero() || x > T::from_count(v.len() - 1) {
            return T::zero();
        }
        let i = x.floor().to_usize().unwrap_or(0).min(v.len() - 2);
        let frac = x - T::from_count(i);
        v[i] + (v[i + 1] - v[i]) * frac
    }

    fn integrate(&self, a: T, b: T) -> T {
        let v = &self.series.values;
        if v.len() < 2 {
            return T::zero();
        }
        let (lo, hi) = self.support();
        let a = a.max(lo);
        let b = b.min(hi);
        if b <= a {
            return T::zero();
        }
        let fs = self.series.sample_rate;
        let dt = T::one() / fs;
        let xa = (a - lo) * fs;
        let xb = (b - lo) * fs;
        let last = v.len() - 2;
        let ia = xa.floor().to_usize().unwrap_or(0).min(last);
        let ib = xb.floor().to_usize().unwrap_or(0).min(last);
        let half = T::lit(0.5);
        let mut acc = T::zero();
        for i in ia..=ib {
            let t0 = (lo + T::from_count(i) * dt).max(a);
            let t1 = (lo + T::from_count(i + 1) * dt).min(b);
            if t1 > t0 {
                // linear interpolant: trapezoid is exact
                acc += (self.evaluate(t0) + self.evaluate(t1)) * half * (t1 - t0);
            }
        }
        acc
    }
}

/// Sum of stationary components, time-scheduled components and sampled waveforms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompositeSignal<T> {
    pub components: Vec<SignalComponent<T>>,
    schedule: Vec<ScheduleSegment<T>>,
    waveforms: Vec<SampledWaveform<T>>,
}

impl<T: Real> CompositeSignal<T> {
    pub fn new(components: Vec<SignalComponent<T>>) -> Self {
        Self {
            components,
            schedule: Vec::new(),
            waveforms: Vec::new(),
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    /// Attach a piecewise schedule. Segments must be ordered and non-overlapping.
    pub fn with_schedule(mut self, schedule: Vec<ScheduleSegment<T>>) -> Result<Self> {
        let mut prev_end = T::neg_infinity();
        for seg in &schedule {
            if !(seg.end > seg.start) {
                return Err(invalid("schedule", "segment end must exceed its start"));
            }
            if seg.start < prev_end {
                return Err(invalid(
                    "schedule",
                    "segments must be ordered and non-overlapping",
                ));
            }
            prev_end = seg.end;
        }
        self.schedule = schedule;
        Ok(self)
    }

    pub fn with_waveform(mut self, series: TimeSeries<T>) -> Result<Self> {
        if !(series.sample_rate > T::zero()) {
            return Err(invalid("sample_rate", "must be > 0"));
        }
        self.waveforms.push(SampledWaveform { series });
        Ok(self)
    }

    pub fn schedule(&self) -> &[ScheduleSegment<T>] {
        &self.schedule
    }

    pub fn waveforms(&self) -> &[SampledWaveform<T>] {
        &self.waveforms
    }

    /// True when the signal is only a sum of stationary tones.
    pub fn is_stationary(&self) -> bool {
        self.schedule.is_empty() && self.waveforms.is_empty()
    }

    /// Field value in tesla at time `t`.
    pub fn evaluate(&self, t: T) -> T {
        let mut acc = T::zero();
        for c in &self.components {
            acc += c.evaluate(t);
        }
        acc + self.evaluate_nonstationary(t)
    }

    /// Contribution of schedule segments and sampled waveforms only.
    pub fn evaluate_nonstationary(&self, t: T) -> T {
        let mut acc = T::zero();
        if let Some(seg) = self.active_segment(t) {
            for c in &seg.components {
                acc += c.evaluate(t);
            }
        }
        for w in &self.waveforms {
            acc += w.evaluate(t);
        }
        acc
    }

    fn active_segment(&self, t: T) -> Option<&ScheduleSegment<T>> {
        self.schedule.iter().find(|s| t >= s.start && t < s.end)
    }

    /// Exact integral of the schedule and waveform parts over `[a, b]`.
    pub fn integrate_nonstationary(&self, a: T, b: T) -> T {
        let mut acc = T::zero();
        for seg in &self.schedule {
            let lo = seg.start.max(a);
            let hi = seg.end.min(b);
            if hi > lo {
                for c in &seg.components {
                    acc += c.integrate(lo, hi);
                }
            }
        }
        for w in &self.waveforms {
            acc += w.integrate(a, b);
        }
        acc
    }

    /// Exact integral of the whole field over `[a, b]`.
    pub fn integrate(&self, a: T, b: T) -> T {
        let mut acc = self.integrate_nonstationary(a, b);
        for c in &self.components {
            acc += c.integrate(a, b);
        }
        acc
    }

    /// Every amplitude multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: T) -> Self {
        let scale = |c: &SignalComponent<T>| SignalComponent {
            amplitude: c.amplitude * factor,
            ..*c
        };
        Self {
            components: self.components.iter().map(scale).collect(),
            schedule: self
                .schedule
                .iter()
                .map(|s| ScheduleSegment {
                    start: s.start,
                    end: s.end,
                    components: s.components.iter().map(scale).collect(),
                })
                .collect(),
            waveforms: self
                .waveforms
                .iter()
                .map(|w| SampledWaveform {
                    series: TimeSeries {
                        values: w.series.values.iter().map(|&v| v * factor).collect(),
                        ..w.series.clone()
                    },
                })
                .collect(),
        }
    }

    /// Superposition of two signals. Fails if the combined schedule overlaps.
    pub fn superpose(&self, other: &Self) -> Result<Self> {
        let mut components = self.components.clone();
        components.extend(other.components.iter().copied());
        let mut schedule = self.schedule.clone();
        schedule.extend(other.schedule.iter().cloned());
        schedule.sort_by(|a, b| {
            a.start
                .partial_cmp(&b.start)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut out = Self::new(components).with_schedule(schedule)?;
        out.waveforms = self.waveforms.clone();
        out.waveforms.extend(other.waveforms.iter().cloned());
        Ok(out)
    }
}

/// Uniformly sampled series: sample `i` sits at `start_time + i / sample_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T, V = T> {
    pub sample_rate: T,
    pub start_time: T,
    pub values: Vec<V>,
}

impl<T: Real, V> TimeSeries<T, V> {
    pub fn new(sample_rate: T, start_time: T, values: Vec<V>) -> Result<Self> {
        if !(sample_rate > T::zero()) || !sample_rate.is_finite() {
            return Err(invalid(
                "sample_rate",
                format!("must be > 0, got {sample_rate}"),
            ));
        }
        Ok(Self {
            sample_rate,
            start_time,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> T {
        self.start_time + T::from_count(i) / self.sample_rate
    }

    pub fn duration(&self) -> T {
        T::from_count(self.values.len()) / self.sample_rate
    }
}

/// Sample `signal` on a uniform grid.
pub fn sample_signal<T: Real>(
    signal: &CompositeSignal<T>,
    duration: T,
    sample_rate: T,
) -> Result<TimeSeries<T>> {
    if !(duration >= T::zero()) {
        return Err(invalid("duration", "must be >= 0"));
    }
    let n = (duration * sample_rate).floor().to_usize().unwrap_or(0);
    let values = (0..n)
        .map(|i| signal.evaluate(T::from_count(i) / sample_rate))
        .collect();
    TimeSeries::new(sample_rate, T::zero(), values)
}

/// Sum of tones `(frequency, amplitude, phase)` sampled over `duration`.
pub fn synthesize_tones<T: Real>(
    specs: &[(T, T, T)],
    duration: T,
    sample_rate: T,
) -> Result<TimeSeries<T>> {
    let mut components = Vec::with_capacity(specs.len());
    for &(f, a, p) in specs {
        if !(sample_rate > T::lit(2.0) * f) {
            return Err(Error::Nyquist {
                frequency: f.to_f64_lossy(),
                sample_rate: sample_rate.to_f64_lossy(),
                required: 2.0 * f.to_f64_lossy(),
            });
        }
        components.push(SignalComponent::new(a, f, p)?);
    }
    sample_signal(&CompositeSignal::new(components), duration, sample_rate)
}

/// Sign bookkeeping for heterodyne spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignStatus {
    Confirmed,
    Ambiguous,
    RejectedNoise,
}

impl SignStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SignStatus::Confirmed => "confirmed",
            SignStatus::Ambiguous => "ambiguous",
            SignStatus::RejectedNoise => "rejected_noise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumBin<T> {
    /// Hz.
    pub frequency: T,
    /// Peak amplitude in the series' unit (tesla for field spectra).
    pub amplitude: T,
    /// Radians, cosine convention.
    pub phase: T,
    pub sign_status: SignStatus,
}

/// One-sided amplitude spectrum with strictly increasing frequencies.
///
/// Amplitudes are peak amplitudes: an on-bin tone `A cos(2 pi f t + p)` reads as amplitude `A`
/// and phase `p`. For a rectangular window Parseval then reads
/// `mean(x^2) = a_0^2 + sum_k a_k^2 / 2` (with the Nyquist bin counted like DC).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub bins: Vec<SpectrumBin<T>>,
    /// Frequency spacing of the transform, Hz (zero for merged spectra).
    pub resolution: T,
}

impl<T: Real> Spectrum<T> {
    /// Sorts bins by frequency and checks the invariants.
    pub fn from_bins(mut bins: Vec<SpectrumBin<T>>, resolution: T) -> Result<Self> {
        bins.sort_by(|a, b| {
            a.frequency
                .partial_cmp(&b.frequency)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for w in bins.windows(2) {
            if !(w[1].frequency > w[0].frequency) {
                return Err(invalid(
                    "spectrum",
                    "frequencies must be strictly increasing",
                ));
            }
        }
        if bins.iter().any(|b| !(b.amplitude >= T::zero())) {
            return Err(invalid("spectrum", "amplitudes must be >= 0"));
        }
        Ok(Self { bins, resolution })
    }

    pub fn empty() -> Self {
        Self {
            bins: Vec::new(),
            resolution: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Index of the largest-amplitude bin.
    pub fn peak(&self) -> Option<&SpectrumBin<T>> {
        self.bins.iter().max_by(|a, b| {
            a.amplitude
                .partial_cmp(&b.amplitude)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    }

    pub fn with_status(&self, status: SignStatus) -> impl Iterator<Item = &SpectrumBin<T>> {
        self.bins.iter().filter(move |b| b.sign_status == status)
    }

    /// CSV with header `frequency_hz,amplitude_tesla,phase_rad,sign_status`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency_hz,amplitude_tesla,phase_rad,sign_status\n");
        for b in &self.bins {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                b.frequency.to_f64_lossy(),
                b.amplitude.to_f64_lossy(),
                b.phase.to_f64_lossy(),
                b.sign_status.as_str()
            );
        }
        out
    }
}

/// Analysis windows, normalised to unit coherent gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
    /// 4-term Blackman-Harris, sidelobes near -92 dB.
    BlackmanHarris,
}

impl Window {
    /// Raw window coefficients (periodic form) of length `n`.
    pub fn coefficients<T: Real>(self, n: usize) -> Vec<T> {
        let nn = n as f64;
        (0..n)
            .map(|i| {
                let x = std::f64::consts::TAU * i as f64 / nn;
                let w = match self {
                    Window::Rectangular => 1.0,
                    Window::Hann => 0.5 - 0.5 * x.cos(),
                    Window::BlackmanHarris => {
                        0.35875 - 0.48829 * x.cos() + 0.14128 * (2.0 * x).cos()
                            - 0.01168 * (3.0 * x).cos()
                    }
                };
                T::lit(w)
            })
            .collect()
    }
}

/// One-sided amplitude/phase spectrum with a rectangular window.
pub fn fft_magnitude<T: Real>(series: &TimeSeries<T>) -> Result<Spectrum<T>> {
    fft_spectrum(series, Window::Rectangular)
}

/// One-sided amplitude/phase spectrum. Amplitudes are divided by the window's coherent gain.
pub fn fft_spectrum<T: Real>(series: &TimeSeries<T>, window: Window) -> Result<Spectrum<T>> {
    let n = series.values.len();
    if n < 2 {
        return Err(invalid(
            "series",
            format!("need at least 2 samples, got {n}"),
        ));
    }
    let w: Vec<T> = window.coefficients(n);
    let gain = w.iter().fold(T::zero(), |a, &b| a + b);
    let mut buf: Vec<Complex<T>> = series
        .values
        .iter()
        .zip(&w)
        .map(|(&x, &wi)| Complex::new(x * wi, T::zero()))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let df = series.sample_rate / T::from_count(n);
    let two = T::lit(2.0);
    let bins = (0..=n / 2)
        .map(|k| {
            let edge = k == 0 || (n.is_multiple_of(2) && k == n / 2);
            let scale = if edge { T::one() } else { two } / gain;
            // account for a non-zero start time so that phases refer to t = 0
            let rot = Complex::from_polar(
                T::one(),
                T::TAU() * df * T::from_count(k) * series.start_time,
            );
            let z = buf[k] * rot;
            SpectrumBin {
                frequency: df * T::from_count(k),
                amplitude: z.norm() * scale,
                phase: z.arg(),
                sign_status: SignStatus::Ambiguous,
            }
        })
        .collect();
    Ok(Spectrum {
        bins,
        resolution: df,
    })
}

/// Total harmonic distortion `sqrt(sum_{k=2..=harmonics} A_k^2) / A_1` of a tone at
/// `fundamental` Hz, with each `A_k` read from a Hann-windowed DTFT at `k * fundamental`.
pub fn total_harmonic_distortion<T: Real>(
    series: &TimeSeries<T>,
    fundamental: T,
    harmonics: usize,
) -> Result<T> {
    if harmonics < 2 {
        return Err(invalid("harmonics", "need at least the second harmonic"));
    }
    if !(fundamental > T::zero()) {
        return Err(invalid("fundamental", "must be > 0"));
    }
    let top = fundamental * T::from_count(harmonics);
    if top >= series.sample_rate / T::lit(2.0) {
        return Err(Error::Nyquist {
            frequency: top.to_f64_lossy(),
            sample_rate: series.sample_rate.to_f64_lossy(),
            required: (top * T::lit(2.0)).to_f64_lossy(),
        });
    }
    let w: Vec<T> = Window::Hann.coefficients(series.values.len());
    let amp = |f: T| {
        let step = T::TAU() * f / series.sample_rate;
        series
            .values
            .iter()
            .zip(&w)
            .enumerate()
            .fold(Complex::new(T::zero(), T::zero()), |acc, (i, (&x, &wi))| {
                acc + Complex::from_polar(x * wi, -step * T::from_count(i))
            })
            .norm()
    };
    let a1 = amp(fundamental);
    if a1 == T::zero() {
        return Err(Error::Empty("fundamental has no energy"));
    }
    let rest = (2..=harmonics)
        .map(|k| amp(fundamental * T::from_count(k)).powi(2))
        .fold(T::zero(), |a, b| a + b);
    Ok(rest.sqrt() / a1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(a: f64, f: f64, p: f64) -> SignalComponent<f64> {
        SignalComponent::new(a, f, p).unwrap()
    }

    #[test]
    fn single_component_at_zero_and_quarter_period() {
        let s = CompositeSignal::new(vec![tone(1e-9, 20e3, 0.0)]);
        assert!((s.evaluate(0.0) - 1e-9).abs() < 1e-24);
        assert!(s.evaluate(12.5e-6).abs() < 1e-22);
    }

    #[test]
    fn component_rejects_bad_parameters() {
        assert!(SignalComponent::new(-1.0, 1.0, 0.0).is_err());
        assert!(SignalComponent::new(1.0, 0.0, 0.0).is_err());
        assert!(SignalComponent::new(1.0, 1.0, f64::NAN).is_err());
        let c = tone(1.0, 1.0, 3.0 * PI);
        assert!((c.phase + PI).abs() < 1e-12);
    }

    #[test]
    fn schedule_evaluates_to_zero_outside_segments() {
        let seg = |a: f64, b: f64| ScheduleSegment {
            start: a,
            end: b,
            components: vec![tone(1.0, 10.0, 0.0)],
        };
        let s = CompositeSignal::empty()
            .with_schedule(vec![seg(0.0, 0.1), seg(0.2, 0.3)])
            .unwrap();
        assert_eq!(s.evaluate(0.15), 0.0);
        assert_eq!(s.evaluate(-1.0), 0.0);
        assert!((s.evaluate(0.2) - (2.0 * PI * 10.0 * 0.2).cos()).abs() < 1e-12);
        assert!(CompositeSignal::<f64>::empty()
            .with_schedule(vec![seg(0.0, 0.3), seg(0.2, 0.4)])
            .is_err());
    }

    #[test]
    fn component_integral_matches_antiderivative() {
        let c = tone(2.0, 3.0, 0.4);
        let w = 2.0 * PI * 3.0;
        let exact = 2.0 * ((w * 0.7 + 0.4).sin() - (w * 0.1 + 0.4).sin()) / w;
        assert!((c.integrate(0.1, 0.7) - exact).abs() < 1e-14);
    }

    #[test]
    fn sampled_waveform_interpolates_and_integrates_linearly() {
        let series = TimeSeries::<f64>::new(10.0, 1.0, vec![0.0, 1.0, 3.0]).unwrap();
        let s = CompositeSignal::empty().with_waveform(series).unwrap();
        assert!((s.evaluate(1.05) - 0.5).abs() < 1e-12);
        assert!((s.evaluate(1.15) - 2.0).abs() < 1e-12);
        assert_eq!(s.evaluate(0.9), 0.0);
        assert_eq!(s.evaluate(1.3), 0.0);
        // trapezoid areas 0.05 + 0.2
        assert!((s.integrate(0.0, 2.0) - 0.25).abs() < 1e-12);
        assert!((s.integrate(1.05, 1.15) - (0.75 * 0.05 + 1.5 * 0.05)).abs() < 1e-12);
    }

    #[test]
    fn empty_and_cancelling_tones_give_zero_series() {
        let z = synthesize_tones::<f64>(&[], 0.01, 1e4).unwrap();
        assert_eq!(z.len(), 100);
        assert!(z.values.iter().all(|&v| v == 0.0));
        let c = synthesize_tones(&[(50.0, 1.0, 0.0), (50.0, 1.0, PI)], 0.1, 1e4).unwrap();
        assert!(c.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn synthesize_rejects_nyquist_violation() {
        let err = synthesize_tones(&[(600.0, 1.0, 0.0)], 1.0, 1000.0).unwrap_err();
        assert!(matches!(err, Error::Nyquist { .. }));
    }

    #[test]
    fn tone_523_peaks_at_523() {
        let s = synthesize_tones::<f64>(&[(523.0, 1.0, 0.0)], 1.0, 1e5).unwrap();
        let spec = fft_magnitude(&s).unwrap();
        let p = spec.peak().unwrap();
        assert!((p.frequency - 523.0).abs() < 1e-9);
        assert!((p.amplitude - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dc_series_has_all_energy_in_bin_zero() {
        let s = TimeSeries::<f64>::new(100.0, 0.0, vec![0.7; 64]).unwrap();
        let spec = fft_magnitude(&s).unwrap();
        assert!((spec.bins[0].amplitude - 0.7).abs() < 1e-12);
        assert!(spec.bins[1..].iter().all(|b| b.amplitude < 1e-12));
    }

    #[test]
    fn fft_phase_follows_cosine_convention() {
        let s = synthesize_tones::<f64>(&[(10.0, 0.5, 0.3)], 1.0, 200.0).unwrap();
        let spec = fft_magnitude(&s).unwrap();
        let b = spec.bins[10];
        assert!((b.amplitude - 0.5).abs() < 1e-12);
        assert!((b.phase - 0.3).abs() < 1e-12);
    }

    #[test]
    fn windowed_spectrum_keeps_on_bin_amplitude() {
        let s = synthesize_tones::<f64>(&[(12.0, 2.0, 0.0)], 2.0, 256.0).unwrap();
        for w in [Window::Hann, Window::BlackmanHarris] {
            let spec = fft_spectrum(&s, w).unwrap();
            assert!((spec.peak().unwrap().amplitude - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn spectrum_csv_header_and_rows() {
        let s = Spectrum::from_bins(
            vec![SpectrumBin {
                frequency: 1.0,
                amplitude: 2.0,
                phase: 0.0,
                sign_status: SignStatus::RejectedNoise,
            }],
            0.1,
        )
        .unwrap();
        let csv = s.to_csv();
        assert!(csv.starts_with("frequency_hz,amplitude_tesla,phase_rad,sign_status\n"));
        assert!(csv.contains("rejected_noise"));
    }

    #[test]
    fn spectrum_rejects_duplicate_frequencies() {
        let b = SpectrumBin {
            frequency: 1.0,
            amplitude: 1.0,
            phase: 0.0,
            sign_status: SignStatus::Confirmed,
        };
        assert!(Spectrum::from_bins(vec![b, b], 0.0).is_err());
    }

    #[test]
    fn thd_of_clipped_and_pure_tones() {
        let rate = 1000.0;
        let pure: Vec<f64> = (0..4000)
            .map(|i| (2.0 * PI * 10.0 * i as f64 / rate).sin())
            .collect();
        let series = TimeSeries::new(rate, 0.0, pure.clone()).unwrap();
        assert!(total_harmonic_distortion(&series, 10.0, 5).unwrap() < 1e-6);
        // second harmonic at 10 % of the fundamental
        let bent: Vec<f64> = pure
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.1 * (2.0 * PI * 20.0 * i as f64 / rate).sin())
            .collect();
        let thd =
            total_harmonic_distortion(&TimeSeries::new(rate, 0.0, bent).unwrap(), 10.0, 5).unwrap();
        assert!((thd - 0.1).abs() < 1e-6, "{thd}");
        assert!(total_harmonic_distortion(&series, 100.0, 5).is_err());
    }
}
