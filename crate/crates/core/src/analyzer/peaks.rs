use num_complex::Complex64;

use crate::signal::{Spectrum, TimeSeries, Window};

/// Peak acceptance rules for a phase-trace spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    /// Multiple of the robust standard deviation (`1.4826 * MAD`) above the median amplitude.
    pub threshold_mad: f64,
    /// Minimum amplitude as a fraction of the strongest bin in the search range.
    pub relative_floor: f64,
    /// Minimum amplitude in the series' unit.
    pub absolute_floor: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            threshold_mad: 5.0,
            relative_floor: 1e-3,
            absolute_floor: 1e-9,
        }
    }
}

/// A refined spectral line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Hz.
    pub frequency: f64,
    pub amplitude: f64,
    /// rad, cosine convention referred to `t = 0`.
    pub phase: f64,
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Scale from the median absolute deviation to the standard deviation of a normal variable.
pub const MAD_TO_SIGMA: f64 = 1.4826;

/// `median + k * 1.4826 * MAD` of `amplitudes`.
pub fn noise_threshold(amplitudes: &[f64], k: f64) -> f64 {
    let mut v = amplitudes.to_vec();
    let med = median(&mut v);
    let mut dev: Vec<f64> = amplitudes.iter().map(|a| (a - med).abs()).collect();
    med + k * MAD_TO_SIGMA * median(&mut dev)
}

/// Windowed DTFT of a series at `freq`, normalised so that `A cos(2 pi f t + p)` maps to
/// `A e^{ip}`.
pub fn windowed_dtft(series: &TimeSeries<f64>, window: &[f64], freq: f64) -> Complex64 {
    let gain: f64 = window.iter().sum();
    let step = Complex64::from_polar(1.0, -std::f64::consts::TAU * freq / series.sample_rate);
    let mut rot = Complex64::from_polar(1.0, -std::f64::consts::TAU * freq * series.start_time);
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, w) in series.values.iter().zip(window) {
        acc += rot * (x * w);
        rot *= step;
    }
    acc * (2.0 / gain)
}

/// Golden-section maximisation of the windowed DTFT magnitude on `[lo, hi]`.
pub fn refine_peak(
    series: &TimeSeries<f64>,
    window: &[f64],
    lo: f64,
    hi: f64,
    iterations: usize,
) -> Peak {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = windowed_dtft(series, window, c).norm();
    let mut fd = windowed_dtft(series, window, d).norm();
    for _ in 0..iterations {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = windowed_dtft(series, window, c).norm();
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = windowed_dtft(series, window, d).norm();
        }
    }
    let f = 0.5 * (a + b);
    let z = windowed_dtft(series, window, f);
    Peak {
        frequency: f,
        amplitude: z.norm(),
        phase: z.arg(),
    }
}

/// Bins per block of the local noise-floor estimate.
pub const NOISE_BLOCK: usize = 256;

/// Per-bin [`noise_threshold`] taken over consecutive blocks of [`NOISE_BLOCK`] bins, so that a
/// floor shaped by the demodulator filter is followed. A short tail joins the previous block.
pub fn local_thresholds(amplitudes: &[f64], k: f64) -> Vec<f64> {
    let n = amplitudes.len();
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = (start + NOISE_BLOCK).min(n);
        if n - end < NOISE_BLOCK / 2 {
            end = n;
        }
        let t = noise_threshold(&amplitudes[start..end], k);
        out.extend(std::iter::repeat_n(t, end - start));
        start = end;
    }
    out
}

/// Local maxima of a Blackman-Harris spectrum of `series` up to `max_freq`, refined to
/// sub-bin accuracy.
pub fn find_peaks(
    series: &TimeSeries<f64>,
    spectrum: &Spectrum<f64>,
    max_freq: f64,
    opts: &PeakOptions,
) -> Vec<Peak> {
    let upto = spectrum
        .bins
        .iter()
        .position(|b| b.frequency > max_freq)
        .unwrap_or(spectrum.bins.len());
    if upto < 3 {
        return Vec::new();
    }
    let amps: Vec<f64> = spectrum.bins[..upto].iter().map(|b| b.amplitude).collect();
    let strongest = amps[1..].iter().cloned().fold(0.0, f64::max);
    let floor = (opts.relative_floor * strongest).max(opts.absolute_floor);
    let local = local_thresholds(&amps[1..], opts.threshold_mad);
    let window = Window::BlackmanHarris.coefficients::<f64>(series.len());
    let df = spectrum.resolution;
    let last = spectrum.bins.len() - 1;
    (1..upto)
        .filter(|&k| {
            let a = amps[k];
            let right = if k + 1 < upto {
                amps[k + 1]
            } else {
                spectrum.bins[(k + 1).min(last)].amplitude
            };
            a > floor && a > local[k - 1] && a > amps[k - 1] && a >= right
        })
        .map(|k| {
            let f = spectrum.bins[k].frequency;
            refine_peak(series, &window, (f - df).max(0.0), f + df, 30)
        })
        .collect()
}
