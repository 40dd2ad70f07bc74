use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};
use crate::num::Real;

/// Band-limited change of length: the spectrum of `x` is copied onto a grid of `len` bins,
/// truncating or zero-padding above the shorter Nyquist limit. Tones keep their amplitude.
pub fn fft_resize<T: Real>(x: &[T], len: usize) -> Vec<T> {
    let n = x.len();
    if n == 0 || len == 0 {
        return vec![T::zero(); len];
    }
    if len == n {
        return x.to_vec();
    }
    let mut planner = FftPlanner::<T>::new();
    let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    planner.plan_fft_forward(n).process(&mut buf);

    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![zero; len];
    let keep = n.min(len);
    let positive = keep.div_ceil(2);
    out[..positive].copy_from_slice(&buf[..positive]);
    for k in 1..positive {
        out[len - k] = buf[n - k];
    }
    if keep.is_multiple_of(2) {
        let k = keep / 2;
        if len > n {
            // split the old Nyquist bin between +k and -k
            let half = buf[k] * T::lit(0.5);
            out[k] = half;
            out[len - k] = half;
        } else {
            out[k] = buf[k] + buf[n - k];
        }
    }
    planner.plan_fft_inverse(len).process(&mut out);
    let scale = T::one() / T::from_count(n);
    out.into_iter().map(|z| z.re * scale).collect()
}

/// Second-order IIR section in direct form I.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad<T> {
    b: [T; 3],
    a: [T; 2],
    x: [T; 2],
    y: [T; 2],
}

impl<T: Real> Biquad<T> {
    /// Notch at `freq` with quality factor `q`: unity gain at DC and Nyquist, zero at `freq`.
    pub fn notch(freq: T, q: T, sample_rate: T) -> Result<Self> {
        if !(freq > T::zero() && freq < sample_rate / T::lit(2.0)) {
            return Err(invalid(
                "notch_freq",
                format!("need 0 < f < {}, got {freq}", sample_rate / T::lit(2.0)),
            ));
        }
        if !(q > T::zero()) {
            return Err(invalid("notch_q", "must be > 0"));
        }
        let w0 = T::TAU() * freq / sample_rate;
        let alpha = w0.sin() / (T::lit(2.0) * q);
        let c = T::lit(-2.0) * w0.cos();
        let a0 = T::one() + alpha;
        Ok(Self {
            b: [T::one() / a0, c / a0, T::one() / a0],
            a: [c / a0, (T::one() - alpha) / a0],
            x: [T::zero(); 2],
            y: [T::zero(); 2],
        })
    }

    pub fn process(&mut self, v: T) -> T {
        let out = self.b[0] * v + self.b[1] * self.x[0] + self.b[2] * self.x[1]
            - self.a[0] * self.y[0]
            - self.a[1] * self.y[1];
        self.x = [v, self.x[0]];
        self.y = [out, self.y[0]];
        out
    }

    /// Complex gain at `freq`.
    pub fn response(&self, freq: T, sample_rate: T) -> Complex<T> {
        let z1 = Complex::from_polar(T::one(), -T::TAU() * freq / sample_rate);
        let z2 = z1 * z1;
        let one = Complex::new(T::one(), T::zero());
        (one * self.b[0] + z1 * self.b[1] + z2 * self.b[2])
            / (one + z1 * self.a[0] + z2 * self.a[1])
    }
}

/// Largest normalised cross-correlation of `a` and `b` over lags `-max_lag..=max_lag`, with the
/// lag at which it occurs. Each lag is normalised by the energies of the overlapping parts.
pub fn normalized_cross_correlation(a: &[f64], b: &[f64], max_lag: usize) -> (f64, isize) {
    let mut best = (0.0, 0);
    let max_lag = max_lag as isize;
    for lag in -max_lag..=max_lag {
        let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
        for (i, &x) in a.iter().enumerate() {
            let j = i as isize + lag;
            if j < 0 || j as usize >= b.len() {
                continue;
            }
            let y = b[j as usize];
            ab += x * y;
            aa += x * x;
            bb += y * y;
        }
        if aa > 0.0 && bb > 0.0 {
            let r = ab / (aa * bb).sqrt();
            if r > best.0 {
                best = (r, lag);
            }
        }
    }
    best
}

/// Magnitude spectrum summed into `band` Hz wide bins up to `max_freq` (Hann window, power
/// summed per bin, square root taken).
pub fn band_spectrum(samples: &[f64], sample_rate: f64, band: f64, max_freq: f64) -> Vec<f64> {
    let n = samples.len();
    let bands = (max_freq / band).ceil() as usize;
    let mut out = vec![0.0; bands];
    if n < 2 {
        return out;
    }
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos();
            Complex::new(v * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = sample_rate / n as f64;
    for (k, z) in buf.iter().enumerate().take(n / 2 + 1) {
        let f = k as f64 * df;
        if f >= max_freq {
            break;
        }
        out[(f / band) as usize] += z.norm_sqr();
    }
    out.iter_mut().for_each(|v| *v = v.sqrt());
    out
}

/// Cosine similarity of two non-negative vectors.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Frequencies below which `lo_frac` and `hi_frac` of the signal energy lie.
pub fn energy_band(samples: &[f64], sample_rate: f64, lo_frac: f64, hi_frac: f64) -> (f64, f64) {
    let n = samples.len();
    if n < 2 {
        return (0.0, 0.0);
    }
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf[..=n / 2].iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if total == 0.0 {
        return (0.0, 0.0);
    }
    let df = sample_rate / n as f64;
    let (mut lo, mut hi) = (None, None);
    let mut acc = 0.0;
    for (k, p) in power.iter().enumerate() {
        acc += p;
        if lo.is_none() && acc >= lo_frac * total {
            lo = Some(k as f64 * df);
        }
        if hi.is_none() && acc >= hi_frac * total {
            hi = Some(k as f64 * df);
            break;
        }
    }
    (lo.unwrap_or(0.0), hi.unwrap_or(sample_rate / 2.0))
}
