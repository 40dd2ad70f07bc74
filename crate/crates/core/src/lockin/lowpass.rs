use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::num::Real;

/// Cascade of identical one-pole low-pass stages `y += a (x - y)`, `a = 1 - exp(-2 pi f_c / f_s)`.
#[derive(Debug, Clone)]
pub struct OnePoleCascade<T> {
    alpha: T,
    state: Vec<T>,
}

impl<T: Real> OnePoleCascade<T> {
    pub fn new(cutoff: T, sample_rate: T, order: usize) -> Result<Self> {
        if !(cutoff > T::zero()) || !(sample_rate > T::zero()) {
            return Err(invalid("cutoff", "cutoff and sample rate must be > 0"));
        }
        if cutoff >= sample_rate / T::lit(2.0) {
            return Err(invalid("cutoff", "must lie below the Nyquist frequency"));
        }
        if order == 0 {
            return Err(invalid("filter_order", "must be >= 1"));
        }
        let alpha = T::one() - (-T::TAU() * cutoff / sample_rate).exp();
        Ok(Self {
            alpha,
            state: vec![T::zero(); order],
        })
    }

    pub fn order(&self) -> usize {
        self.state.len()
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = T::zero());
    }

    pub fn process(&mut self, x: T) -> T {
        let mut v = x;
        for s in &mut self.state {
            *s += self.alpha * (v - *s);
            v = *s;
        }
        v
    }

    /// Complex response of the whole cascade at `freq` for sample rate `sample_rate`.
    pub fn response(&self, freq: T, sample_rate: T) -> Complex<T> {
        let z = Complex::from_polar(T::one(), -T::TAU() * freq / sample_rate);
        let one = Complex::new(T::one(), T::zero());
        let stage = Complex::new(self.alpha, T::zero()) / (one - z * (T::one() - self.alpha));
        stage.powu(self.state.len() as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unity_dc_gain() {
        let mut f = OnePoleCascade::<f64>::new(20.0, 1000.0, 4).unwrap();
        let mut y: f64 = 0.0;
        for _ in 0..2000 {
            y = f.process(1.5);
        }
        assert!((y - 1.5).abs() < 1e-12);
        assert!((f.response(0.0, 1000.0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measured_gain_matches_response() {
        let (fs, fc, f0) = (5000.0, 200.0, 300.0);
        let mut filt = OnePoleCascade::new(fc, fs, 4).unwrap();
        let n = 20_000;
        let mut peak: f64 = 0.0;
        for i in 0..n {
            let y = filt.process((std::f64::consts::TAU * f0 * i as f64 / fs).sin());
            if i > n / 2 {
                peak = peak.max(y.abs());
            }
        }
        let h = filt.response(f0, fs).norm();
        assert!((peak - h).abs() < 1e-3 * h);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(OnePoleCascade::<f64>::new(0.0, 1.0, 1).is_err());
        assert!(OnePoleCascade::<f64>::new(600.0, 1000.0, 1).is_err());
        assert!(OnePoleCascade::<f64>::new(10.0, 1000.0, 0).is_err());
    }
}
