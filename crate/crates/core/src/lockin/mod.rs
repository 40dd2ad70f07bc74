//! Two-stage demodulation of readout traces and the noise/sensitivity formulas.

mod estimate;
mod lowpass;

pub use estimate::{
    ldr_db, lsq_phase_fit, phase_noise, phase_noise_from, sensitivity, sensitivity_fluorescence,
    PhaseFit, UNDEFINED_PHASE_RATIO,
};
pub use lowpass::OnePoleCascade;

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::num::{wrap_phase, Real};
use crate::sensor::ReadoutTrace;
use crate::signal::TimeSeries;

/// Second demodulator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockInConfig {
    /// Hz, equal to the drive offset `df`.
    pub demod2_freq: f64,
    /// Hz, cutoff of every low-pass stage.
    pub cutoff: f64,
    pub filter_order: usize,
    /// `f_s / df`.
    pub samples_per_cycle: usize,
}

impl LockInConfig {
    pub fn new(
        demod2_freq: f64,
        cutoff: f64,
        filter_order: usize,
        samples_per_cycle: usize,
    ) -> Result<Self> {
        if !(demod2_freq > 0.0) {
            return Err(invalid("demod2_freq", "must be > 0"));
        }
        if samples_per_cycle < 4 || !samples_per_cycle.is_multiple_of(2) {
            return Err(Error::OddSamplesPerCycle {
                ratio: samples_per_cycle as f64,
            });
        }
        if !(cutoff > 0.0 && cutoff < demod2_freq) {
            return Err(invalid(
                "cutoff",
                format!("need 0 < f_c < df, got f_c = {cutoff} Hz, df = {demod2_freq} Hz"),
            ));
        }
        if filter_order == 0 {
            return Err(invalid("filter_order", "must be >= 1"));
        }
        Ok(Self {
            demod2_freq,
            cutoff,
            filter_order,
            samples_per_cycle,
        })
    }

    /// Configuration for a pair rate `sample_rate`, deriving `N = sample_rate / df`.
    pub fn for_rate(
        sample_rate: f64,
        demod2_freq: f64,
        cutoff: f64,
        filter_order: usize,
    ) -> Result<Self> {
        let n = crate::sensor::samples_per_cycle(sample_rate, demod2_freq)?;
        Self::new(demod2_freq, cutoff, filter_order, n)
    }

    pub fn sample_rate(&self) -> f64 {
        self.demod2_freq * self.samples_per_cycle as f64
    }

    /// Seconds discarded while the cascade settles, `7 order / (2 pi f_c)`.
    pub fn settle_time(&self) -> f64 {
        7.0 * self.filter_order as f64 / (std::f64::consts::TAU * self.cutoff)
    }

    /// Whole samples covering [`Self::settle_time`].
    pub fn settle_samples(&self) -> usize {
        (self.settle_time() * self.sample_rate()).ceil() as usize
    }

    pub fn filter(&self) -> OnePoleCascade<f64> {
        OnePoleCascade::new(self.cutoff, self.sample_rate(), self.filter_order)
            .expect("validated config")
    }
}

/// Output of the second demodulator.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodOutput {
    pub sample_rate: f64,
    pub start_time: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `atan2(y, x)` in `[-pi, pi)`.
    pub phase: Vec<f64>,
    /// Nearest-branch continuation of `phase`.
    pub unwrapped: Vec<f64>,
    pub amplitude: Vec<f64>,
    /// Indices where the wrapped phase moved by more than `pi / 2` in one sample.
    pub phase_slips: Vec<usize>,
}

/// Per-sample phase jump above which a slip is recorded.
pub const JUMP_TOLERANCE: f64 = std::f64::consts::FRAC_PI_2;

impl DemodOutput {
    fn from_quadratures(sample_rate: f64, start_time: f64, x: Vec<f64>, y: Vec<f64>) -> Self {
        let phase: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(&a, &b)| wrap_phase(b.atan2(a)))
            .collect();
        let amplitude = x.iter().zip(&y).map(|(a, b)| a.hypot(*b)).collect();
        let mut unwrapped = Vec::with_capacity(phase.len());
        let mut phase_slips = Vec::new();
        for (i, &p) in phase.iter().enumerate() {
            match unwrapped.last() {
                None => unwrapped.push(p),
                Some(&prev) => {
                    let d = wrap_phase(p - prev);
                    if d.abs() > JUMP_TOLERANCE {
                        phase_slips.push(i);
                    }
                    unwrapped.push(prev + d);
                }
            }
        }
        Self {
            sample_rate,
            start_time,
            x,
            y,
            phase,
            unwrapped,
            amplitude,
            phase_slips,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.sample_rate
    }

    /// Unwrapped phase from sample `skip` on, as a series.
    pub fn phase_series(&self, skip: usize) -> Result<TimeSeries<f64>> {
        let skip = skip.min(self.len());
        TimeSeries::new(
            self.sample_rate,
            self.time(skip),
            self.unwrapped[skip..].to_vec(),
        )
    }

    /// Phase of the quadratures averaged over whole `cycle`-sample blocks after `skip`.
    ///
    /// Averaging over complete cycles cancels the residual `2 df` ripple.
    pub fn mean_phase(&self, skip: usize, cycle: usize) -> Result<f64> {
        let avail = self.len().saturating_sub(skip);
        let used = avail
            .checked_div(cycle)
            .map_or(avail, |blocks| blocks * cycle);
        if used == 0 {
            return Err(Error::Empty("settled demodulator output"));
        }
        let xs: f64 = self.x[skip..skip + used].iter().sum();
        let ys: f64 = self.y[skip..skip + used].iter().sum();
        Ok(wrap_phase(ys.atan2(xs)))
    }

    /// CSV `t_seconds,X,Y,phase_rad,amplitude`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_seconds,X,Y,phase_rad,amplitude\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.time(i),
                self.x[i],
                self.y[i],
                self.phase[i],
                self.amplitude[i]
            );
        }
        out
    }
}

/// Pairwise difference `s_j = F+ - F-` at the pair rate.
pub fn demod_stage1(trace: &ReadoutTrace) -> Result<TimeSeries<f64>> {
    if trace.is_empty() {
        return Err(Error::Empty("readout trace"));
    }
    let values = trace.counts.iter().map(|(p, m)| p - m).collect();
    TimeSeries::new(trace.pair_rate(), 0.0, values)
}

/// Quadrature demodulation at `df`: `X = 2 lp(s sin wt)`, `Y = 2 lp(s cos wt)`.
///
/// A pure `A sin(wt + phi)` gives `X = A cos(phi)`, `Y = A sin(phi)`.
pub fn demod_stage2(series: &TimeSeries<f64>, config: &LockInConfig) -> Result<DemodOutput> {
    let expected = config.sample_rate();
    if (series.sample_rate - expected).abs() > 1e-9 * expected {
        return Err(Error::RateMismatch {
            expected,
            actual: series.sample_rate,
        });
    }
    let offset = std::f64::consts::TAU * config.demod2_freq * series.start_time;
    let step = std::f64::consts::TAU / config.samples_per_cycle as f64;
    let mut fx = config.filter();
    let mut fy = config.filter();
    let mut x = Vec::with_capacity(series.len());
    let mut y = Vec::with_capacity(series.len());
    for (i, &s) in series.values.iter().enumerate() {
        // whole cycles dropped from the argument to keep precision on long traces
        let arg = offset + step * (i % config.samples_per_cycle) as f64;
        let (sn, cs) = arg.sin_cos();
        x.push(2.0 * fx.process(s * sn));
        y.push(2.0 * fy.process(s * cs));
    }
    Ok(DemodOutput::from_quadratures(
        series.sample_rate,
        series.start_time,
        x,
        y,
    ))
}

/// Stage-2 output reduced to one phase per modulation cycle by [`lsq_phase_fit`].
pub fn cycle_phases<T: Real>(
    series: &TimeSeries<T>,
    samples_per_cycle: usize,
) -> Vec<Result<PhaseFit<T>>> {
    series
        .values
        .chunks_exact(samples_per_cycle)
        .map(lsq_phase_fit)
        .collect()
}
