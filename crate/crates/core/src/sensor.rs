//! Synthetic photon-count traces for the two-drive readout.
//!
//! Measurement `i` starts at `i * t_seq`. Pair `j` consists of measurement `2j` read out along
//! `+x` (count `F+`) and `2j + 1` along `-x` (count `F-`). Both halves share the rotating-frame
//! phase `2 pi df (2j t_seq)` but see the field in their own window.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{invalid, Error, Result};
use crate::physics::{Decoherence, DriveConfig, PhaseKernel, PulseSequence, GAMMA_E};
use crate::signal::CompositeSignal;

/// Mean count above which [`NoiseModel::Auto`] switches from exact Poisson to Gaussian.
pub const POISSON_EXACT_LIMIT: f64 = 1e6;

/// Photon shot-noise model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseModel {
    /// Exact Poisson up to [`POISSON_EXACT_LIMIT`], Gaussian above.
    #[default]
    Auto,
    Poisson,
    Gaussian,
    /// Counts replaced by their means.
    Off,
}

/// Contrast as a function of `t_seq` (seconds).
pub type ContrastFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Electronics pickup added to the readout phase, `amplitude cos(2 pi f t + phase)` at each
/// measurement time. Unlike a field it does not move when the sequence timing changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutInterferer {
    /// Hz.
    pub frequency: f64,
    /// rad.
    pub amplitude: f64,
    /// rad.
    pub phase: f64,
}

#[derive(Clone)]
pub struct SensorConfig {
    /// rad/(s T).
    pub gamma_e: f64,
    pub contrast: f64,
    /// Photons per measurement.
    pub photons: f64,
    pub drive: DriveConfig<f64>,
    pub decoherence: Decoherence<f64>,
    /// Overrides `contrast` when set.
    pub contrast_fn: Option<ContrastFn>,
    pub noise: NoiseModel,
    pub interferers: Vec<ReadoutInterferer>,
}

impl fmt::Debug for SensorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SensorConfig")
            .field("gamma_e", &self.gamma_e)
            .field("contrast", &self.contrast)
            .field("photons", &self.photons)
            .field("drive", &self.drive)
            .field("decoherence", &self.decoherence)
            .field("contrast_fn", &self.contrast_fn.as_ref().map(|_| "<fn>"))
            .field("noise", &self.noise)
            .field("interferers", &self.interferers)
            .finish()
    }
}

impl SensorConfig {
    pub fn new(contrast: f64, photons: f64, drive: DriveConfig<f64>) -> Result<Self> {
        let cfg = Self {
            gamma_e: GAMMA_E,
            contrast,
            photons,
            drive,
            decoherence: Decoherence::default(),
            contrast_fn: None,
            noise: NoiseModel::Auto,
            interferers: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Ensemble values 𝒩 = 4.6e11, C = 0.19 %.
    pub fn ensemble(drive: DriveConfig<f64>) -> Self {
        Self::new(0.0019, 4.6e11, drive).expect("valid constants")
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return Err(invalid(
                "contrast",
                format!("must be in (0, 1], got {}", self.contrast),
            ));
        }
        if !(self.photons >= 1.0) || !self.photons.is_finite() {
            return Err(invalid(
                "photons",
                format!("must be >= 1, got {}", self.photons),
            ));
        }
        if !(self.gamma_e > 0.0) {
            return Err(invalid("gamma_e", "must be > 0"));
        }
        Ok(())
    }

    /// Contrast actually seen by a run of `seq`, including the optional envelopes.
    pub fn effective_contrast(&self, seq: &PulseSequence<f64>) -> f64 {
        let base = self
            .contrast_fn
            .as_ref()
            .map_or(self.contrast, |f| f(seq.t_seq()));
        base * self.decoherence.factor(seq.t_phi)
    }
}

/// Photon counts of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutTrace {
    /// Seconds between pair starts, `2 t_seq`.
    pub pair_period: f64,
    /// `(F+, F-)` per pair. Whole numbers unless the noise model is `Off`.
    pub counts: Vec<(f64, f64)>,
    pub rng_seed: u64,
    /// `key=value` lines describing the run, emitted as the CSV header.
    pub metadata: Vec<(String, String)>,
}

impl ReadoutTrace {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn pair_rate(&self) -> f64 {
        1.0 / self.pair_period
    }

    /// CSV `index,t_seconds,F_plus,F_minus` preceded by `# key=value` header lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# rng_seed={}", self.rng_seed);
        let _ = writeln!(out, "# pair_period_s={}", self.pair_period);
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str("index,t_seconds,F_plus,F_minus\n");
        for (i, (p, m)) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{p},{m}", i as f64 * self.pair_period);
        }
        out
    }
}

/// Samples per modulation cycle `f_s / df` for pair rate `f_s`. Errors unless it is an even
/// integer of at least 2.
pub fn samples_per_cycle(pair_rate: f64, delta_f: f64) -> Result<usize> {
    let ratio = pair_rate / delta_f;
    let rounded = ratio.round();
    if !ratio.is_finite() || (ratio - rounded).abs() > 1e-6 * ratio || rounded < 2.0 {
        return Err(Error::OddSamplesPerCycle { ratio });
    }
    let n = rounded as usize;
    if !n.is_multiple_of(2) {
        return Err(Error::OddSamplesPerCycle { ratio });
    }
    Ok(n)
}

fn pair_count(seq: &PulseSequence<f64>, duration: f64) -> Result<usize> {
    let pair = 2.0 * seq.t_seq();
    if !(duration.is_finite() && duration >= pair * (1.0 - 1e-12)) {
        return Err(invalid(
            "duration",
            format!("must cover at least one pair ({pair} s), got {duration}"),
        ));
    }
    Ok((duration / pair * (1.0 + 1e-12)).floor() as usize)
}

struct CountSampler {
    rng: ChaCha8Rng,
    model: NoiseModel,
}

impl CountSampler {
    fn draw(&mut self, mean: f64) -> f64 {
        let mean = mean.max(0.0);
        let model = match self.model {
            NoiseModel::Auto if mean <= POISSON_EXACT_LIMIT => NoiseModel::Poisson,
            NoiseModel::Auto => NoiseModel::Gaussian,
            m => m,
        };
        match model {
            NoiseModel::Off => mean,
            _ if mean == 0.0 => 0.0,
            NoiseModel::Poisson => Poisson::new(mean)
                .expect("positive mean")
                .sample(&mut self.rng),
            _ => {
                let x: f64 = Normal::new(mean, mean.sqrt())
                    .expect("finite mean")
                    .sample(&mut self.rng);
                x.round().max(0.0)
            }
        }
    }
}

fn run(
    sensor: &SensorConfig,
    seq: &PulseSequence<f64>,
    signal: &CompositeSignal<f64>,
    duration: f64,
    seed: u64,
    drive: &DriveConfig<f64>,
) -> Result<ReadoutTrace> {
    sensor.validate()?;
    let pairs = pair_count(seq, duration)?;
    let kernel = PhaseKernel::new(seq, signal, sensor.gamma_e)?;
    let contrast = sensor.effective_contrast(seq);
    let half = 0.5 * contrast;
    let detune = drive.detuning_correction();
    let t_seq = seq.t_seq();
    let mut sampler = CountSampler {
        rng: ChaCha8Rng::seed_from_u64(seed),
        model: sensor.noise,
    };
    let mut counts = Vec::with_capacity(pairs);
    for j in 0..pairs as u64 {
        let frame = std::f64::consts::TAU * drive.delta_f * (2 * j) as f64 * t_seq + detune;
        let pickup = |i: u64| -> f64 {
            let t = i as f64 * t_seq;
            sensor
                .interferers
                .iter()
                .map(|p| p.amplitude * (std::f64::consts::TAU * p.frequency * t + p.phase).cos())
                .sum()
        };
        let theta_plus = kernel.phase_for_index(2 * j) + frame + pickup(2 * j);
        let theta_minus = kernel.phase_for_index(2 * j + 1) + frame + pickup(2 * j + 1);
        let plus = sampler.draw(sensor.photons * (1.0 + half * theta_plus.sin()));
        let minus = sampler.draw(sensor.photons * (1.0 - half * theta_minus.sin()));
        counts.push((plus, minus));
    }
    let metadata = vec![
        ("sequence".into(), format!("{:?}", seq.kind)),
        ("t_phi_s".into(), seq.t_phi.to_string()),
        ("m".into(), seq.m.to_string()),
        ("t_seq_s".into(), t_seq.to_string()),
        ("delta_f_hz".into(), drive.delta_f.to_string()),
        ("contrast".into(), contrast.to_string()),
        ("photons".into(), sensor.photons.to_string()),
        ("gamma_e".into(), sensor.gamma_e.to_string()),
        ("noise".into(), format!("{:?}", sensor.noise)),
        ("duration_s".into(), duration.to_string()),
    ];
    Ok(ReadoutTrace {
        pair_period: 2.0 * t_seq,
        counts,
        rng_seed: seed,
        metadata,
    })
}

/// Two-drive readout. Requires `f_s / df` to be an even integer unless `df = 0`.
pub fn simulate_run(
    sensor: &SensorConfig,
    seq: &PulseSequence<f64>,
    signal: &CompositeSignal<f64>,
    duration: f64,
    seed: u64,
) -> Result<ReadoutTrace> {
    if sensor.drive.delta_f > 0.0 {
        samples_per_cycle(1.0 / (2.0 * seq.t_seq()), sensor.drive.delta_f)?;
    }
    run(sensor, seq, signal, duration, seed, &sensor.drive)
}

/// Conventional single-drive readout: no frame rotation and no detuning difference.
pub fn direct_readout_run(
    sensor: &SensorConfig,
    seq: &PulseSequence<f64>,
    signal: &CompositeSignal<f64>,
    duration: f64,
    seed: u64,
) -> Result<ReadoutTrace> {
    let drive = DriveConfig {
        delta_omega_2: sensor.drive.delta_omega_1,
        rabi_2: sensor.drive.rabi_1,
        delta_f: 0.0,
        ..sensor.drive
    };
    run(sensor, seq, signal, duration, seed, &drive)
}
