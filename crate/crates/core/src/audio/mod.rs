//! Audio broadcast over a magnetic field and its recovery from the sensor readout.
//!
//! Encoding squeezes a clip's spectrum by an integer factor, multiplies it onto a carrier and
//! turns the result into a sampled field. The sensor sees the sidebands at `carrier +- f`, which
//! the heterodyne comb folds into the lock-in band. Decoding either remixes the phase readout to
//! an audible carrier (melody) or averages blocks of readout samples back to real time (speech).

mod dsp;
pub mod synth;
mod wav;

pub use dsp::{
    band_spectrum, cosine_similarity, energy_band, fft_resize, normalized_cross_correlation, Biquad,
};
pub use wav::{read_wav, write_wav};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lockin::{demod_stage1, demod_stage2, DemodOutput, LockInConfig};
use crate::physics::PulseSequence;
use crate::sensor::{simulate_run, SensorConfig};
use crate::signal::{CompositeSignal, TimeSeries};

/// Sample rate of the arbitrary waveform generator that drives the coil.
pub const BROADCAST_RATE: f64 = 1e5;

/// Mono clip with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    /// Hz.
    pub sample_rate: f64,
    pub samples: Vec<f64>,
    /// Notes and warnings picked up along the pipeline.
    pub metadata: Vec<(String, String)>,
}

impl AudioClip {
    pub fn new(sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(invalid(
                "sample_rate",
                format!("must be finite and > 0, got {sample_rate}"),
            ));
        }
        if let Some(v) = samples.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(invalid(
                "samples",
                format!("must be finite and within [-1, 1], found {v}"),
            ));
        }
        Ok(Self::new_unchecked(sample_rate, samples))
    }

    pub(crate) fn new_unchecked(sample_rate: f64, samples: Vec<f64>) -> Self {
        Self {
            sample_rate,
            samples,
            metadata: Vec::new(),
        }
    }

    /// Scale arbitrary finite samples to a peak of 1 (silence stays silent).
    pub fn normalized(sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        let mut clip = Self::new_unchecked(sample_rate, samples);
        if clip.samples.iter().any(|v| !v.is_finite()) {
            return Err(invalid("samples", "must be finite"));
        }
        let peak = clip.peak();
        if peak > 0.0 {
            clip.samples.iter_mut().for_each(|v| *v /= peak);
        }
        Self::new(sample_rate, clip.samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    /// Warnings recorded by decoding steps.
    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.metadata
            .iter()
            .filter(|(k, _)| k == "warning")
            .map(|(_, v)| v.as_str())
    }

    /// Rescale if band-limited processing overshot `[-1, 1]`, noting the factor.
    pub(crate) fn fit_to_range(&mut self) {
        let peak = self.peak();
        if peak > 1.0 {
            self.samples.iter_mut().for_each(|v| *v /= peak);
            self.note("rescaled_by", 1.0 / peak);
        }
    }

    /// Field waveform in tesla, `peak_tesla * samples`, starting at `t = 0`.
    pub fn to_field(&self, peak_tesla: f64) -> Result<CompositeSignal<f64>> {
        if !(peak_tesla.is_finite() && peak_tesla >= 0.0) {
            return Err(invalid("peak_tesla", "must be finite and >= 0"));
        }
        let values = self.samples.iter().map(|v| v * peak_tesla).collect();
        CompositeSignal::empty().with_waveform(TimeSeries::new(self.sample_rate, 0.0, values)?)
    }
}

/// How the speech readout is stretched back to real time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Expansion {
    /// Mean of each block of `factor` samples.
    #[default]
    BlockAverage,
    /// First sample of each block.
    Decimate,
}

/// Parameters of one broadcast and its decoding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodingConfig {
    /// Hz.
    pub carrier: f64,
    pub compression_factor: usize,
    /// Hz, remix carrier for the melody path; 0 disables remixing.
    pub reconstruction_carrier: f64,
    /// Hz, lower remix sidebands to remove.
    pub notch_freqs: Vec<f64>,
    pub notch_q: f64,
    /// Hz, widest occupied band (after compression) the lock-in can pass.
    pub lia_bandwidth: f64,
    pub expansion: Expansion,
}

impl EncodingConfig {
    /// Three-note melody on a 9.5 kHz carrier, read out near the 10 kHz comb line and remixed
    /// to 500 Hz.
    pub fn melody() -> Self {
        Self {
            carrier: 9.5e3,
            compression_factor: 1,
            reconstruction_carrier: 500.0,
            notch_freqs: vec![477.0, 413.0, 341.0],
            notch_q: 10.0,
            lia_bandwidth: 200.0,
            expansion: Expansion::BlockAverage,
        }
    }

    /// Speech band (up to 4 kHz) compressed 20 times onto a 20 kHz carrier.
    pub fn speech() -> Self {
        Self {
            carrier: 20e3,
            compression_factor: 20,
            reconstruction_carrier: 0.0,
            notch_freqs: Vec::new(),
            notch_q: 10.0,
            lia_bandwidth: 200.0,
            expansion: Expansion::BlockAverage,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier > 0.0) {
            return Err(invalid("carrier_hz", "must be > 0"));
        }
        if self.compression_factor == 0 {
            return Err(invalid("compression_factor", "must be >= 1"));
        }
        if !(self.reconstruction_carrier >= 0.0) {
            return Err(invalid("reconstruction_carrier_hz", "must be >= 0"));
        }
        if !(self.notch_q > 0.0) {
            return Err(invalid("notch_q", "must be > 0"));
        }
        if !(self.lia_bandwidth > 0.0) {
            return Err(invalid("lia_bandwidth_hz", "must be > 0"));
        }
        if self.notch_freqs.iter().any(|f| !(*f > 0.0)) {
            return Err(invalid("notch_freqs_hz", "must all be > 0"));
        }
        Ok(())
    }

    /// Readout tones implied by the notches: `reconstruction_carrier - notch`.
    pub fn expected_readout_tones(&self) -> Vec<f64> {
        self.notch_freqs
            .iter()
            .map(|n| self.reconstruction_carrier - n)
            .filter(|f| *f > 0.0)
            .collect()
    }
}

/// Pulse sequence and lock-in used to receive a broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Receiver {
    /// Seconds.
    pub t_phi: f64,
    pub m: u32,
    /// `N = f_s / df`.
    pub samples_per_cycle: usize,
    /// Hz.
    pub cutoff: f64,
    pub filter_order: usize,
}

impl Receiver {
    /// Hahn echo of 50 us repeated twice: comb line at 10 kHz, pair rate 5 kHz.
    pub fn melody() -> Self {
        Self {
            t_phi: 50e-6,
            m: 2,
            samples_per_cycle: 10,
            cutoff: 200.0,
            filter_order: 4,
        }
    }

    /// Hahn echo of 25 us repeated twice: comb line at 20 kHz, pair rate 10 kHz.
    pub fn speech() -> Self {
        Self {
            t_phi: 25e-6,
            m: 2,
            samples_per_cycle: 10,
            cutoff: 500.0,
            filter_order: 4,
        }
    }

    pub fn sequence(&self) -> Result<PulseSequence<f64>> {
        PulseSequence::hahn(self.t_phi, self.m)
    }

    /// Hz.
    pub fn pair_rate(&self) -> Result<f64> {
        Ok(1.0 / (2.0 * self.sequence()?.t_seq()))
    }

    pub fn lockin(&self) -> Result<LockInConfig> {
        let fs = self.pair_rate()?;
        LockInConfig::new(
            fs / self.samples_per_cycle as f64,
            self.cutoff,
            self.filter_order,
            self.samples_per_cycle,
        )
    }

    /// Simulate the sensor under `field` for `duration` seconds and demodulate.
    pub fn receive(
        &self,
        field: &CompositeSignal<f64>,
        sensor: &SensorConfig,
        duration: f64,
        seed: u64,
    ) -> Result<DemodOutput> {
        let seq = self.sequence()?;
        let lockin = self.lockin()?;
        let mut sensor = sensor.clone();
        sensor.drive.delta_f = lockin.demod2_freq;
        let trace = simulate_run(&sensor, &seq, field, duration, seed)?;
        demod_stage2(&demod_stage1(&trace)?, &lockin)
    }
}

/// Band-limited time stretch by `factor` at an unchanged sample rate: every frequency is
/// divided by `factor` and the clip becomes `factor` times longer.
pub fn compress_bandwidth(clip: &AudioClip, factor: usize) -> Result<AudioClip> {
    if factor == 0 {
        return Err(invalid("compression_factor", "must be >= 1"));
    }
    if clip.is_empty() {
        return Err(Error::Empty("audio clip"));
    }
    let mut out = AudioClip::new_unchecked(
        clip.sample_rate,
        fft_resize(&clip.samples, clip.len() * factor),
    );
    out.metadata = clip.metadata.clone();
    out.fit_to_range();
    out.note("compression_factor", factor);
    Ok(out)
}

/// Double-sideband modulation `x(t) cos(2 pi carrier t)`.
pub fn mix_carrier(clip: &AudioClip, carrier: f64) -> Result<AudioClip> {
    if !(carrier > 0.0) {
        return Err(invalid("carrier_hz", "must be > 0"));
    }
    let (_, top) = energy_band(&clip.samples, clip.sample_rate, 0.0, 0.999);
    let highest = carrier + top;
    if 2.0 * highest >= clip.sample_rate {
        return Err(Error::Nyquist {
            frequency: highest,
            sample_rate: clip.sample_rate,
            required: 2.0 * highest,
        });
    }
    let w = std::f64::consts::TAU * carrier / clip.sample_rate;
    let samples = clip
        .samples
        .iter()
        .enumerate()
        .map(|(i, v)| v * (w * i as f64).cos())
        .collect();
    let mut out = AudioClip::new_unchecked(clip.sample_rate, samples);
    out.metadata = clip.metadata.clone();
    out.note("carrier_hz", carrier);
    Ok(out)
}

/// Second-order notch at `freq` Hz.
pub fn notch_filter(clip: &AudioClip, freq: f64, q: f64) -> Result<AudioClip> {
    let mut f = Biquad::notch(freq, q, clip.sample_rate)?;
    let samples = clip.samples.iter().map(|&v| f.process(v)).collect();
    let mut out = AudioClip::new_unchecked(clip.sample_rate, samples);
    out.metadata = clip.metadata.clone();
    out.fit_to_range();
    Ok(out)
}

/// Compress and modulate `clip` for broadcast. The clip should already be at
/// [`BROADCAST_RATE`] or another rate high enough for the carrier.
pub fn encode(clip: &AudioClip, config: &EncodingConfig) -> Result<AudioClip> {
    config.validate()?;
    let compressed = compress_bandwidth(clip, config.compression_factor)?;
    let (lo, hi) = energy_band(&compressed.samples, compressed.sample_rate, 0.005, 0.995);
    if hi - lo > config.lia_bandwidth {
        return Err(invalid(
            "compression_factor",
            format!(
                "compressed band {lo:.1}..{hi:.1} Hz is wider than the lock-in band {} Hz",
                config.lia_bandwidth
            ),
        ));
    }
    mix_carrier(&compressed, config.carrier)
}

/// Amplitude of the `freq` component of `x` (Hann-windowed single-bin DFT).
fn tone_amplitude(x: &[f64], sample_rate: f64, freq: f64) -> f64 {
    let n = x.len() as f64;
    let w = std::f64::consts::TAU * freq / sample_rate;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let win = 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n).cos();
        re += win * v * (w * i as f64).cos();
        im -= win * v * (w * i as f64).sin();
    }
    4.0 * re.hypot(im) / n
}

fn centred_phase(readout: &DemodOutput) -> Result<Vec<f64>> {
    if readout.is_empty() {
        return Err(Error::Empty("readout"));
    }
    let mean = readout.unwrapped.iter().sum::<f64>() / readout.len() as f64;
    Ok(readout.unwrapped.iter().map(|p| p - mean).collect())
}

/// Remix the phase readout to `reconstruction_carrier`, notch out the lower sidebands and
/// normalise. Readout tones implied by the notches that are missing become warnings.
pub fn reconstruct_melody(readout: &DemodOutput, config: &EncodingConfig) -> Result<AudioClip> {
    config.validate()?;
    let phase = centred_phase(readout)?;
    let fs = readout.sample_rate;

    let expected = config.expected_readout_tones();
    let levels: Vec<f64> = expected
        .iter()
        .map(|&f| tone_amplitude(&phase, fs, f))
        .collect();
    let strongest = levels.iter().cloned().fold(0.0, f64::max);

    let mixed = if config.reconstruction_carrier > 0.0 {
        let w = std::f64::consts::TAU * config.reconstruction_carrier;
        phase
            .iter()
            .enumerate()
            .map(|(i, p)| p * (w * readout.time(i)).cos())
            .collect()
    } else {
        phase
    };
    let mut filters = config
        .notch_freqs
        .iter()
        .map(|&f| Biquad::notch(f, config.notch_q, fs))
        .collect::<Result<Vec<_>>>()?;
    let filtered: Vec<f64> = mixed
        .into_iter()
        .map(|v| filters.iter_mut().fold(v, |acc, f| f.process(acc)))
        .collect();

    let mut out = AudioClip::normalized(fs, filtered)?;
    for (f, level) in expected.iter().zip(&levels) {
        if strongest == 0.0 || *level < 0.05 * strongest {
            out.note(
                "warning",
                format!("expected readout tone at {f:.1} Hz not found"),
            );
        }
    }
    out.note("reconstruction_carrier_hz", config.reconstruction_carrier);
    Ok(out)
}

/// Stretch the compressed speech readout back to real time by combining blocks of `factor`
/// samples. The output plays at the readout rate; a trailing partial block is dropped.
pub fn reconstruct_speech(
    readout: &DemodOutput,
    factor: usize,
    expansion: Expansion,
) -> Result<AudioClip> {
    if factor == 0 {
        return Err(invalid("compression_factor", "must be >= 1"));
    }
    let phase = centred_phase(readout)?;
    let blocks = phase.len() / factor;
    if blocks == 0 {
        return Err(Error::Empty("readout shorter than one block"));
    }
    let samples = phase
        .chunks_exact(factor)
        .map(|b| match expansion {
            Expansion::BlockAverage => b.iter().sum::<f64>() / factor as f64,
            Expansion::Decimate => b[0],
        })
        .collect();
    let mut out = AudioClip::normalized(readout.sample_rate, samples)?;
    let dropped = phase.len() % factor;
    if dropped > 0 {
        out.note("dropped_samples", dropped);
    }
    out.note("expansion", format!("{expansion:?}"));
    Ok(out)
}

/// Cosine similarity of band-averaged magnitude spectra (`band` Hz bands up to `max_freq`).
pub fn spectral_similarity(a: &AudioClip, b: &AudioClip, band: f64, max_freq: f64) -> f64 {
    cosine_similarity(
        &band_spectrum(&a.samples, a.sample_rate, band, max_freq),
        &band_spectrum(&b.samples, b.sample_rate, band, max_freq),
    )
}
