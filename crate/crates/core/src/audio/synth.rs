//! Synthetic test material: a three-note melody and band-limited noise standing in for speech.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dsp::fft_resize;
use super::AudioClip;
use crate::error::{invalid, Result};

/// C5, D5 and E5 in Hz.
pub const MELODY_NOTES: [f64; 3] = [523.0, 587.0, 659.0];

/// One note of a melody.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Note {
    /// Hz.
    pub frequency: f64,
    /// Seconds.
    pub duration: f64,
}

/// Notes played back to back with 10 ms raised-cosine edges, under a loudness envelope that
/// rises over the first third and falls over the last third.
pub fn melody(sample_rate: f64, notes: &[Note]) -> Result<AudioClip> {
    if notes.is_empty() {
        return Err(invalid("notes", "need at least one note"));
    }
    let total: f64 = notes.iter().map(|n| n.duration).sum();
    let edge = 0.01;
    let mut samples = Vec::new();
    let mut t0 = 0.0;
    for note in notes {
        if !(note.duration > 2.0 * edge
            && note.frequency > 0.0
            && note.frequency < sample_rate / 2.0)
        {
            return Err(invalid("notes", format!("unplayable note {note:?}")));
        }
        let count = (note.duration * sample_rate).round() as usize;
        for i in 0..count {
            let t = i as f64 / sample_rate;
            let ramp = |x: f64| 0.5 - 0.5 * (std::f64::consts::PI * (x / edge).min(1.0)).cos();
            let local = ramp(t) * ramp(note.duration - t);
            let g = (t0 + t) / total;
            let loud = 0.6 + 0.4 * (std::f64::consts::PI * g).sin();
            samples.push(loud * local * (std::f64::consts::TAU * note.frequency * t).sin());
        }
        t0 += note.duration;
    }
    AudioClip::new(sample_rate, samples)
}

/// C5 D5 E5 D5 C5, `note_duration` seconds each.
pub fn test_melody(sample_rate: f64, note_duration: f64) -> Result<AudioClip> {
    let [c, d, e] = MELODY_NOTES;
    let notes: Vec<Note> = [c, d, e, d, c]
        .iter()
        .map(|&frequency| Note {
            frequency,
            duration: note_duration,
        })
        .collect();
    melody(sample_rate, &notes)
}

/// Gaussian noise confined to `[lo, hi]` Hz, peak-normalised to 0.9.
pub fn band_limited_noise(
    sample_rate: f64,
    duration: f64,
    lo: f64,
    hi: f64,
    seed: u64,
) -> Result<AudioClip> {
    let n = (duration * sample_rate).round() as usize;
    if n < 16 || !(0.0 <= lo && lo < hi && hi <= sample_rate / 2.0) {
        return Err(invalid(
            "noise",
            "need >= 16 samples and 0 <= lo < hi <= Nyquist",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let mut buf: Vec<num_complex::Complex64> = white.iter().map(|&v| v.into()).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let df = sample_rate / n as f64;
    for (k, z) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * df;
        if f < lo || f > hi {
            *z = 0.0.into();
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let v: Vec<f64> = buf.iter().map(|z| z.re).collect();
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak == 0.0 {
        return AudioClip::new(sample_rate, v);
    }
    AudioClip::new(sample_rate, v.into_iter().map(|x| 0.9 * x / peak).collect())
}

/// Band-limited resampling to `rate` (length scaled to the nearest sample).
pub fn resample(clip: &AudioClip, rate: f64) -> Result<AudioClip> {
    if !(rate > 0.0) {
        return Err(invalid("sample_rate", "must be > 0"));
    }
    let len = (clip.samples.len() as f64 * rate / clip.sample_rate).round() as usize;
    let mut out = AudioClip::new_unchecked(rate, fft_resize(&clip.samples, len));
    out.fit_to_range();
    out.metadata = clip.metadata.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::dsp::energy_band;

    #[test]
    fn melody_is_normalised_and_timed() {
        let m = test_melody(10_000.0, 0.2).unwrap();
        assert_eq!(m.samples.len(), 10_000);
        assert!(m.samples.iter().all(|v| v.abs() <= 1.0));
        assert!(melody(
            1000.0,
            &[Note {
                frequency: 600.0,
                duration: 1.0
            }]
        )
        .is_err());
    }

    #[test]
    fn noise_stays_in_band() {
        let c = band_limited_noise(20_000.0, 1.0, 100.0, 4000.0, 1).unwrap();
        let (lo, hi) = energy_band(&c.samples, c.sample_rate, 0.001, 0.999);
        assert!(lo >= 100.0 && hi <= 4000.0, "{lo} {hi}");
    }

    #[test]
    fn resample_preserves_tone() {
        let m = melody(
            8000.0,
            &[Note {
                frequency: 500.0,
                duration: 0.5,
            }],
        )
        .unwrap();
        let r = resample(&m, 100_000.0).unwrap();
        assert_eq!(r.samples.len(), 50_000);
        assert_eq!(r.sample_rate, 100_000.0);
    }
}
