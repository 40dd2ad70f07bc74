use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioClip;
use crate::error::{Error, Result};

fn io(e: impl std::fmt::Display) -> Error {
    Error::Audio(e.to_string())
}

/// Read a WAV file (integer or float PCM, any rate). Channels are averaged to mono and the
/// result is peak-normalised only if it exceeds full scale.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let reader = WavReader::open(path.as_ref()).map_err(io)?;
    let spec = reader.spec();
    let raw: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(io)?,
        SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(io)?
        }
    };
    let channels = spec.channels.max(1) as usize;
    let mono: Vec<f64> = raw
        .chunks_exact(channels)
        .map(|c| c.iter().sum::<f64>() / channels as f64)
        .collect();
    if mono.is_empty() {
        return Err(Error::Empty("wav file has no samples"));
    }
    let mut clip = AudioClip::new_unchecked(f64::from(spec.sample_rate), mono);
    if clip.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Audio("non-finite sample".into()));
    }
    clip.fit_to_range();
    Ok(clip)
}

/// Write a mono 16-bit PCM WAV. The sample rate is rounded to whole hertz.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let rate = clip.sample_rate.round();
    if !(rate >= 1.0 && rate <= u32::MAX as f64) {
        return Err(Error::Audio(format!(
            "unsupported sample rate {}",
            clip.sample_rate
        )));
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: rate as u32,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path.as_ref(), spec).map_err(io)?;
    for &v in &clip.samples {
        w.write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
            .map_err(io)?;
    }
    w.finalize().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        for rate in [8000.0, 44_100.0, 100_000.0] {
            let samples: Vec<f64> = (0..500).map(|i| (i as f64 * 0.05).sin() * 0.7).collect();
            let clip = AudioClip::new(rate, samples.clone()).unwrap();
            let path = dir.path().join(format!("{rate}.wav"));
            write_wav(&clip, &path).unwrap();
            let back = read_wav(&path).unwrap();
            assert_eq!(back.sample_rate, rate);
            for (a, b) in back.samples.iter().zip(&samples) {
                assert!((a - b).abs() <= 0.5 / 32768.0);
            }
        }
    }

    #[test]
    fn missing_file_is_audio_error() {
        assert!(matches!(
            read_wav("/nonexistent/x.wav"),
            Err(Error::Audio(_))
        ));
    }
}
