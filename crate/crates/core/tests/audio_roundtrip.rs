use qpsd_core::audio::{
    encode, normalized_cross_correlation, reconstruct_melody, reconstruct_speech,
    spectral_similarity, synth, EncodingConfig, Expansion, Receiver, BROADCAST_RATE,
};
use qpsd_core::physics::DriveConfig;
use qpsd_core::sensor::{NoiseModel, SensorConfig};

const NOTE: f64 = 0.4;

fn dtft_magnitude(x: &[f64], rate: f64, f: f64) -> f64 {
    let w = std::f64::consts::TAU * f / rate;
    let n = x.len() as f64;
    let (re, im) = x.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, v)| {
        let win = 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n).cos();
        (
            re + win * v * (w * i as f64).cos(),
            im - win * v * (w * i as f64).sin(),
        )
    });
    re.hypot(im)
}

fn dominant_frequency(x: &[f64], rate: f64, lo: f64, hi: f64) -> f64 {
    let mut best = (lo, 0.0);
    let mut f = lo;
    while f <= hi {
        let a = dtft_magnitude(x, rate, f);
        if a > best.1 {
            best = (f, a);
        }
        f += 0.5;
    }
    let (mut a, mut b) = (best.0 - 0.5, best.0 + 0.5);
    for _ in 0..40 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if dtft_magnitude(x, rate, m1) < dtft_magnitude(x, rate, m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    0.5 * (a + b)
}

fn shot_noise() -> SensorConfig {
    SensorConfig::ensemble(DriveConfig::resonant(0.0)).with_noise(NoiseModel::Auto)
}

#[test]
fn melody_survives_shot_noise() {
    let clip = synth::test_melody(BROADCAST_RATE, NOTE).unwrap();
    let config = EncodingConfig::melody();
    let field = encode(&clip, &config).unwrap().to_field(50e-9).unwrap();
    let readout = Receiver::melody()
        .receive(&field, &shot_noise(), clip.duration(), 7)
        .unwrap();
    let out = reconstruct_melody(&readout, &config).unwrap();
    assert_eq!(out.warnings().count(), 0);
    let rate = out.sample_rate;
    let reference = synth::resample(&clip, rate).unwrap();
    let margin = 0.06;
    for (i, &f) in [523.0, 587.0, 659.0, 587.0, 523.0].iter().enumerate() {
        let a = ((i as f64 * NOTE + margin) * rate) as usize;
        let b = (((i + 1) as f64 * NOTE - margin) * rate) as usize;
        let seg = &out.samples[a..b];
        let found = dominant_frequency(seg, rate, 450.0, 750.0);
        let (r, lag) =
            normalized_cross_correlation(&reference.samples[a..b], seg, (rate / f).ceil() as usize);
        println!("note {i}: {f} Hz -> {found:.3} Hz, r = {r:.4} at lag {lag}");
        assert!((found - f).abs() < 0.5);
        assert!(r >= 0.95);
    }
}

#[test]
fn speech_survives_shot_noise_with_either_expansion() {
    let speech = synth::band_limited_noise(BROADCAST_RATE, 0.5, 80.0, 3800.0, 5).unwrap();
    let config = EncodingConfig::speech();
    let broadcast = encode(&speech, &config).unwrap();
    let field = broadcast.to_field(30e-9).unwrap();
    let readout = Receiver::speech()
        .receive(&field, &shot_noise(), broadcast.duration(), 3)
        .unwrap();
    for mode in [Expansion::BlockAverage, Expansion::Decimate] {
        let out = reconstruct_speech(&readout, config.compression_factor, mode).unwrap();
        assert_eq!(out.sample_rate, 10e3);
        let sim = spectral_similarity(&speech, &out, 100.0, 4000.0);
        println!("{mode:?}: spectral similarity {sim:.4}");
        assert!(sim >= 0.9);
    }
}
