use std::f64::consts::PI;

use proptest::prelude::*;
use qpsd_core::analyzer::{measure_section, AnalyzerPlan, Section};
use qpsd_core::audio::{compress_bandwidth, spectral_similarity, synth, AudioClip, Biquad};
use qpsd_core::lockin::{cycle_phases, demod_stage1, demod_stage2, LockInConfig, OnePoleCascade};
use qpsd_core::num::{phase_difference, wrap_phase};
use qpsd_core::physics::{
    accumulated_phase, filter_closed_form, filter_numeric_oracle, DriveConfig, PulseSequence,
    SequenceKind, GAMMA_E,
};
use qpsd_core::sensor::{simulate_run, NoiseModel, SensorConfig};
use qpsd_core::signal::{
    fft_magnitude, synthesize_tones, CompositeSignal, SignStatus, SignalComponent,
};

fn tone() -> impl Strategy<Value = SignalComponent<f64>> {
    (1e-12..1e-6f64, 1.0..50e3f64, -PI..PI)
        .prop_map(|(a, f, p)| SignalComponent::new(a, f, p).unwrap())
}

proptest! {
    #[test]
    fn evaluation_is_linear(a in prop::collection::vec(tone(), 1..5), b in prop::collection::vec(tone(), 1..5), t in 0.0..1.0f64) {
        let (sa, sb) = (CompositeSignal::new(a), CompositeSignal::new(b));
        let sum = sa.superpose(&sb).unwrap();
        let (x, y, z) = (sa.evaluate(t), sb.evaluate(t), sum.evaluate(t));
        let scale = sa.components.iter().chain(&sb.components).map(|c| c.amplitude).sum::<f64>();
        prop_assert!((z - (x + y)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn spectrum_recovers_integer_period_tones(bins in prop::collection::btree_set(1usize..500, 1..6), amp in 0.1..10.0f64, phase in -PI..PI) {
        let rate = 1024.0;
        let specs: Vec<(f64, f64, f64)> = bins.iter().enumerate().map(|(i, &k)| (k as f64, amp * (i + 1) as f64, phase)).collect();
        let series = synthesize_tones(&specs, 1.0, rate).unwrap();
        let spectrum = fft_magnitude(&series).unwrap();
        for &(f, a, _) in &specs {
            let got = spectrum.bins[f as usize].amplitude;
            prop_assert!((got / a - 1.0).abs() < 1e-6, "{} Hz: {} vs {}", f, got, a);
        }
    }

    /// The f64 segment sum carries an absolute rounding error of order `n eps t_phi`, so the
    /// comparison allows that floor on top of the relative tolerance.
    #[test]
    fn closed_form_matches_piecewise_integral(n in 1u32..=8, t_phi in 1e-6..1e-3f64, x in 0.01..50.0f64) {
        let seq = PulseSequence::new(SequenceKind::Cpmg(n), t_phi, 2).unwrap();
        let omega = x / t_phi;
        let closed = filter_closed_form(&seq, omega).unwrap();
        prop_assume!(!closed.singular);
        let exact = filter_numeric_oracle(&seq, omega).unwrap();
        let floor = 1e-14 * t_phi * f64::from(n + 1);
        let d = (closed.value.to_complex() - exact.to_complex()).norm();
        prop_assert!(d <= 1e-9 * exact.magnitude + floor, "n = {}, x = {}: {:?} vs {:?}", n, x, closed.value, exact);
        if exact.magnitude > 1e3 * floor {
            prop_assert!((closed.value.magnitude / exact.magnitude - 1.0).abs() <= 1e-9);
            prop_assert!(phase_difference(closed.value.phase, exact.phase).abs() <= 1e-9);
        }
    }

    #[test]
    fn hahn_and_cpmg2_peak_values(t_phi in 1e-6..1e-3f64) {
        let hahn = PulseSequence::hahn(t_phi, 2).unwrap();
        let cpmg2 = PulseSequence::new(SequenceKind::Cpmg(2), t_phi, 2).unwrap();
        let w = 2.0 * PI / t_phi;
        let target = 2.0 * t_phi / PI;
        for g in [
            filter_closed_form(&hahn, w).unwrap().value.magnitude,
            filter_closed_form(&hahn, w / 2.0).unwrap().value.magnitude,
            filter_closed_form(&cpmg2, w).unwrap().value.magnitude,
        ] {
            prop_assert!((g / target - 1.0).abs() <= 1e-12);
        }
    }

    /// Offsets `+-delta` around `1/t_phi` give heterodyne beats whose amplitudes differ only by the
    /// `1/w` factor of the Hahn response; the `sin^2` envelope is mirror symmetric.
    #[test]
    fn heterodyne_mirror_symmetry(b in 1e-10..1e-8f64, psi in -PI..PI, k in 1u32..40) {
        let seq = PulseSequence::hahn(50e-6, 2).unwrap();
        let fphi = 1.0 / seq.t_phi;
        let delta = 100.0 * k as f64;
        let count = 100;
        let amplitude = |f: f64| {
            let s = CompositeSignal::new(vec![SignalComponent::new(b, f, psi).unwrap()]);
            let (mut re, mut im) = (0.0, 0.0);
            for i in 0..count {
                let p = accumulated_phase(&seq, &s, i as u64, GAMMA_E).unwrap();
                let arg = 2.0 * PI * delta * i as f64 * seq.t_seq();
                re += p * arg.cos();
                im += p * arg.sin();
            }
            2.0 * re.hypot(im) / count as f64
        };
        let (lo, hi) = (amplitude(fphi - delta), amplitude(fphi + delta));
        prop_assume!(lo > 0.0 && hi > 0.0);
        prop_assert!(((lo * (fphi - delta)) / (hi * (fphi + delta)) - 1.0).abs() < 1e-9, "{} {}", lo, hi);
        prop_assert!((lo / hi - 1.0).abs() <= 2.0 * delta / (fphi - delta) + 1e-9);
    }

    #[test]
    fn phase_is_linear_in_amplitude(a in prop::collection::vec(tone(), 1..4), scale in 0.0..5.0f64, index in 0u64..1000) {
        let seq = PulseSequence::hahn(50e-6, 3).unwrap();
        let s = CompositeSignal::new(a);
        let base = accumulated_phase(&seq, &s, index, GAMMA_E).unwrap();
        let scaled = accumulated_phase(&seq, &s.scaled(scale), index, GAMMA_E).unwrap();
        let bound: f64 = s.components.iter().map(|c| GAMMA_E * c.amplitude * seq.t_phi).sum();
        prop_assert!((scaled - scale * base).abs() <= 1e-12 * bound * (1.0 + scale));
    }

    #[test]
    fn wrap_phase_is_idempotent(x in -1e4..1e4f64) {
        let w = wrap_phase(x);
        prop_assert!((-PI..PI).contains(&w));
        prop_assert_eq!(wrap_phase(w), w);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), photons in 1e3..1e7f64) {
        let sensor = SensorConfig::new(0.05, photons, DriveConfig::resonant(500.0)).unwrap();
        let seq = PulseSequence::hahn(50e-6, 2).unwrap();
        let s = CompositeSignal::new(vec![SignalComponent::new(1e-9, 20_010.0, 0.2).unwrap()]);
        let a = simulate_run(&sensor, &seq, &s, 0.05, seed).unwrap();
        let b = simulate_run(&sensor, &seq, &s, 0.05, seed).unwrap();
        prop_assert_eq!(&a.counts, &b.counts);
        let c = simulate_run(&sensor, &seq, &s, 0.05, seed.wrapping_add(1)).unwrap();
        prop_assert_ne!(&a.counts, &c.counts);
    }

    #[test]
    fn demodulator_agrees_with_cycle_fit(phi in -3.1..3.1f64, n in prop::sample::select(vec![6usize, 10, 20])) {
        let seq = PulseSequence::hahn(50e-6, 2).unwrap();
        let rate = 1.0 / (2.0 * seq.t_seq());
        let cfg = LockInConfig::for_rate(rate, rate / n as f64, rate / n as f64 / 10.0, 4).unwrap();
        let f = 1.0 / seq.t_phi;
        let g = filter_closed_form(&seq, 2.0 * PI * f).unwrap().value;
        let b = phi.abs() / (GAMMA_E * g.magnitude);
        let psi = g.phase + if phi < 0.0 { PI } else { 0.0 };
        let signal = CompositeSignal::new(vec![SignalComponent::new(b, f, psi).unwrap()]);
        let sensor = SensorConfig::ensemble(DriveConfig::resonant(cfg.demod2_freq)).with_noise(NoiseModel::Off);
        let series = demod_stage1(&simulate_run(&sensor, &seq, &signal, 0.3, 0).unwrap()).unwrap();
        let out = demod_stage2(&series, &cfg).unwrap();
        let lia = out.mean_phase(cfg.settle_samples(), n).unwrap();
        let fit = cycle_phases(&series, n).pop().unwrap().unwrap().phase;
        prop_assert!(phase_difference(lia, fit).abs() < 1e-3, "{} vs {}", lia, fit);
        prop_assert!(phase_difference(fit, phi).abs() < 1e-9);
    }

    #[test]
    fn notch_is_transparent_at_the_band_edges(f in 10.0..2400.0f64, q in 0.5..50.0f64) {
        let fs = 5000.0;
        let n = Biquad::notch(f, q, fs).unwrap();
        prop_assert!((n.response(0.0, fs).norm() - 1.0).abs() < 1e-12);
        prop_assert!((n.response(fs / 2.0, fs).norm() - 1.0).abs() < 1e-9);
        prop_assert!(n.response(f, fs).norm() < 1e-9);
    }

    #[test]
    fn cascade_response_matches_its_own_output(f in 1.0..400.0f64, order in 1usize..6) {
        let fs = 5000.0;
        let cutoff = 100.0;
        let mut lp = OnePoleCascade::new(cutoff, fs, order).unwrap();
        let h = lp.response(f, fs);
        let n = (fs * 4.0) as usize;
        let y: Vec<f64> = (0..n).map(|i| lp.process((2.0 * PI * f * i as f64 / fs).cos())).collect();
        let tail = &y[n / 2..];
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in tail.iter().enumerate() {
            let arg = 2.0 * PI * f * (n / 2 + j) as f64 / fs;
            re += v * arg.cos();
            im += v * arg.sin();
        }
        let measured = 2.0 * re.hypot(im) / tail.len() as f64;
        prop_assert!((measured / h.norm() - 1.0).abs() < 2e-2, "{} vs {}", measured, h.norm());
    }

    #[test]
    fn compression_then_block_average_is_identity(seed in any::<u64>(), factor in 2usize..=20) {
        let rate = 20_000.0;
        let band = rate / (2.0 * factor as f64) * 0.8;
        let clip = synth::band_limited_noise(rate, 0.25, 0.0, band, seed).unwrap();
        let long = compress_bandwidth(&clip, factor).unwrap();
        let back: Vec<f64> = long.samples.chunks_exact(factor).map(|c| c.iter().sum::<f64>() / factor as f64).collect();
        let back = AudioClip::normalized(rate, back).unwrap();
        prop_assert!(spectral_similarity(&clip, &back, 50.0, band) >= 0.99);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Noise-free single tones on either side of a random comb line get the right sign, and the
    /// amplitude stays within the lock-in droop of the truth.
    #[test]
    fn sign_assignment_is_correct(center in 12e3..25e3f64, h in 3.0..150.0f64, upper in any::<bool>(), b in 0.3e-9..3e-9f64, psi in -PI..PI) {
        let section = Section::new(center, 2, 0, 400.0).unwrap();
        let mut plan = AnalyzerPlan::from_sections(vec![section], 200.0);
        plan.trace_duration = 4.0;
        plan.t_clk = 20e-9;
        let s = &plan.sections[0];
        let k = s.reference_index() as f64;
        let seq = s.sequence(plan.sequence, plan.t_clk).unwrap();
        let delta = k / seq.t_seq() - k / seq.perturbed().t_seq();
        let offset = if upper { h } else { -h };
        prop_assume!((offset + delta).abs() > 1.0);
        let f = s.center + offset;
        let signal = CompositeSignal::new(vec![SignalComponent::new(b, f, psi).unwrap()]);
        let sensor = SensorConfig::ensemble(DriveConfig::resonant(0.0)).with_noise(NoiseModel::Off);
        let r = measure_section(s, &signal, &sensor, &plan, 1).unwrap();
        let confirmed: Vec<_> = r.resolved.with_status(SignStatus::Confirmed).collect();
        prop_assert_eq!(confirmed.len(), 1, "{:?}", r.resolved.bins);
        prop_assert!((confirmed[0].frequency - f).abs() <= 2.0 / plan.trace_duration, "{} vs {}", confirmed[0].frequency, f);
        let lp = OnePoleCascade::new(plan.lia_cutoff, r.nominal.lockin.sample_rate(), plan.filter_order).unwrap();
        let droop = 1.0 - lp.response(h, r.nominal.lockin.sample_rate()).norm();
        prop_assert!((confirmed[0].amplitude / b - 1.0).abs() <= droop.max(0.02), "{} vs {}", confirmed[0].amplitude, b);
    }
}
