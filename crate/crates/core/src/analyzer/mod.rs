//! Sectioned heterodyne spectrum analysis.
//!
//! Each section is measured twice, once with the nominal sequence and once with `t_phi`
//! lengthened by `t_clk`. The second run moves the reference comb down by
//! `delta = k/t_seq - k/t_seq'`, so a line at offset `+h` from the reference moves to `h + delta`
//! and one at `-h` moves to `|h - delta|`. Lines that do not move by either amount are not
//! magnetic signals at the assumed frequency and are flagged.

mod peaks;
mod plan;

pub use peaks::{
    find_peaks, local_thresholds, noise_threshold, refine_peak, windowed_dtft, Peak, PeakOptions,
    MAD_TO_SIGMA, NOISE_BLOCK,
};
pub use plan::{plan_sections, plan_sections_with_overlap, AnalyzerPlan, Section};

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lockin::{demod_stage1, demod_stage2, LockInConfig};
use crate::num::wrap_phase;
use crate::physics::{filter_complex, PulseSequence};
use crate::sensor::{simulate_run, SensorConfig};
use crate::signal::{
    fft_spectrum, CompositeSignal, SignStatus, Spectrum, SpectrumBin, TimeSeries, Window,
};

/// Increment between per-job seeds.
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of job `index` derived from a base seed.
pub fn job_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index.wrapping_mul(SEED_STRIDE))
}

/// One simulate, demodulate and transform pass.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub sequence: PulseSequence<f64>,
    pub lockin: LockInConfig,
    /// Settled, mean-free demodulated phase (rad).
    pub phase: TimeSeries<f64>,
    /// Blackman-Harris spectrum of `phase`.
    pub spectrum: Spectrum<f64>,
    pub phase_slips: usize,
    pub seed: u64,
}

/// Outcome of a nominal/perturbed pair for one section.
#[derive(Debug, Clone)]
pub struct SectionResult {
    pub section: Section,
    pub nominal: RunOutput,
    pub perturbed: RunOutput,
    /// Hz, shift of the reference comb between the runs.
    pub delta_shift: f64,
    pub gamma_e: f64,
    /// Field spectrum at absolute frequencies.
    pub resolved: Spectrum<f64>,
}

impl SectionResult {
    pub fn nominal_spectrum(&self) -> &Spectrum<f64> {
        &self.nominal.spectrum
    }

    pub fn perturbed_spectrum(&self) -> &Spectrum<f64> {
        &self.perturbed.spectrum
    }

    /// Hz, reference line of the nominal run.
    pub fn reference(&self) -> f64 {
        self.section.center
    }
}

fn run_pass(
    sensor: &SensorConfig,
    plan: &AnalyzerPlan,
    seq: PulseSequence<f64>,
    signal: &CompositeSignal<f64>,
    seed: u64,
) -> Result<RunOutput> {
    let pair_rate = 1.0 / (2.0 * seq.t_seq());
    let delta_f = pair_rate / plan.samples_per_cycle as f64;
    let lockin = LockInConfig::new(
        delta_f,
        plan.lia_cutoff,
        plan.filter_order,
        plan.samples_per_cycle,
    )?;
    let mut sensor = sensor.clone();
    sensor.drive.delta_f = delta_f;
    let trace = simulate_run(&sensor, &seq, signal, plan.trace_duration, seed)?;
    let demod = demod_stage2(&demod_stage1(&trace)?, &lockin)?;
    let mut phase = demod.phase_series(lockin.settle_samples())?;
    if phase.len() < 16 {
        return Err(invalid(
            "trace_duration",
            format!(
                "{} s leaves too few samples after the {} s settling time",
                plan.trace_duration,
                lockin.settle_time()
            ),
        ));
    }
    let mean = phase.values.iter().sum::<f64>() / phase.len() as f64;
    phase.values.iter_mut().for_each(|v| *v -= mean);
    let spectrum = fft_spectrum(&phase, Window::BlackmanHarris)?;
    Ok(RunOutput {
        sequence: seq,
        lockin,
        phase,
        spectrum,
        phase_slips: demod.phase_slips.len(),
        seed,
    })
}

/// Runs the nominal and perturbed passes of `section` and resolves the offsets.
///
/// The demodulator offset `df` follows each run's pair rate as `f_s / N`.
pub fn measure_section(
    section: &Section,
    signal: &CompositeSignal<f64>,
    sensor: &SensorConfig,
    plan: &AnalyzerPlan,
    seed: u64,
) -> Result<SectionResult> {
    if !(plan.t_clk > 0.0) {
        return Err(invalid("t_clk", "must be > 0"));
    }
    plan::check_section(section, plan.lia_cutoff, plan.samples_per_cycle)?;
    let seq = section.sequence(plan.sequence, plan.t_clk)?;
    let pert = seq.perturbed();
    let nominal = run_pass(sensor, plan, seq, signal, job_seed(seed, 0))?;
    let perturbed = run_pass(sensor, plan, pert, signal, job_seed(seed, 1))?;
    let k = section.reference_index() as f64;
    let delta_shift = k / seq.t_seq() - k / pert.t_seq();
    let mut result = SectionResult {
        section: *section,
        nominal,
        perturbed,
        delta_shift,
        gamma_e: sensor.gamma_e,
        resolved: Spectrum::empty(),
    };
    result.resolved = disambiguate(&result, &plan.peak_options(), &plan.matching)?;
    Ok(result)
}

/// Rules for pairing a nominal peak with its shifted partner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchRules {
    /// Search half-width around the expected partner position, in FFT bins.
    pub tolerance_bins: f64,
    /// rad, largest disagreement of the field phase inferred from the two runs.
    pub phase_tolerance: f64,
    /// Largest ratio between the field amplitudes inferred from the two runs.
    pub amplitude_ratio: f64,
}

impl Default for MatchRules {
    fn default() -> Self {
        Self {
            tolerance_bins: 3.0,
            phase_tolerance: 0.8,
            amplitude_ratio: 1.5,
        }
    }
}

/// Field line implied by a phase-spectrum peak at signed offset `h` from comb line `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FieldLine {
    frequency: f64,
    amplitude: f64,
    phase: f64,
}

/// Inverts the readout chain of one run: comb aliasing, pair averaging, filter function and
/// lock-in low-pass.
///
/// The demodulated phase of a tone `B cos(2 pi f t + psi)` at `f = k/t_seq + h` is
/// `gamma B |G| cos(pi h t_seq) cos(2 pi h t + pi h t_seq + psi - arg G)` before the low-pass.
fn field_line(
    run: &RunOutput,
    k: f64,
    gamma_e: f64,
    h: f64,
    peak: &Peak,
) -> Result<Option<FieldLine>> {
    let t_seq = run.sequence.t_seq();
    let frequency = k / t_seq + h;
    if !(frequency > 0.0) {
        return Ok(None);
    }
    let g = filter_complex(&run.sequence, 2.0 * PI * frequency)?;
    let hlp = run
        .lockin
        .filter()
        .response(h.abs(), run.lockin.sample_rate());
    let scale = gamma_e * g.norm() * hlp.norm() * (PI * h * t_seq).cos();
    if !(scale > 0.0) {
        return Ok(None);
    }
    let p = peak.phase - hlp.arg();
    let arg_w = if h > 0.0 { -p } else { p };
    Ok(Some(FieldLine {
        frequency,
        amplitude: peak.amplitude / scale,
        phase: wrap_phase(g.arg() - (arg_w + PI * h * t_seq)),
    }))
}

fn consistent(a: &FieldLine, b: &FieldLine, rules: &MatchRules) -> bool {
    let ratio = a.amplitude.max(b.amplitude) / a.amplitude.min(b.amplitude);
    ratio <= rules.amplitude_ratio && wrap_phase(a.phase - b.phase).abs() <= rules.phase_tolerance
}

/// Claim propagation over candidate partner lists `[plus, minus]` (nearest first).
///
/// A nominal peak with candidates under one sign only claims its nearest one; a claimed
/// partner is removed from every other peak's lists unless two decided peaks want it.
fn propagate_claims(mut cands: Vec<[Vec<usize>; 2]>) -> Vec<[Vec<usize>; 2]> {
    loop {
        let claims: Vec<Option<usize>> = cands
            .iter()
            .map(|[plus, minus]| match (plus.is_empty(), minus.is_empty()) {
                (false, true) => plus.first().copied(),
                (true, false) => minus.first().copied(),
                _ => None,
            })
            .collect();
        let mut changed = false;
        for (i, claim) in claims.iter().enumerate() {
            let Some(j) = *claim else { continue };
            let contested = claims
                .iter()
                .enumerate()
                .any(|(o, c)| o != i && *c == Some(j));
            if contested {
                continue;
            }
            for (o, c) in cands.iter_mut().enumerate() {
                if o == i {
                    continue;
                }
                for list in c.iter_mut() {
                    let before = list.len();
                    list.retain(|&x| x != j);
                    changed |= list.len() != before;
                }
            }
        }
        if !changed {
            return cands;
        }
    }
}

/// Matches peaks across the two runs, assigns offset signs and converts lines to field
/// amplitude and phase at absolute frequency.
///
/// A partner counts only if it sits at the shifted position within `tolerance_bins` and implies
/// the same field amplitude and phase as the nominal peak. Unmatched peaks are
/// `rejected_noise`; peaks with partners under both signs are `ambiguous`. Non-confirmed bins are
/// placed at `reference + |h|`. Only offsets between the match tolerance and half the section
/// bandwidth are reported.
pub fn disambiguate(
    result: &SectionResult,
    opts: &PeakOptions,
    rules: &MatchRules,
) -> Result<Spectrum<f64>> {
    let section = &result.section;
    let res = result.nominal.spectrum.resolution;
    let tol = rules.tolerance_bins * res;
    let half_bw = section.bandwidth / 2.0;
    let delta = result.delta_shift;
    let k = section.reference_index() as f64;
    let gamma = result.gamma_e;
    let nominal: Vec<Peak> = find_peaks(
        &result.nominal.phase,
        &result.nominal.spectrum,
        half_bw + tol,
        opts,
    )
    .into_iter()
    // offsets inside the tolerance cannot be told from the DC residue or signed
    .filter(|p| p.frequency > tol && p.frequency <= half_bw)
    .collect();
    let perturbed = find_peaks(
        &result.perturbed.phase,
        &result.perturbed.spectrum,
        half_bw + delta + tol,
        opts,
    );

    let mut lines = Vec::with_capacity(nominal.len());
    let mut cands = Vec::with_capacity(nominal.len());
    for peak in &nominal {
        let mut pair = [Vec::new(), Vec::new()];
        let mut implied = [None, None];
        for (slot, h) in [peak.frequency, -peak.frequency].into_iter().enumerate() {
            let Some(line) = field_line(&result.nominal, k, gamma, h, peak)? else {
                continue;
            };
            implied[slot] = Some(line);
            let shifted = h + delta;
            let mut found: Vec<(f64, usize)> = Vec::new();
            for (j, q) in perturbed.iter().enumerate() {
                let miss = (q.frequency - shifted.abs()).abs();
                if miss > tol {
                    continue;
                }
                let h_pert = shifted.signum() * q.frequency;
                if let Some(other) = field_line(&result.perturbed, k, gamma, h_pert, q)? {
                    if consistent(&line, &other, rules) {
                        found.push((miss, j));
                    }
                }
            }
            found.sort_by(|a, b| a.0.total_cmp(&b.0));
            pair[slot] = found.into_iter().map(|(_, j)| j).collect();
        }
        lines.push(implied);
        cands.push(pair);
    }
    let cands = propagate_claims(cands);

    // with delta inside the tolerance both hypotheses always coincide
    let resolvable = delta > 2.0 * tol;
    let mut bins = Vec::new();
    for ([plus, minus], implied) in cands.iter().zip(&lines) {
        let (status, slot) = match (plus.is_empty(), minus.is_empty()) {
            _ if !resolvable => (SignStatus::Ambiguous, 0),
            (false, true) => (SignStatus::Confirmed, 0),
            (true, false) => (SignStatus::Confirmed, 1),
            (true, true) => (SignStatus::RejectedNoise, 0),
            (false, false) => (SignStatus::Ambiguous, 0),
        };
        if let Some(line) = implied[slot] {
            bins.push(SpectrumBin {
                frequency: line.frequency,
                amplitude: line.amplitude,
                phase: line.phase,
                sign_status: status,
            });
        }
    }
    dedupe_exact(&mut bins);
    Spectrum::from_bins(bins, res)
}

fn dedupe_exact(bins: &mut Vec<SpectrumBin<f64>>) {
    bins.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    bins.dedup_by(|later, kept| {
        if later.frequency == kept.frequency {
            if later.amplitude > kept.amplitude {
                *kept = *later;
            }
            true
        } else {
            false
        }
    });
}

/// Two detections of one tone whose amplitudes disagree by more than the merge tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeConflict {
    pub frequency_a: f64,
    pub amplitude_a: f64,
    pub frequency_b: f64,
    pub amplitude_b: f64,
}

/// Merged field spectrum with any amplitude conflicts found on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedSpectrum {
    pub spectrum: Spectrum<f64>,
    pub conflicts: Vec<AmplitudeConflict>,
}

/// Relative amplitude disagreement above which duplicates are kept apart.
pub const MERGE_AMPLITUDE_TOLERANCE: f64 = 0.2;

/// Union of the confirmed bins of all sections. Detections closer than `2 / trace_duration`
/// are averaged unless their amplitudes disagree by more than 20 %.
pub fn merge(results: &[SectionResult], trace_duration: f64) -> Result<MergedSpectrum> {
    if !(trace_duration > 0.0) {
        return Err(invalid("trace_duration", "must be > 0"));
    }
    let tol = 2.0 / trace_duration;
    let mut confirmed: Vec<SpectrumBin<f64>> = results
        .iter()
        .flat_map(|r| r.resolved.with_status(SignStatus::Confirmed).copied())
        .collect();
    confirmed.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));

    let mut out: Vec<(SpectrumBin<f64>, usize)> = Vec::new();
    let mut conflicts = Vec::new();
    for bin in confirmed {
        if let Some((last, count)) = out.last_mut() {
            if bin.frequency - last.frequency <= tol {
                let top = last.amplitude.max(bin.amplitude);
                if (last.amplitude - bin.amplitude).abs() <= MERGE_AMPLITUDE_TOLERANCE * top {
                    let n = *count as f64;
                    let (x, y) = (
                        last.amplitude * last.phase.cos() * n + bin.amplitude * bin.phase.cos(),
                        last.amplitude * last.phase.sin() * n + bin.amplitude * bin.phase.sin(),
                    );
                    last.frequency = (last.frequency * n + bin.frequency) / (n + 1.0);
                    last.amplitude = (last.amplitude * n + bin.amplitude) / (n + 1.0);
                    last.phase = y.atan2(x);
                    *count += 1;
                    continue;
                }
                conflicts.push(AmplitudeConflict {
                    frequency_a: last.frequency,
                    amplitude_a: last.amplitude,
                    frequency_b: bin.frequency,
                    amplitude_b: bin.amplitude,
                });
                if bin.frequency == last.frequency {
                    // keep both detections apart by the smallest representable step
                    let mut moved = bin;
                    moved.frequency = f64::from_bits(bin.frequency.to_bits() + 1);
                    out.push((moved, 1));
                    continue;
                }
            }
        }
        out.push((bin, 1));
    }
    let spectrum = Spectrum::from_bins(out.into_iter().map(|(b, _)| b).collect(), 0.0)?;
    Ok(MergedSpectrum {
        spectrum,
        conflicts,
    })
}

/// Results of a complete plan.
#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub sections: Vec<SectionResult>,
    pub merged: MergedSpectrum,
}

/// Measures every section of `plan` on its own thread and merges the results.
///
/// Section `i` uses seeds derived from `job_seed(seed, i)`, so results do not depend on
/// scheduling.
pub fn run_plan(
    plan: &AnalyzerPlan,
    signal: &CompositeSignal<f64>,
    sensor: &SensorConfig,
    seed: u64,
) -> Result<AnalysisReport> {
    plan.validate()?;
    let results: Vec<Result<SectionResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = plan
            .sections
            .iter()
            .enumerate()
            .map(|(i, s)| {
                scope.spawn(move || {
                    measure_section(s, signal, sensor, plan, job_seed(seed, i as u64))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|_| {
                    Err(Error::InfeasiblePlan("section worker panicked".into()))
                })
            })
            .collect()
    });
    let sections = results.into_iter().collect::<Result<Vec<_>>>()?;
    let merged = merge(&sections, plan.trace_duration)?;
    Ok(AnalysisReport { sections, merged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::DriveConfig;
    use crate::sensor::NoiseModel;
    use crate::signal::SignalComponent;

    fn quiet_sensor() -> SensorConfig {
        SensorConfig::ensemble(DriveConfig::resonant(0.0)).with_noise(NoiseModel::Off)
    }

    fn single_section_plan(center: f64, m: u32, bw: f64, f_c: f64, duration: f64) -> AnalyzerPlan {
        let mut p = AnalyzerPlan::from_sections(vec![Section::new(center, m, 0, bw).unwrap()], f_c);
        p.trace_duration = duration;
        p
    }

    fn tone(f: f64, b: f64, phase: f64) -> SignalComponent<f64> {
        SignalComponent::new(b, f, phase).unwrap()
    }

    #[test]
    fn shift_matches_reference_comb() {
        let plan = single_section_plan(20e3, 2, 400.0, 200.0, 2.0);
        let r = measure_section(
            &plan.sections[0],
            &CompositeSignal::empty(),
            &quiet_sensor(),
            &plan,
            1,
        )
        .unwrap();
        assert!((r.delta_shift - 1.6).abs() < 1e-3, "{}", r.delta_shift);
        assert!(r.resolved.is_empty(), "{:?}", r.resolved);
    }

    #[test]
    fn upper_and_lower_tones_get_their_signs() {
        let plan = single_section_plan(20e3, 2, 400.0, 200.0, 10.0);
        let sig = CompositeSignal::new(vec![tone(20_005.0, 1e-9, 0.3), tone(19_930.0, 2e-9, -1.1)]);
        let r = measure_section(&plan.sections[0], &sig, &quiet_sensor(), &plan, 7).unwrap();
        let confirmed: Vec<_> = r.resolved.with_status(SignStatus::Confirmed).collect();
        assert_eq!(confirmed.len(), 2, "{:?}", r.resolved);
        let res = r.nominal.spectrum.resolution;
        assert!((confirmed[0].frequency - 19_930.0).abs() < res);
        assert!((confirmed[1].frequency - 20_005.0).abs() < res);
        assert!(
            (confirmed[0].amplitude / 2e-9 - 1.0).abs() < 0.02,
            "{}",
            confirmed[0].amplitude
        );
        assert!(
            (confirmed[1].amplitude / 1e-9 - 1.0).abs() < 0.02,
            "{}",
            confirmed[1].amplitude
        );
        assert!(
            wrap_phase(confirmed[0].phase + 1.1).abs() < 0.05,
            "{}",
            confirmed[0].phase
        );
        assert!(
            wrap_phase(confirmed[1].phase - 0.3).abs() < 0.05,
            "{}",
            confirmed[1].phase
        );
    }

    #[test]
    fn fixed_pickup_is_rejected() {
        let plan = single_section_plan(20e3, 2, 400.0, 200.0, 10.0);
        let mut sensor = quiet_sensor();
        sensor.interferers.push(crate::sensor::ReadoutInterferer {
            frequency: 73.0,
            amplitude: 5e-3,
            phase: 0.0,
        });
        let sig = CompositeSignal::new(vec![tone(20_040.0, 1e-9, 0.0)]);
        let r = measure_section(&plan.sections[0], &sig, &sensor, &plan, 3).unwrap();
        let rejected: Vec<_> = r.resolved.with_status(SignStatus::RejectedNoise).collect();
        assert!(
            rejected
                .iter()
                .any(|b| (b.frequency - 20_073.0).abs() < 0.2),
            "{:?}",
            r.resolved
        );
        let confirmed: Vec<_> = r.resolved.with_status(SignStatus::Confirmed).collect();
        assert_eq!(confirmed.len(), 1);
        assert!((confirmed[0].frequency - 20_040.0).abs() < 0.1);
    }

    #[test]
    fn claims_resolve_chained_partners() {
        // tone 0 has one partner; tone 1 sits 2 delta higher, so its minus candidate is tone
        // 0's partner
        let c = propagate_claims(vec![[vec![0], vec![]], [vec![1], vec![0]]]);
        assert_eq!(c[1], [vec![1], vec![]]);
        // two decided peaks wanting the same partner keep it
        let c = propagate_claims(vec![[vec![0], vec![]], [vec![], vec![0]]]);
        assert_eq!(c, vec![[vec![0], vec![]], [vec![], vec![0]]]);
    }

    #[test]
    fn unresolvable_shift_is_ambiguous() {
        let mut plan = single_section_plan(20e3, 2, 400.0, 200.0, 1.0);
        plan.t_clk = 1e-9;
        let sig = CompositeSignal::new(vec![tone(20_050.0, 1e-9, 0.0)]);
        let r = measure_section(&plan.sections[0], &sig, &quiet_sensor(), &plan, 3).unwrap();
        assert!(!r.resolved.is_empty());
        assert!(r
            .resolved
            .bins
            .iter()
            .all(|b| b.sign_status == SignStatus::Ambiguous));
    }

    fn bin(f: f64, a: f64) -> SpectrumBin<f64> {
        SpectrumBin {
            frequency: f,
            amplitude: a,
            phase: 0.0,
            sign_status: SignStatus::Confirmed,
        }
    }

    fn fake_result(bins: Vec<SpectrumBin<f64>>) -> SectionResult {
        let plan = single_section_plan(20e3, 2, 400.0, 200.0, 0.1);
        let mut r = measure_section(
            &plan.sections[0],
            &CompositeSignal::empty(),
            &quiet_sensor(),
            &plan,
            0,
        )
        .unwrap();
        r.resolved = Spectrum::from_bins(bins, 0.1).unwrap();
        r
    }

    #[test]
    fn merge_dedupes_and_flags_conflicts() {
        let a = fake_result(vec![bin(100.0, 1.0), bin(200.0, 1.0)]);
        let b = fake_result(vec![bin(100.05, 1.1), bin(200.0, 2.0), bin(300.0, 1.0)]);
        let m = merge(&[a.clone(), b], 10.0).unwrap();
        assert_eq!(m.spectrum.len(), 4, "{:?}", m.spectrum);
        assert!((m.spectrum.bins[0].amplitude - 1.05).abs() < 1e-12);
        assert_eq!(m.conflicts.len(), 1);
        let single = merge(std::slice::from_ref(&a), 10.0).unwrap();
        assert_eq!(single.spectrum.bins, a.resolved.bins);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(job_seed(5, 0), 5);
        assert_ne!(job_seed(5, 1), job_seed(5, 2));
        assert_eq!(job_seed(5, 3), job_seed(5, 3));
    }
}
