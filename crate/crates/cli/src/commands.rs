use std::fmt::Write as _;
use std::path::Path;

use qpsd_core::analyzer::{job_seed, run_plan};
use qpsd_core::audio::{
    encode, read_wav, reconstruct_melody, reconstruct_speech, write_wav, AudioClip,
};
use qpsd_core::lockin::{
    demod_stage1, demod_stage2, ldr_db, phase_noise, sensitivity, sensitivity_fluorescence,
};
use qpsd_core::physics::{filter_closed_form, filter_numeric_oracle};
use qpsd_core::sensor::simulate_run;
use qpsd_core::signal::SignStatus;

use crate::config::Loaded;
use crate::error::CliError;
use crate::manifest::Outputs;

/// Seed streams, one per component drawing randomness.
const SIMULATE_STREAM: u64 = 0;
const ANALYZE_STREAM: u64 = 1;
const AUDIO_STREAM: u64 = 2;

fn write_clip(out: &mut Outputs, name: &str, clip: &AudioClip) -> Result<(), CliError> {
    out.write_with(name, |p| write_wav(clip, p).map_err(|e| CliError::io(p, e)))?;
    Ok(())
}

pub fn simulate(cfg: &Loaded) -> Result<Outputs, CliError> {
    let seq = cfg.sequence()?;
    let sensor = cfg.sensor()?;
    let lockin = cfg.lockin(&seq, sensor.drive.delta_f)?;
    let duration = cfg.duration()?;
    let signal = cfg.signal()?;
    let mut out = Outputs::create(&cfg.config)?;
    let trace = simulate_run(
        &sensor,
        &seq,
        &signal,
        duration,
        job_seed(cfg.config.seed, SIMULATE_STREAM),
    )?;
    let demod = demod_stage2(&demod_stage1(&trace)?, &lockin)?;
    out.write("trace.csv", trace.to_csv().as_bytes())?;
    out.write("demod.csv", demod.to_csv().as_bytes())?;
    out.note("pairs", trace.len());
    out.note("samples_per_cycle", lockin.samples_per_cycle);
    out.note("settle_samples", lockin.settle_samples());
    out.note("phase_slips", demod.phase_slips.len());
    if let Ok(phi) = demod.mean_phase(lockin.settle_samples(), lockin.samples_per_cycle) {
        out.note("mean_phase_rad", phi);
        println!("mean phase {phi:.6} rad");
    }
    println!("{} pairs, {} demodulated samples", trace.len(), demod.len());
    Ok(out)
}

pub fn filter(cfg: &Loaded) -> Result<Outputs, CliError> {
    let seq = cfg.sequence()?;
    let omegas = cfg.omegas()?;
    let mut csv = String::from("frequency_hz,omega_rad_s,magnitude_s,phase_rad,oracle_magnitude_s,oracle_phase_rad,singular\n");
    for &w in &omegas {
        let c = filter_closed_form(&seq, w)?;
        let o = filter_numeric_oracle(&seq, w)?;
        let _ = writeln!(
            csv,
            "{},{w},{},{},{},{},{}",
            w / (2.0 * std::f64::consts::PI),
            c.value.magnitude,
            c.value.phase,
            o.magnitude,
            o.phase,
            c.singular
        );
    }
    let mut out = Outputs::create(&cfg.config)?;
    out.write("filter.csv", csv.as_bytes())?;
    out.note("points", omegas.len());
    println!("{} points", omegas.len());
    Ok(out)
}

pub fn sensitivity_report(cfg: &Loaded) -> Result<Outputs, CliError> {
    let seq = cfg.sequence()?;
    let sensor = cfg.sensor()?;
    let eta = sensitivity(&sensor, &seq).map_err(|e| cfg.error("sequence", e))?;
    let eta_f = sensitivity_fluorescence(&sensor, &seq).map_err(|e| cfg.error("sequence", e))?;
    let mut out = Outputs::create(&cfg.config)?;
    let mut report = serde_json::Map::new();
    let mut put = |k: &str, v: f64| {
        report.insert(k.into(), v.into());
    };
    put("eta_qpsd_t_per_rthz", eta);
    put("eta_fluorescence_t_per_rthz", eta_f);
    put("eta_ratio", eta / eta_f);
    println!("eta (QPSD)         {:.4} pT/sqrt(Hz)", eta * 1e12);
    println!("eta (fluorescence) {:.4} pT/sqrt(Hz)", eta_f * 1e12);
    if sensor.drive.delta_f > 0.0 {
        let n =
            qpsd_core::sensor::samples_per_cycle(1.0 / (2.0 * seq.t_seq()), sensor.drive.delta_f)
                .map_err(|e| cfg.error("sensor.delta_f_hz", e))?;
        let dphi = phase_noise(&sensor, n);
        put("delta_phi_rad", dphi);
        println!("delta phi per cycle {dphi:.6e} rad (N = {n})");
    }
    if let Some(l) = cfg.ldr() {
        let (eta_ldr, key) = match l.eta_pt_per_rthz {
            Some(v) => (v * 1e-12, "ldr.eta_pt_per_rthz"),
            None => (eta, "ldr.k_sf_deg_per_nt"),
        };
        let db =
            ldr_db(l.k_sf_deg_per_nt, eta_ldr, l.bandwidth_hz).map_err(|e| cfg.error(key, e))?;
        put("ldr_db", db);
        println!("linear dynamic range {db:.2} dB");
    }
    let mut json =
        serde_json::to_vec_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    json.push(b'\n');
    out.write("sensitivity.json", &json)?;
    out.summary = report;
    Ok(out)
}

pub fn analyze(cfg: &Loaded) -> Result<Outputs, CliError> {
    let plan = cfg.plan()?;
    let sensor = cfg.sensor()?;
    let signal = cfg.signal()?;
    let mut out = Outputs::create(&cfg.config)?;
    let report = run_plan(
        &plan,
        &signal,
        &sensor,
        job_seed(cfg.config.seed, ANALYZE_STREAM),
    )?;
    out.write("plan.csv", plan.to_csv().as_bytes())?;
    out.write("spectrum.csv", report.merged.spectrum.to_csv().as_bytes())?;
    let confirmed = report
        .merged
        .spectrum
        .with_status(SignStatus::Confirmed)
        .count();
    out.note("sections", plan.sections.len());
    out.note("confirmed_tones", confirmed);
    out.note("amplitude_conflicts", report.merged.conflicts.len());
    out.note("warnings", &plan.warnings);
    for w in &plan.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{} sections, {confirmed} confirmed tones",
        plan.sections.len()
    );
    for b in report.merged.spectrum.with_status(SignStatus::Confirmed) {
        println!("{:>12.3} Hz  {:.4e} T", b.frequency, b.amplitude);
    }
    Ok(out)
}

fn input_clip(path: &Path) -> Result<AudioClip, CliError> {
    read_wav(path).map_err(|e| CliError::io(path, e))
}

pub fn audio_encode(cfg: &Loaded) -> Result<Outputs, CliError> {
    let encoding = cfg.encoding()?;
    let audio = cfg.audio()?;
    let clip = input_clip(&audio.input_wav)?;
    let broadcast = encode(&clip, &encoding).map_err(|e| cfg.error("audio.carrier_hz", e))?;
    let mut out = Outputs::create(&cfg.config)?;
    write_clip(&mut out, "broadcast.wav", &broadcast)?;
    out.note("duration_s", broadcast.duration());
    out.note("sample_rate_hz", broadcast.sample_rate);
    println!(
        "{:.3} s broadcast at {} Hz",
        broadcast.duration(),
        broadcast.sample_rate
    );
    Ok(out)
}

pub fn audio_decode(cfg: &Loaded) -> Result<Outputs, CliError> {
    let encoding = cfg.encoding()?;
    let receiver = cfg.receiver()?;
    let sensor = cfg.sensor()?;
    let audio = cfg.audio()?;
    let peak = audio.field_peak_nt.unwrap_or(50.0);
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(cfg.error("audio.field_peak_nt", "must be finite and > 0"));
    }
    let broadcast = input_clip(&audio.input_wav)?;
    let field = broadcast.to_field(peak * 1e-9)?;
    let readout = receiver.receive(
        &field,
        &sensor,
        broadcast.duration(),
        job_seed(cfg.config.seed, AUDIO_STREAM),
    )?;
    let decoded = if audio.mode == "speech" {
        reconstruct_speech(&readout, encoding.compression_factor, encoding.expansion)?
    } else {
        reconstruct_melody(&readout, &encoding)?
    };
    let mut out = Outputs::create(&cfg.config)?;
    write_clip(&mut out, "decoded.wav", &decoded)?;
    let warnings: Vec<&str> = decoded.warnings().collect();
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    out.note("warnings", &warnings);
    out.note("duration_s", decoded.duration());
    out.note("sample_rate_hz", decoded.sample_rate);
    println!(
        "{:.3} s decoded at {} Hz",
        decoded.duration(),
        decoded.sample_rate
    );
    Ok(out)
}
