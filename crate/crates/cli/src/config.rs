//! TOML run configuration. Every dimensional key carries its unit in the name.

use std::path::{Path, PathBuf};

use qpsd_core::analyzer::{plan_sections_with_overlap, AnalyzerPlan};
use qpsd_core::audio::{EncodingConfig, Expansion, Receiver};
use qpsd_core::lockin::LockInConfig;
use qpsd_core::physics::{DriveConfig, PulseSequence, SequenceKind, GAMMA_E};
use qpsd_core::sensor::{samples_per_cycle, NoiseModel, SensorConfig};
use qpsd_core::signal::{CompositeSignal, SignalComponent};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub sequence: Option<SequenceSection>,
    pub sensor: Option<SensorSection>,
    pub lockin: Option<LockinSection>,
    pub run: Option<RunSection>,
    pub filter: Option<FilterSection>,
    pub ldr: Option<LdrSection>,
    pub analyzer: Option<AnalyzerSection>,
    pub audio: Option<AudioSection>,
    /// Extra tones read from another TOML file holding `[[signal]]` tables.
    pub signal_file: Option<PathBuf>,
    #[serde(default)]
    pub signal: Vec<Tone>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSection {
    #[serde(default = "default_kind")]
    pub kind: String,
    /// Pi-pulse count for `kind = "cpmg"`.
    pub pulses: Option<u32>,
    pub t_phi_us: f64,
    pub m: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    #[serde(default = "default_photons")]
    pub photons: f64,
    #[serde(default)]
    pub delta_f_hz: f64,
    #[serde(default = "default_noise")]
    pub noise: String,
    #[serde(default = "default_gamma")]
    pub gamma_e_hz_per_nt: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockinSection {
    pub cutoff_hz: f64,
    #[serde(default = "default_order")]
    pub filter_order: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub duration_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdrSection {
    pub k_sf_deg_per_nt: f64,
    pub bandwidth_hz: f64,
    /// Measured sensitivity; the shot-noise value is used when absent.
    pub eta_pt_per_rthz: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerSection {
    pub range_lo_hz: f64,
    pub range_hi_hz: f64,
    pub section_bandwidth_hz: f64,
    pub min_pair_rate_hz: f64,
    pub lia_cutoff_hz: f64,
    pub trace_duration_s: f64,
    #[serde(default = "default_t_clk")]
    pub t_clk_ns: f64,
    #[serde(default)]
    pub overlap_hz: f64,
    #[serde(default = "default_spike")]
    pub spike_threshold_mad: f64,
    #[serde(default = "default_n")]
    pub samples_per_cycle: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AudioSection {
    /// `melody` or `speech`; picks the defaults for every omitted key.
    pub mode: String,
    pub input_wav: PathBuf,
    pub carrier_hz: Option<f64>,
    pub compression_factor: Option<usize>,
    pub reconstruction_carrier_hz: Option<f64>,
    pub notch_freqs_hz: Option<Vec<f64>>,
    pub notch_q: Option<f64>,
    pub lia_bandwidth_hz: Option<f64>,
    /// `block_average` or `decimate`.
    pub expansion: Option<String>,
    /// Peak field of the broadcast seen by the sensor.
    pub field_peak_nt: Option<f64>,
    pub t_phi_us: Option<f64>,
    pub m: Option<u32>,
    pub samples_per_cycle: Option<usize>,
    pub cutoff_hz: Option<f64>,
    pub filter_order: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tone {
    pub amplitude_nt: f64,
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalFile {
    #[serde(default)]
    signal: Vec<Tone>,
}

fn default_kind() -> String {
    "hahn".into()
}
fn default_contrast() -> f64 {
    0.0019
}
fn default_photons() -> f64 {
    4.6e11
}
fn default_noise() -> String {
    "auto".into()
}
fn default_gamma() -> f64 {
    GAMMA_E / (2.0 * std::f64::consts::PI * 1e9)
}
fn default_order() -> usize {
    4
}
fn default_t_clk() -> f64 {
    4.0
}
fn default_spike() -> f64 {
    5.0
}
fn default_n() -> usize {
    10
}

/// A parsed configuration together with its source text, used to anchor errors to lines.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub path: PathBuf,
    pub source: String,
    pub config: Config,
    /// Source and count of the tones appended from `signal_file`.
    file_tones: Option<(PathBuf, usize)>,
}

impl Loaded {
    /// Reads a TOML config, or the `config` object of a JSON run manifest.
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let source = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config = if path.extension().is_some_and(|x| x == "json") {
            crate::manifest::config_from_manifest(&source)
                .map_err(|m| CliError::Config(format!("{}: {m}", path.display())))?
        } else {
            toml::from_str(&source).map_err(|e| {
                CliError::Config(format!("{}: {}", path.display(), e.to_string().trim_end()))
            })?
        };
        let mut loaded = Self {
            path: path.to_path_buf(),
            source,
            config,
            file_tones: None,
        };
        loaded.resolve_paths();
        loaded.inline_signal_file()?;
        Ok(loaded)
    }

    /// Relative paths in the file are taken relative to the file itself, and stored absolute so
    /// that the manifest snapshot is location independent.
    fn resolve_paths(&mut self) {
        let base = self
            .path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let base = std::fs::canonicalize(&base).unwrap_or(base);
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.config.output_dir.as_mut() {
            fix(p);
        }
        if let Some(p) = self.config.signal_file.as_mut() {
            fix(p);
        }
        if let Some(a) = self.config.audio.as_mut() {
            fix(&mut a.input_wav);
        }
    }

    /// Config error at `key` (`table.name`, `table[i].name` or a bare top-level name).
    pub fn error(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        let at = match locate(&self.source, key) {
            Some(line) => format!("{}:{line}", self.path.display()),
            None => format!("{} (key not set)", self.path.display()),
        };
        CliError::Config(format!("{at}: `{key}`: {msg}"))
    }

    fn missing(&self, table: &str) -> CliError {
        CliError::Config(format!("{}: missing table [{table}]", self.path.display()))
    }

    /// Inline `[[signal]]` tones plus any from `signal_file`, amplitudes converted to tesla.
    pub fn signal(&self) -> Result<CompositeSignal<f64>, CliError> {
        let inline = self.config.signal.len() - self.file_tones.as_ref().map_or(0, |f| f.1);
        let mut components = Vec::with_capacity(self.config.signal.len());
        for (i, t) in self.config.signal.iter().enumerate() {
            let c = SignalComponent::new(t.amplitude_nt * 1e-9, t.frequency_hz, t.phase_rad)
                .map_err(|e| match &self.file_tones {
                    Some((path, _)) if i >= inline => CliError::Config(format!(
                        "{}: `signal[{}]`: {e}",
                        path.display(),
                        i - inline
                    )),
                    _ => self.error(&format!("signal[{i}].frequency_hz"), e),
                })?;
            components.push(c);
        }
        Ok(CompositeSignal::new(components))
    }

    /// Moves the tones of `signal_file` into the config so the manifest snapshot is self-contained.
    fn inline_signal_file(&mut self) -> Result<(), CliError> {
        let Some(path) = self.config.signal_file.take() else {
            return Ok(());
        };
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let file: SignalFile = toml::from_str(&text).map_err(|e| {
            CliError::Config(format!("{}: {}", path.display(), e.to_string().trim_end()))
        })?;
        let count = file.signal.len();
        self.config.signal.extend(file.signal);
        self.file_tones = Some((path, count));
        Ok(())
    }

    pub fn sequence(&self) -> Result<PulseSequence<f64>, CliError> {
        let s = self
            .config
            .sequence
            .as_ref()
            .ok_or_else(|| self.missing("sequence"))?;
        let kind = match s.kind.as_str() {
            "hahn" => SequenceKind::Cpmg(1),
            "ramsey" => SequenceKind::Ramsey,
            "cpmg" => SequenceKind::Cpmg(
                s.pulses
                    .ok_or_else(|| self.error("sequence.pulses", "required for kind = \"cpmg\""))?,
            ),
            other => {
                return Err(self.error(
                    "sequence.kind",
                    format!("unknown kind {other:?}; use hahn, ramsey or cpmg"),
                ))
            }
        };
        if s.pulses.is_some() && s.kind != "cpmg" {
            return Err(self.error("sequence.pulses", "only valid with kind = \"cpmg\""));
        }
        PulseSequence::new(kind, s.t_phi_us * 1e-6, s.m)
            .map_err(|e| self.error(&key_for("sequence", &e), e))
    }

    pub fn sensor(&self) -> Result<SensorConfig, CliError> {
        let d = SensorSection {
            contrast: default_contrast(),
            photons: default_photons(),
            delta_f_hz: 0.0,
            noise: default_noise(),
            gamma_e_hz_per_nt: default_gamma(),
        };
        let s = self.config.sensor.as_ref().unwrap_or(&d);
        let noise = match s.noise.as_str() {
            "auto" => NoiseModel::Auto,
            "poisson" => NoiseModel::Poisson,
            "gaussian" => NoiseModel::Gaussian,
            "off" => NoiseModel::Off,
            other => {
                return Err(self.error(
                    "sensor.noise",
                    format!("unknown model {other:?}; use auto, poisson, gaussian or off"),
                ))
            }
        };
        if !(s.delta_f_hz >= 0.0) {
            return Err(self.error("sensor.delta_f_hz", "must be >= 0"));
        }
        let mut sensor =
            SensorConfig::new(s.contrast, s.photons, DriveConfig::resonant(s.delta_f_hz))
                .map_err(|e| self.error(&key_for("sensor", &e), e))?
                .with_noise(noise);
        if !(s.gamma_e_hz_per_nt > 0.0) {
            return Err(self.error("sensor.gamma_e_hz_per_nt", "must be > 0"));
        }
        sensor.gamma_e = 2.0 * std::f64::consts::PI * s.gamma_e_hz_per_nt * 1e9;
        Ok(sensor)
    }

    /// Lock-in for `seq`, enforcing the even-N rule on `sensor.delta_f_hz`.
    pub fn lockin(&self, seq: &PulseSequence<f64>, delta_f: f64) -> Result<LockInConfig, CliError> {
        let l = self
            .config
            .lockin
            .as_ref()
            .ok_or_else(|| self.missing("lockin"))?;
        let pair_rate = 1.0 / (2.0 * seq.t_seq());
        if !(delta_f > 0.0) {
            return Err(self.error("sensor.delta_f_hz", "must be > 0 for a lock-in run"));
        }
        samples_per_cycle(pair_rate, delta_f).map_err(|e| self.error("sensor.delta_f_hz", e))?;
        LockInConfig::for_rate(pair_rate, delta_f, l.cutoff_hz, l.filter_order)
            .map_err(|e| self.error(&key_for("lockin", &e), e))
    }

    pub fn duration(&self) -> Result<f64, CliError> {
        let r = self
            .config
            .run
            .as_ref()
            .ok_or_else(|| self.missing("run"))?;
        if !(r.duration_s > 0.0 && r.duration_s.is_finite()) {
            return Err(self.error("run.duration_s", "must be finite and > 0"));
        }
        Ok(r.duration_s)
    }

    /// Angular frequencies of the filter sweep; `points = 0` gives an empty sweep.
    pub fn omegas(&self) -> Result<Vec<f64>, CliError> {
        let f = self
            .config
            .filter
            .as_ref()
            .ok_or_else(|| self.missing("filter"))?;
        if !(f.f_min_hz >= 0.0) {
            return Err(self.error("filter.f_min_hz", "must be >= 0"));
        }
        if !(f.f_max_hz >= f.f_min_hz) {
            return Err(self.error("filter.f_max_hz", "must be >= f_min_hz"));
        }
        let tau = 2.0 * std::f64::consts::PI;
        Ok(match f.points {
            0 => Vec::new(),
            1 => vec![tau * f.f_min_hz],
            n => (0..n)
                .map(|i| tau * (f.f_min_hz + (f.f_max_hz - f.f_min_hz) * i as f64 / (n - 1) as f64))
                .collect(),
        })
    }

    pub fn ldr(&self) -> Option<&LdrSection> {
        self.config.ldr.as_ref()
    }

    pub fn plan(&self) -> Result<AnalyzerPlan, CliError> {
        let a = self
            .config
            .analyzer
            .as_ref()
            .ok_or_else(|| self.missing("analyzer"))?;
        let mut plan = plan_sections_with_overlap(
            a.range_lo_hz,
            a.range_hi_hz,
            a.section_bandwidth_hz,
            a.min_pair_rate_hz,
            a.lia_cutoff_hz,
            a.overlap_hz,
        )
        .map_err(|e| self.error(&key_for("analyzer", &e), e))?;
        plan.trace_duration = a.trace_duration_s;
        plan.t_clk = a.t_clk_ns * 1e-9;
        plan.spike_threshold = a.spike_threshold_mad;
        plan.samples_per_cycle = a.samples_per_cycle;
        plan.validate()
            .map_err(|e| self.error(&key_for("analyzer", &e), e))?;
        Ok(plan)
    }

    pub fn audio(&self) -> Result<&AudioSection, CliError> {
        self.config
            .audio
            .as_ref()
            .ok_or_else(|| self.missing("audio"))
    }

    pub fn encoding(&self) -> Result<EncodingConfig, CliError> {
        let a = self.audio()?;
        let mut c = match a.mode.as_str() {
            "melody" => EncodingConfig::melody(),
            "speech" => EncodingConfig::speech(),
            other => {
                return Err(self.error(
                    "audio.mode",
                    format!("unknown mode {other:?}; use melody or speech"),
                ))
            }
        };
        c.carrier = a.carrier_hz.unwrap_or(c.carrier);
        c.compression_factor = a.compression_factor.unwrap_or(c.compression_factor);
        c.reconstruction_carrier = a
            .reconstruction_carrier_hz
            .unwrap_or(c.reconstruction_carrier);
        c.notch_freqs = a.notch_freqs_hz.clone().unwrap_or(c.notch_freqs);
        c.notch_q = a.notch_q.unwrap_or(c.notch_q);
        c.lia_bandwidth = a.lia_bandwidth_hz.unwrap_or(c.lia_bandwidth);
        c.expansion = match a.expansion.as_deref() {
            None => c.expansion,
            Some("block_average") => Expansion::BlockAverage,
            Some("decimate") => Expansion::Decimate,
            Some(other) => {
                return Err(self.error(
                    "audio.expansion",
                    format!("unknown mode {other:?}; use block_average or decimate"),
                ))
            }
        };
        c.validate()
            .map_err(|e| self.error(&key_for("audio", &e), e))?;
        Ok(c)
    }

    pub fn receiver(&self) -> Result<Receiver, CliError> {
        let a = self.audio()?;
        let mut r = if a.mode == "speech" {
            Receiver::speech()
        } else {
            Receiver::melody()
        };
        r.t_phi = a.t_phi_us.map_or(r.t_phi, |t| t * 1e-6);
        r.m = a.m.unwrap_or(r.m);
        r.samples_per_cycle = a.samples_per_cycle.unwrap_or(r.samples_per_cycle);
        r.cutoff = a.cutoff_hz.unwrap_or(r.cutoff);
        r.filter_order = a.filter_order.unwrap_or(r.filter_order);
        r.lockin()
            .map_err(|e| self.error(&key_for("audio", &e), e))?;
        Ok(r)
    }
}

/// Maps a core validation error onto the config key it came from.
fn key_for(table: &str, e: &qpsd_core::Error) -> String {
    use qpsd_core::Error as E;
    let name = match e {
        E::InvalidParameter { name, .. } => match *name {
            "t_phi" => "t_phi_us",
            "demod2_freq" | "delta_f" => "delta_f_hz",
            "cutoff" => "cutoff_hz",
            "trace_duration" => "trace_duration_s",
            "t_clk" => "t_clk_ns",
            "overlap" => "overlap_hz",
            "range" => "range_lo_hz",
            "plan" => "section_bandwidth_hz",
            "section" => "section_bandwidth_hz",
            other => other,
        },
        E::OddSamplesPerCycle { .. } => "samples_per_cycle",
        E::InfeasiblePlan(_) => "section_bandwidth_hz",
        _ => return table.to_string(),
    };
    format!("{table}.{name}")
}

/// 1-based line of `key` in a TOML source, following `[table]` and `[[table]]` headers.
pub fn locate(source: &str, key: &str) -> Option<usize> {
    let (table, index, name) = split_key(key);
    let mut current = String::new();
    let mut seen = -1i64;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(h) = line.strip_prefix("[[").and_then(|l| l.strip_suffix("]]")) {
            current = h.trim().to_string();
            if current == table {
                seen += 1;
            }
            continue;
        }
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        let in_table = current == table && index.is_none_or(|n| seen == n as i64);
        if !in_table {
            continue;
        }
        match line.split_once('=') {
            Some((k, _)) if k.trim() == name => return Some(i + 1),
            _ if name.is_empty() => return Some(i + 1),
            _ => {}
        }
    }
    None
}

fn split_key(key: &str) -> (&str, Option<usize>, &str) {
    let (table, name) = match key.rsplit_once('.') {
        Some((t, n)) => (t, n),
        None => ("", key),
    };
    match table.split_once('[') {
        Some((t, rest)) => (t, rest.trim_end_matches(']').parse().ok(), name),
        None => (table, None, name),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "seed = 3\n\n[sensor]\n# comment\ndelta_f_hz = 500.0 # trailing\n\n[[signal]]\nfrequency_hz = 1\n\n[[signal]]\nfrequency_hz = 2\n";

    #[test]
    fn locates_keys_by_table() {
        assert_eq!(locate(SRC, "seed"), Some(1));
        assert_eq!(locate(SRC, "sensor.delta_f_hz"), Some(5));
        assert_eq!(locate(SRC, "signal[1].frequency_hz"), Some(11));
        assert_eq!(locate(SRC, "signal[0].frequency_hz"), Some(8));
        assert_eq!(locate(SRC, "sensor.photons"), None);
    }

    #[test]
    fn rejects_unitless_keys() {
        let err = toml::from_str::<Config>("[run]\nduration = 1.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("duration"), "{err}");
    }

    #[test]
    fn default_gamma_matches_core() {
        assert!((default_gamma() - 28.0).abs() < 1e-12);
    }
}
