//! Output directory handling, atomic writes and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::CliError;

/// Overrides `output_dir` from the config when set.
pub const OUT_DIR_ENV: &str = "QPSD_OUT_DIR";

#[derive(Debug, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub bytes: u64,
}

/// Everything needed to rerun a command: feeding the manifest back as the config reproduces
/// every output byte for byte.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: Config,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub outputs: Vec<OutputFile>,
    /// Scalar results and warnings, by name.
    pub summary: serde_json::Map<String, serde_json::Value>,
}

pub fn config_from_manifest(source: &str) -> Result<Config, String> {
    let m: RunManifest = serde_json::from_str(source).map_err(|e| e.to_string())?;
    Ok(m.config)
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Collects the files a command writes and emits `manifest.json` last.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<OutputFile>,
    started: f64,
    pub summary: serde_json::Map<String, serde_json::Value>,
}

impl Outputs {
    pub fn create(config: &Config) -> Result<Self, CliError> {
        let dir = std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("qpsd-out"));
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self {
            dir,
            files: Vec::new(),
            started: now(),
            summary: serde_json::Map::new(),
        })
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.summary.insert(key.to_string(), v);
    }

    /// Writes `name` via a temporary file in the same directory and a rename.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
        self.write_with(name, |path| {
            std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
        })
    }

    /// As [`write`](Self::write), with `fill` producing the file at the temporary path.
    pub fn write_with(
        &mut self,
        name: &str,
        fill: impl FnOnce(&Path) -> Result<(), CliError>,
    ) -> Result<PathBuf, CliError> {
        let target = self.dir.join(name);
        let prefix = format!(".{name}.");
        let mut builder = tempfile::Builder::new();
        builder.prefix(&prefix);
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            builder.permissions(std::fs::Permissions::from_mode(0o644));
        }
        let tmp = builder
            .tempfile_in(&self.dir)
            .map_err(|e| CliError::io(&self.dir, e))?;
        fill(tmp.path())?;
        tmp.as_file()
            .sync_all()
            .map_err(|e| CliError::io(tmp.path(), e))?;
        tmp.persist(&target)
            .map_err(|e| CliError::io(&target, e.error))?;
        let bytes = std::fs::metadata(&target)
            .map_err(|e| CliError::io(&target, e))?
            .len();
        self.files.push(OutputFile {
            path: PathBuf::from(name),
            bytes,
        });
        Ok(target)
    }

    pub fn finish(mut self, command: &str, config: &Config) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            tool: "qpsd".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: config.seed,
            config: config.clone(),
            started_unix_s: self.started,
            finished_unix_s: now(),
            outputs: std::mem::take(&mut self.files),
            summary: std::mem::take(&mut self.summary),
        };
        let mut json =
            serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        json.write_all(b"\n").expect("vec write");
        self.write("manifest.json", &json)
    }
}
