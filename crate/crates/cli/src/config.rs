//! Layered run configuration: defaults, then an optional TOML file, then
//! command-line flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use objectness_core::training::{SyntheticSpec, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const RUN_RECORD: &str = "run.toml";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSection {
    pub classes: usize,
    pub per_class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    /// Master seed shared by every stage of a run.
    pub seed: u64,
    pub preset: String,
    pub synth: SyntheticSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkSection>,
    pub train: TrainConfig,
}

impl Default for FileConfig {
    fn default() -> Self {
        FileConfig {
            seed: 0,
            preset: "toy".into(),
            synth: SyntheticSpec::default(),
            benchmark: None,
            train: TrainConfig::default(),
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }
}

/// Provenance written next to every output.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunRecord<C> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub wall_time_s: f64,
    pub config: C,
}

/// `out/run.toml` for a directory output, `out.run.toml` beside a file.
pub fn record_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join(RUN_RECORD)
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".run.toml");
        out.with_file_name(name)
    }
}

pub fn write_record<C: Serialize>(out: &Path, command: &str, seed: u64, started: Instant, config: C) -> CliResult<()> {
    let rec = RunRecord {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed,
        wall_time_s: started.elapsed().as_secs_f64(),
        config,
    };
    let path = record_path(out);
    let text = toml::to_string(&rec).map_err(|e| CliError::usage(format!("run record: {e}")))?;
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}
