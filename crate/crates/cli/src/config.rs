//! JSON run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use merit_core::estimation::FitConfig;
use merit_core::forecasters::Benchmark;
use merit_core::market_data::SynthSpec;
use merit_core::stack_assembly::{GroupMask, ParamGroup};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Rolling-window lengths of the linear forecasters, in days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Windows {
    pub hydro: usize,
    pub net_import: usize,
    pub expert: usize,
}

impl Default for Windows {
    fn default() -> Self {
        Windows {
            hydro: 365,
            net_import: 365,
            expert: 365,
        }
    }
}

/// Everything a command needs besides its input files. Relative paths are
/// resolved against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Panel schema; its file locations are relative to the schema itself.
    pub schema: Option<PathBuf>,
    /// Per file group overrides of the schema's locations.
    pub data: BTreeMap<String, PathBuf>,
    /// Plant catalog JSON; the German default fleet when absent.
    pub catalog: Option<PathBuf>,
    /// First hour of the test period. Hours before it are training data.
    pub test_start: Option<DateTime<Utc>>,
    /// Extension groups estimated by `fit` and offered to `select`.
    pub groups: Vec<ParamGroup>,
    /// Required by `fit`, `select` and `synth`.
    pub seed: Option<u64>,
    /// Optimizer settings. Its own `seed` field is replaced by `seed` above.
    pub optimizer: FitConfig,
    pub windows: Windows,
    pub benchmarks: Vec<Benchmark>,
    /// Hours whose full merit-order curve `forecast` writes out.
    pub curve_hours: Vec<DateTime<Utc>>,
    /// Write per-technology components with forecasts.
    pub decompose: bool,
    pub n_bins: usize,
    /// Market generated by `synth`.
    pub synth: SynthSpec,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: None,
            data: BTreeMap::new(),
            catalog: None,
            test_start: None,
            groups: Vec::new(),
            seed: None,
            optimizer: FitConfig::default(),
            windows: Windows::default(),
            benchmarks: Benchmark::ALL.to_vec(),
            curve_hours: Vec::new(),
            decompose: true,
            n_bins: 20,
            synth: SynthSpec::default(),
            out: PathBuf::from("out"),
        }
    }
}

/// A config together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn group_mask(&self) -> GroupMask {
        self.groups.iter().fold(GroupMask::empty(), |m, &g| m.with(g))
    }
}

impl LoadedConfig {
    /// Read `path`, or the defaults relative to the working directory.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(LoadedConfig {
                config: RunConfig::default(),
                base: PathBuf::from("."),
            });
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config = RunConfig::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Ok(LoadedConfig { config, base })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.config.out)
    }

    /// Seed for commands that must be reproducible.
    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.config
            .seed
            .ok_or_else(|| CliError::Config("this command needs a seed (config `seed` or --seed)".into()))
    }

    pub fn fit_config(&self) -> Result<FitConfig, CliError> {
        Ok(FitConfig {
            seed: self.require_seed()?,
            ..self.config.optimizer.clone()
        })
    }

    /// Check that every referenced input file exists.
    pub fn check_files(&self) -> Result<(), CliError> {
        let mut files: Vec<&PathBuf> = self.config.data.values().collect();
        files.extend(self.config.schema.iter());
        files.extend(self.config.catalog.iter());
        for f in files {
            let p = self.resolve(f);
            if !p.exists() {
                return Err(CliError::Data(merit_core::market_data::DataError::SchemaMismatch(format!(
                    "file {} does not exist",
                    p.display()
                ))));
            }
        }
        Ok(())
    }
}
