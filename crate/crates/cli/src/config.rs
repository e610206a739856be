//! JSON run configuration. Every key is optional except `entries`; unknown
//! keys are rejected so typos fail loudly.

use std::path::{Path, PathBuf};

use decomp_conformal::{DatasetSpec, HyperParams, SweepConfig, SweepEntry};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    /// Report directory; `--out` and `DCP_OUTPUT_DIR` take precedence.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub dataset: DatasetSpec,
    pub entries: Vec<SweepEntry>,
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub hyper_params: HyperParams,
    #[serde(default)]
    pub train_fraction: Option<f64>,
    #[serde(default)]
    pub cal_fraction: Option<f64>,
    #[serde(default)]
    pub bonferroni: bool,
    #[serde(default)]
    pub record_runtime: Option<bool>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: CliConfig = serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        // relative CSV paths are resolved against the config file
        if let DatasetSpec::Csv { path: csv, .. } = &mut config.dataset {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(config)
    }

    pub fn into_sweep(self) -> SweepConfig {
        let mut sweep = SweepConfig::new(self.dataset, self.entries);
        if let Some(a) = self.alphas {
            sweep.alphas = a;
        }
        if let Some(s) = self.seeds {
            sweep.seeds = s;
        }
        if let Some(f) = self.train_fraction {
            sweep.train_fraction = f;
        }
        if let Some(f) = self.cal_fraction {
            sweep.cal_fraction = f;
        }
        if let Some(r) = self.record_runtime {
            sweep.record_runtime = r;
        }
        sweep.hyper_params = self.hyper_params;
        sweep.bonferroni = self.bonferroni;
        sweep
    }
}
