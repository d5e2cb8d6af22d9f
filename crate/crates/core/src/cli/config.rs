//! Run configuration: defaults, JSON config file, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, make_folds, CsvOptions, Dataset, Fold};
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::models::{ModelConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub csv: CsvOptions,
    pub n_folds: usize,
    pub test_ratio: f64,
    pub val_ratio: f64,
    /// Seed of the fold plan, shared by every model so cells see the same splits.
    pub split_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            csv: CsvOptions::default(),
            n_folds: 20,
            test_ratio: 0.1,
            val_ratio: 0.1,
            split_seed: 0,
        }
    }
}

impl DataConfig {
    pub fn load(&self) -> Result<Dataset> {
        let path = self
            .path
            .as_ref()
            .ok_or_else(|| Error::config("data.path", "no dataset given (use --data)"))?;
        load_csv(path, &self.csv)
    }

    /// Fold `index` of the configured plan; a dataset with its own split column
    /// has exactly one fold.
    pub fn fold(&self, dataset: &Dataset, index: usize) -> Result<Fold> {
        if let Some(split) = &dataset.split {
            if index != 0 {
                return Err(Error::config("fold", "dataset carries a fixed split; only fold 0 exists"));
            }
            return Fold::from_split(split);
        }
        if index >= self.n_folds {
            return Err(Error::config("fold", format!("fold {index} >= n_folds {}", self.n_folds)));
        }
        let mut plan = make_folds(dataset.len(), index + 1, self.test_ratio, self.val_ratio, self.split_seed)?;
        Ok(plan.folds.swap_remove(index))
    }

    pub fn available_folds(&self, dataset: &Dataset) -> usize {
        if dataset.split.is_some() {
            1
        } else {
            self.n_folds
        }
    }
}

/// Everything a run depends on. The output directory is deliberately not part
/// of it, so a run can be replayed elsewhere from its echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub fold: usize,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            fold: 0,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.data.n_folds == 0 {
            return Err(Error::config("data.n_folds", "must be >= 1"));
        }
        if self.eval.n_bins == 0 {
            return Err(Error::config("eval.n_bins", "must be >= 1"));
        }
        if self.eval.audit_points < 2 {
            return Err(Error::config("eval.audit_points", "must be >= 2"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}
