//! Train and evaluate a single run directory.
//!
//! A run directory holds `config.json` (the resolved [`RunConfig`]),
//! `checkpoint.bin`, `manifest.json` and `history.csv`; `evaluate` adds
//! `report.json` and `fan.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RunConfig;
use crate::cheb::{ConstantMode, IntegrationLength};
use crate::data::{prepare_fold, Dataset, FoldData, Standardizer};
use crate::error::{Error, Result};
use crate::eval::{evaluate_model, EvalReport};
use crate::models::{Penalty, QuantileModel, TrainData, TrainingHistory};
use crate::nnet::{decode_networks, encode_networks};
use crate::rng::{stream_rng, STREAM_INIT};

pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const REPORT_FILE: &str = "report.json";
pub const FAN_FILE: &str = "fan.csv";
pub const INVERT_FILE: &str = "invert.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl From<&TrainingHistory> for TrainingSummary {
    fn from(h: &TrainingHistory) -> Self {
        Self {
            epochs_run: h.epochs.last().map_or(0, |r| r.epoch),
            best_epoch: h.best_epoch,
            best_val_loss: h.best_val_loss,
            stopped_early: h.stopped_early,
        }
    }
}

/// Everything needed to rebuild and check a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub family: crate::models::ModelFamily,
    pub input_dim: usize,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub dropped_columns: Vec<String>,
    /// Ours families only.
    pub constant_mode: Option<ConstantMode>,
    pub integration_length: Option<IntegrationLength>,
    pub penalty: Penalty,
    pub param_count: usize,
    pub checkpoint: String,
    pub checkpoint_sha256: String,
    pub standardizer: Standardizer,
    pub training: TrainingSummary,
    pub config: RunConfig,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn constant_mode(model: &QuantileModel) -> Option<ConstantMode> {
    use crate::models::ModelFamily::*;
    match model.family() {
        OursQ0 => Some(ConstantMode::Q0),
        OursMean => Some(ConstantMode::Mean),
        _ => None,
    }
}

/// Loads the configured dataset and prepares the configured fold.
pub fn resolve_fold(cfg: &RunConfig) -> Result<(Dataset, FoldData)> {
    let dataset = cfg.data.load()?;
    let fold = cfg.data.fold(&dataset, cfg.fold)?;
    let prepared = prepare_fold(&dataset, &fold)?;
    Ok((dataset, prepared))
}

/// Trains one (model, fold) into `out` and returns its manifest.
pub fn train_run(cfg: &RunConfig, out: &Path) -> Result<ModelManifest> {
    cfg.validate()?;
    let (dataset, fold) = resolve_fold(cfg)?;
    let mut model = QuantileModel::new(cfg.model.clone(), dataset.n_features(), &mut stream_rng(cfg.seed, STREAM_INIT))?;
    let history = model.train(
        TrainData {
            train_x: &fold.train_x,
            train_y: &fold.train_y,
            val_x: &fold.val_x,
            val_y: &fold.val_y,
        },
        &cfg.train,
        cfg.seed,
    )?;

    fs::create_dir_all(out)?;
    let bytes = encode_networks(&model.networks());
    fs::write(out.join(CHECKPOINT_FILE), &bytes)?;
    fs::write(out.join(CONFIG_FILE), cfg.to_json())?;
    fs::write(out.join(HISTORY_FILE), history.to_csv())?;
    let manifest = ModelManifest {
        family: model.family(),
        input_dim: model.input_dim(),
        feature_names: dataset.feature_names.clone(),
        target_name: dataset.target_name.clone(),
        dropped_columns: dataset.dropped_columns.clone(),
        constant_mode: constant_mode(&model),
        integration_length: model.family().is_chebyshev().then_some(cfg.model.integration_length),
        penalty: model.family().penalty(),
        param_count: model.param_count(),
        checkpoint: CHECKPOINT_FILE.into(),
        checkpoint_sha256: sha256_hex(&bytes),
        standardizer: fold.standardizer.clone(),
        training: TrainingSummary::from(&history),
        config: cfg.clone(),
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    log::info!(
        "trained {} fold {} (best epoch {}, val {:.6}) into {}",
        manifest.family,
        cfg.fold,
        manifest.training.best_epoch,
        manifest.training.best_val_loss,
        out.display()
    );
    Ok(manifest)
}

/// Reads a run's manifest and checkpoint, checking the checkpoint digest.
pub fn load_run(dir: &Path) -> Result<(ModelManifest, QuantileModel)> {
    let manifest: ModelManifest = read_json(&dir.join(MANIFEST_FILE))?;
    let ckpt: PathBuf = dir.join(&manifest.checkpoint);
    let bytes = fs::read(&ckpt).map_err(|e| Error::Checkpoint(format!("{}: {e}", ckpt.display())))?;
    let digest = sha256_hex(&bytes);
    if digest != manifest.checkpoint_sha256 {
        return Err(Error::Checkpoint(format!(
            "{} has sha256 {digest}, manifest records {}",
            ckpt.display(),
            manifest.checkpoint_sha256
        )));
    }
    if manifest.config.model.family != manifest.family {
        return Err(Error::Checkpoint("manifest family disagrees with its config".into()));
    }
    let nets = decode_networks(&bytes)?;
    let model = QuantileModel::from_networks(manifest.config.model.clone(), manifest.input_dim, nets)?;
    Ok((manifest, model))
}

/// Rebuilds the fold a run was trained on (optionally from another copy of the
/// data) and checks it against the recorded standardizer.
pub fn run_fold(manifest: &ModelManifest, data_override: Option<&Path>) -> Result<FoldData> {
    let mut cfg = manifest.config.clone();
    if let Some(p) = data_override {
        cfg.data.path = Some(p.to_path_buf());
    }
    let (dataset, fold) = resolve_fold(&cfg)?;
    if dataset.feature_names != manifest.feature_names || dataset.target_name != manifest.target_name {
        return Err(Error::Data(format!(
            "dataset columns {:?} -> {} do not match the run ({:?} -> {})",
            dataset.feature_names, dataset.target_name, manifest.feature_names, manifest.target_name
        )));
    }
    if fold.standardizer != manifest.standardizer {
        return Err(Error::Data("dataset differs from the one the run was trained on (standardizer mismatch)".into()));
    }
    Ok(fold)
}

pub struct EvaluatedRun {
    pub report: EvalReport,
    pub manifest: ModelManifest,
    pub model: QuantileModel,
    pub fold: FoldData,
}

/// Evaluates a run on its test fold; the report embeds the run's config.
pub fn evaluate_run(dir: &Path, data_override: Option<&Path>) -> Result<EvaluatedRun> {
    let (manifest, model) = load_run(dir)?;
    let fold = run_fold(&manifest, data_override)?;
    let mut report = evaluate_model(&model, &fold, manifest.config.fold, &manifest.config.eval)?;
    report.config = Some(serde_json::to_value(&manifest.config)?);
    Ok(EvaluatedRun {
        report,
        manifest,
        model,
        fold,
    })
}
