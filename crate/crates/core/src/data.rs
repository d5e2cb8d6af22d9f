//! Datasets: the glasses generator, CSV ingestion, fold plans and standardization.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::Tensor;
use crate::rng::{stream_rng, STREAM_DATA, STREAM_FOLDS};

pub const GLASSES_BRANCH_POINTS: usize = 3000;
pub const GLASSES_TRAIN: usize = 2400;
pub const GLASSES_VAL: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn code(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }

    pub fn from_code(v: f64) -> Option<Self> {
        match v {
            v if v == 0.0 => Some(Split::Train),
            v if v == 1.0 => Some(Split::Val),
            v if v == 2.0 => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub target_name: String,
    /// `n × D`.
    pub features: Tensor,
    pub targets: Vec<f64>,
    /// Fixed split assignment, when the source carries one.
    pub split: Option<Vec<Split>>,
    pub dropped_columns: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// CSV with the feature columns, the target and, if present, a `split` column (0/1/2).
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(&self.target_name);
        if self.split.is_some() {
            header.push("split");
        }
        s.push_str(&header.join(","));
        s.push('\n');
        for r in 0..self.len() {
            for v in self.features.row(r) {
                let _ = write!(s, "{v},");
            }
            let _ = write!(s, "{}", self.targets[r]);
            if let Some(split) = &self.split {
                let _ = write!(s, ",{}", split[r].code());
            }
            s.push('\n');
        }
        s
    }
}

/// How the glasses sample is scaled after generation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlassesNormalization {
    /// Divide both x and y by `max |y|`.
    #[default]
    MaxAbsY,
    /// Divide x by `max |x|` and y by `max |y|`.
    PerColumn,
    None,
}

/// Two interleaved sine branches with one-sided Beta(0.5, 1) noise, split
/// 2400/600/3000 by a seeded shuffle.
pub fn gen_glasses(seed: u64, normalization: GlassesNormalization) -> Dataset {
    let mut rng = stream_rng(seed, STREAM_DATA);
    let n = GLASSES_BRANCH_POINTS;
    let step = 3.0 * PI / n as f64;
    let mut xs = Vec::with_capacity(2 * n);
    let mut ys = Vec::with_capacity(2 * n);
    for (start, sign) in [(0.0, 1.0), (PI, -1.0)] {
        for i in 0..n {
            let x = start + i as f64 * step;
            let u: f64 = rng.random();
            xs.push(x);
            ys.push(5.0 * x.sin() + 0.5 + sign * u * u);
        }
    }
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let (sx, sy) = match normalization {
        GlassesNormalization::MaxAbsY => (max_abs(&ys), max_abs(&ys)),
        GlassesNormalization::PerColumn => (max_abs(&xs), max_abs(&ys)),
        GlassesNormalization::None => (1.0, 1.0),
    };
    xs.iter_mut().for_each(|x| *x /= sx);
    ys.iter_mut().for_each(|y| *y /= sy);

    let mut order: Vec<usize> = (0..2 * n).collect();
    order.shuffle(&mut rng);
    let mut split = vec![Split::Test; 2 * n];
    for (pos, &i) in order.iter().enumerate() {
        split[i] = if pos < GLASSES_TRAIN {
            Split::Train
        } else if pos < GLASSES_TRAIN + GLASSES_VAL {
            Split::Val
        } else {
            Split::Test
        };
    }
    Dataset {
        name: "glasses".into(),
        feature_names: vec!["x".into()],
        target_name: "y".into(),
        features: Tensor::new(2 * n, 1, xs).expect("shape"),
        targets: ys,
        split: Some(split),
        dropped_columns: Vec::new(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvOptions {
    /// Defaults to the last column (ignoring the split column).
    pub target_column: Option<String>,
    /// Column holding 0/1/2 train/val/test codes. `split` is picked up automatically.
    pub split_column: Option<String>,
}

fn population_std(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let var = v.map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn load_csv(path: &Path, options: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() {
        return Err(Error::Data(format!("{}: empty header", path.display())));
    }
    let find = |name: &str| headers.iter().position(|h| h == name);
    let split_idx = match &options.split_column {
        Some(name) => Some(find(name).ok_or_else(|| Error::Data(format!("split column `{name}` not found")))?),
        None => find("split"),
    };
    let target_idx = match &options.target_column {
        Some(name) => find(name).ok_or_else(|| {
            Error::Data(format!("target column `{name}` not found in {}", path.display()))
        })?,
        None => (0..headers.len())
            .rev()
            .find(|&i| Some(i) != split_idx)
            .ok_or_else(|| Error::Data("no target column".into()))?,
    };

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                column: headers.get(record.len()).cloned().unwrap_or_default(),
                reason: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                column: headers[j].clone(),
                reason: format!("not a number: `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: headers[j].clone(),
                    reason: "missing or non-finite value".into(),
                });
            }
            columns[j].push(v);
        }
    }
    let n = columns[0].len();
    if n == 0 {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }

    let split = split_idx
        .map(|si| {
            columns[si]
                .iter()
                .map(|&v| Split::from_code(v).ok_or_else(|| Error::Data(format!("invalid split code {v}"))))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;

    let mut feature_names = Vec::new();
    let mut dropped = Vec::new();
    let mut kept = Vec::new();
    for (j, name) in headers.iter().enumerate() {
        if j == target_idx || Some(j) == split_idx {
            continue;
        }
        let (_, sd) = population_std(columns[j].iter().copied());
        if sd > 0.0 {
            feature_names.push(name.clone());
            kept.push(j);
        } else {
            log::warn!("{}: dropping zero-variance column `{name}`", path.display());
            dropped.push(name.clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::Data(format!("{}: no usable feature columns", path.display())));
    }
    let mut data = Vec::with_capacity(n * kept.len());
    for r in 0..n {
        data.extend(kept.iter().map(|&j| columns[j][r]));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(Dataset {
        name,
        feature_names,
        target_name: headers[target_idx].clone(),
        features: Tensor::new(n, kept.len(), data)?,
        targets: std::mem::take(&mut columns[target_idx]),
        split,
        dropped_columns: dropped,
    })
}

/// Reads the named columns of a CSV, row by row, with no variance filtering.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let idx = names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Data(format!("column `{name}` not found in {}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row = idx
            .iter()
            .map(|&j| {
                let cell = record.get(j).unwrap_or("");
                cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: headers[j].clone(),
                    reason: format!("not a finite number: `{cell}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Fold {
    /// The single fold described by a fixed split assignment.
    pub fn from_split(split: &[Split]) -> Result<Self> {
        let pick = |s: Split| -> Vec<usize> { (0..split.len()).filter(|&i| split[i] == s).collect() };
        let fold = Fold {
            train: pick(Split::Train),
            val: pick(Split::Val),
            test: pick(Split::Test),
        };
        if fold.train.is_empty() || fold.val.is_empty() || fold.test.is_empty() {
            return Err(Error::Data("split column leaves a train/val/test part empty".into()));
        }
        Ok(fold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub test_ratio: f64,
    pub val_ratio: f64,
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    pub fn n_folds(&self) -> usize {
        self.folds.len()
    }
}

/// Fold `i` shuffles `0..n` with its own stream, then takes `⌊n·test_ratio⌋`
/// test rows and `⌊(n − n_test)·val_ratio⌋` validation rows; the rest train.
pub fn make_folds(n: usize, n_folds: usize, test_ratio: f64, val_ratio: f64, seed: u64) -> Result<FoldPlan> {
    if n_folds == 0 {
        return Err(Error::config("n_folds", "must be >= 1"));
    }
    for (field, r) in [("test_ratio", test_ratio), ("val_ratio", val_ratio)] {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::config(field, format!("must lie in (0, 1), got {r}")));
        }
    }
    let n_test = (n as f64 * test_ratio).floor() as usize;
    let n_val = ((n - n_test) as f64 * val_ratio).floor() as usize;
    let n_train = n - n_test - n_val;
    if n_test == 0 || n_val == 0 || n_train == 0 {
        return Err(Error::Data(format!(
            "{n} rows cannot fill train/val/test ({n_train}/{n_val}/{n_test})"
        )));
    }
    let folds = (0..n_folds)
        .map(|i| {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut stream_rng(seed, STREAM_FOLDS + i as u64));
            let test = perm[..n_test].to_vec();
            let val = perm[n_test..n_test + n_val].to_vec();
            let train = perm[n_test + n_val..].to_vec();
            Fold { train, val, test }
        })
        .collect();
    Ok(FoldPlan {
        seed,
        test_ratio,
        val_ratio,
        folds,
    })
}

/// Affine scaling fitted on the training rows of a fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl Standardizer {
    pub fn fit(features: &Tensor, targets: &[f64], rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("cannot standardize on an empty training set".into()));
        }
        let d = features.cols();
        let mut feature_mean = Vec::with_capacity(d);
        let mut feature_std = Vec::with_capacity(d);
        for j in 0..d {
            let (m, s) = population_std(rows.iter().map(|&r| features.get(r, j)));
            feature_mean.push(m);
            feature_std.push(if s > 0.0 { s } else { 1.0 });
        }
        let (target_mean, target_std) = population_std(rows.iter().map(|&r| targets[r]));
        if !(target_std > 0.0) {
            return Err(Error::Data("target has zero variance on the training rows".into()));
        }
        Ok(Self {
            feature_mean,
            feature_std,
            target_mean,
            target_std,
        })
    }

    pub fn transform_features(&self, x: &Tensor) -> Result<Tensor> {
        if x.cols() != self.feature_mean.len() {
            return Err(Error::dim("standardizer features", self.feature_mean.len(), x.cols()));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.feature_mean[j]) / self.feature_std[j];
            }
        }
        Ok(out)
    }

    pub fn transform_target(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_std
    }

    pub fn inverse_target(&self, z: f64) -> f64 {
        z * self.target_std + self.target_mean
    }
}

/// Standardized train/val/test portions of one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldData {
    pub standardizer: Standardizer,
    pub train_x: Tensor,
    pub train_y: Vec<f64>,
    pub val_x: Tensor,
    pub val_y: Vec<f64>,
    pub test_x: Tensor,
    pub test_y: Vec<f64>,
    /// Test targets in original units.
    pub test_y_raw: Vec<f64>,
    /// Test features in original units.
    pub test_x_raw: Tensor,
}

pub fn prepare_fold(dataset: &Dataset, fold: &Fold) -> Result<FoldData> {
    let std = Standardizer::fit(&dataset.features, &dataset.targets, &fold.train)?;
    let part = |idx: &[usize]| -> Result<(Tensor, Vec<f64>)> {
        let x = std.transform_features(&dataset.features.select_rows(idx))?;
        let y = idx.iter().map(|&i| std.transform_target(dataset.targets[i])).collect();
        Ok((x, y))
    };
    let (train_x, train_y) = part(&fold.train)?;
    let (val_x, val_y) = part(&fold.val)?;
    let (test_x, test_y) = part(&fold.test)?;
    Ok(FoldData {
        train_x,
        train_y,
        val_x,
        val_y,
        test_x,
        test_y,
        test_y_raw: fold.test.iter().map(|&i| dataset.targets[i]).collect(),
        test_x_raw: dataset.features.select_rows(&fold.test),
        standardizer: std,
    })
}
