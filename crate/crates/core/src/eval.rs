//! Crossing counts, discretized log-likelihood and per-fold reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cheb::{clenshaw, decay_diagnostic_normalized, monotonicity_audit, ChebSeries};
use crate::data::FoldData;
use crate::error::{Error, Result};
use crate::losses::pinball;
use crate::models::{ModelFamily, QuantileModel};
use crate::nnet::Tensor;

/// Adjacent strict decreases beyond `tolerance`, summed over rows.
pub fn count_crossings(values: &Tensor, taus: &[f64], tolerance: f64) -> Result<u64> {
    if values.cols() != taus.len() {
        return Err(Error::dim("count_crossings", taus.len(), values.cols()));
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("count_crossings needs strictly ascending taus".into()));
    }
    let mut total = 0;
    for r in 0..values.rows() {
        total += values.row(r).windows(2).filter(|w| w[1] < w[0] - tolerance).count() as u64;
    }
    Ok(total)
}

/// `0.010, 0.011, …, 0.990`. Both endpoints at step 0.001 make 981 levels,
/// one more than the grid's customary name suggests.
pub fn grid_980() -> Vec<f64> {
    (10..=990).map(|i| i as f64 / 1000.0).collect()
}

/// `j / 1001` for `j = 1..=1000`.
pub fn loglik_taus() -> Vec<f64> {
    (1..=1000).map(|j| j as f64 / 1001.0).collect()
}

/// Sum over rows of `log max(p̂, floor)`, where `p̂` is the share of the row's
/// predicted quantiles falling in the target's bin divided by the bin width.
/// Bins split `[min, max]` of all targets and predictions into `n_bins` equal parts.
pub fn discretized_loglik(predictions: &Tensor, targets: &[f64], n_bins: usize, floor: f64) -> Result<f64> {
    if predictions.rows() != targets.len() {
        return Err(Error::dim("discretized_loglik", predictions.rows(), targets.len()));
    }
    if n_bins == 0 || predictions.cols() == 0 {
        return Err(Error::Usage("discretized_loglik needs bins and predictions".into()));
    }
    let (lo, hi) = targets
        .iter()
        .chain(predictions.data())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Data(format!("degenerate response range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / n_bins as f64;
    let bin = |v: f64| (((v - lo) / width).floor() as usize).min(n_bins - 1);
    let q = predictions.cols() as f64;
    let mut total = 0.0;
    for (r, &y) in targets.iter().enumerate() {
        let b = bin(y);
        let count = predictions.row(r).iter().filter(|&&v| bin(v) == b).count();
        let density = count as f64 / (q * width);
        total += density.max(floor).ln();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub crossing_tolerance: f64,
    pub n_bins: usize,
    pub density_floor: f64,
    pub audit_points: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            crossing_tolerance: 0.0,
            n_bins: 100,
            density_floor: 1e-12,
            audit_points: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySummary {
    /// Percentiles of `|c_{d−1}| / max|c|` over the test rows.
    pub last_p50: f64,
    pub last_p90: f64,
    pub last_max: f64,
    /// Same for `|c_{d−2}| / max|c|`.
    pub second_p50: f64,
    pub second_p90: f64,
    pub second_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub points_per_row: usize,
    pub rows_with_decrease: usize,
    pub total_decreases: usize,
    pub min_derivative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelFamily,
    pub fold: usize,
    pub n_test: usize,
    pub crossing_tolerance: f64,
    pub crossing_count_grid: u64,
    /// Ours families only: crossings at the sorted Chebyshev roots.
    pub crossing_count_roots: Option<u64>,
    /// Ours-q0 only: `max |P(0; x) − K_w(x)| / max(1, |K_w(x)|)` over the test rows.
    pub q0_anchor_error: Option<f64>,
    pub loglik_sum: f64,
    pub loglik_taus: String,
    pub n_bins: usize,
    pub density_floor: f64,
    pub pinball_taus: Vec<f64>,
    /// Mean pinball loss at each decile, original units.
    pub mean_pinball: Vec<f64>,
    pub decay: Option<DecaySummary>,
    pub monotonicity: Option<AuditSummary>,
    /// Resolved run configuration, filled in by the caller.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Crossings of a model at its ascending Chebyshev roots.
pub fn root_crossings(model: &QuantileModel, x: &Tensor, tolerance: f64) -> Result<Option<u64>> {
    let Some(grid) = model.grid() else {
        return Ok(None);
    };
    let roots = grid.ascending_roots();
    let pred = model.predict_quantiles(x, &roots)?;
    count_crossings(&pred.values, &roots, tolerance).map(Some)
}

pub fn evaluate_model(model: &QuantileModel, fold: &FoldData, fold_id: usize, cfg: &EvalConfig) -> Result<EvalReport> {
    let x = &fold.test_x;
    let n = x.rows();
    if n == 0 {
        return Err(Error::Data("empty test set".into()));
    }
    let std = &fold.standardizer;
    let to_raw = |t: &Tensor| -> Tensor {
        let mut out = t.clone();
        out.data_mut().iter_mut().for_each(|v| *v = std.inverse_target(*v));
        out
    };

    let grid = grid_980();
    let crossing_count_grid = count_crossings(&model.predict_quantiles(x, &grid)?.values, &grid, cfg.crossing_tolerance)?;
    let crossing_count_roots = root_crossings(model, x, cfg.crossing_tolerance)?;

    let lt = loglik_taus();
    let lpred = to_raw(&model.predict_quantiles(x, &lt)?.values);
    let loglik_sum = discretized_loglik(&lpred, &fold.test_y_raw, cfg.n_bins, cfg.density_floor)?;

    let pinball_taus: Vec<f64> = (1..=9).map(|j| j as f64 / 10.0).collect();
    let ppred = to_raw(&model.predict_quantiles(x, &pinball_taus)?.values);
    let mean_pinball = pinball_taus
        .iter()
        .enumerate()
        .map(|(j, &t)| (0..n).map(|r| pinball(fold.test_y_raw[r], ppred.get(r, j), t)).sum::<f64>() / n as f64)
        .collect();

    let (mut decay, mut monotonicity, mut q0_anchor_error) = (None, None, None);
    if model.family().is_chebyshev() {
        let series = model.integrated_series(x)?;
        let batch = model.cheb_cs(x)?;
        let (mut last, mut second) = (Vec::with_capacity(n), Vec::with_capacity(n));
        let mut audit = AuditSummary {
            points_per_row: 0,
            rows_with_decrease: 0,
            total_decreases: 0,
            min_derivative: f64::INFINITY,
        };
        for (r, s) in series.iter().enumerate() {
            let c = ChebSeries::new(batch.derivative.row(r).to_vec())?;
            if c.len() >= 2 {
                let (a, b) = decay_diagnostic_normalized(&c)?;
                last.push(a);
                second.push(b);
            }
            let a = monotonicity_audit(s, cfg.audit_points)?;
            audit.points_per_row = a.n_points;
            audit.total_decreases += a.decreases;
            audit.rows_with_decrease += (a.decreases > 0) as usize;
            audit.min_derivative = audit.min_derivative.min(a.min_derivative);
        }
        if !last.is_empty() {
            last.sort_by(f64::total_cmp);
            second.sort_by(f64::total_cmp);
            decay = Some(DecaySummary {
                last_p50: percentile(&last, 50.0),
                last_p90: percentile(&last, 90.0),
                last_max: percentile(&last, 100.0),
                second_p50: percentile(&second, 50.0),
                second_p90: percentile(&second, 90.0),
                second_max: percentile(&second, 100.0),
            });
        }
        monotonicity = Some(audit);
        if model.family() == ModelFamily::OursQ0 {
            let worst = (0..n)
                .map(|r| {
                    let k = batch.constants[r];
                    (clenshaw(batch.integrated.row(r), 0.0) - k).abs() / k.abs().max(1.0)
                })
                .fold(0.0f64, f64::max);
            q0_anchor_error = Some(worst);
        }
    }

    Ok(EvalReport {
        model: model.family(),
        fold: fold_id,
        n_test: n,
        crossing_tolerance: cfg.crossing_tolerance,
        crossing_count_grid,
        crossing_count_roots,
        q0_anchor_error,
        loglik_sum,
        loglik_taus: "j/1001, j=1..1000".into(),
        n_bins: cfg.n_bins,
        density_floor: cfg.density_floor,
        pinball_taus,
        mean_pinball,
        decay,
        monotonicity,
        config: None,
    })
}

/// Outcome of one (model, fold) cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model: ModelFamily,
    pub fold: usize,
    pub status: CellStatus,
    pub crossing_count_grid: Option<u64>,
    pub crossing_count_roots: Option<u64>,
    pub loglik_sum: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Ok,
    Failed,
}

impl CellResult {
    pub fn from_report(r: &EvalReport) -> Self {
        Self {
            model: r.model,
            fold: r.fold,
            status: CellStatus::Ok,
            crossing_count_grid: Some(r.crossing_count_grid),
            crossing_count_roots: r.crossing_count_roots,
            loglik_sum: Some(r.loglik_sum),
            error: None,
        }
    }

    pub fn failed(model: ModelFamily, fold: usize, error: String) -> Self {
        Self {
            model,
            fold,
            status: CellStatus::Failed,
            crossing_count_grid: None,
            crossing_count_roots: None,
            loglik_sum: None,
            error: Some(error),
        }
    }
}

fn group_ok(cells: &[CellResult]) -> BTreeMap<&'static str, Vec<&CellResult>> {
    let mut groups: BTreeMap<&'static str, Vec<&CellResult>> = BTreeMap::new();
    for c in cells {
        let entry = groups.entry(c.model.name()).or_default();
        if c.status == CellStatus::Ok {
            entry.push(c);
        }
    }
    groups
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// `model,n_folds,min_crossings,max_crossings,min_root_crossings,max_root_crossings`
/// over completed cells.
pub fn crossing_table(cells: &[CellResult]) -> String {
    let mut s = String::from("model,n_folds,min_crossings,max_crossings,min_root_crossings,max_root_crossings\n");
    for (model, group) in group_ok(cells) {
        let grid: Vec<u64> = group.iter().filter_map(|c| c.crossing_count_grid).collect();
        let roots: Vec<u64> = group.iter().filter_map(|c| c.crossing_count_roots).collect();
        s.push_str(&format!(
            "{model},{},{},{},{},{}\n",
            group.len(),
            opt(grid.iter().min()),
            opt(grid.iter().max()),
            opt(roots.iter().min()),
            opt(roots.iter().max()),
        ));
    }
    s
}

/// Mean and sample standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `model,n_folds,mean_loglik,std_loglik` over completed cells.
pub fn loglik_table(cells: &[CellResult]) -> String {
    let mut s = String::from("model,n_folds,mean_loglik,std_loglik\n");
    for (model, group) in group_ok(cells) {
        let ll: Vec<f64> = group.iter().filter_map(|c| c.loglik_sum).collect();
        if ll.is_empty() {
            s.push_str(&format!("{model},0,,\n"));
            continue;
        }
        let (m, sd) = mean_std(&ll);
        s.push_str(&format!("{model},{},{m},{sd}\n", ll.len()));
    }
    s
}
