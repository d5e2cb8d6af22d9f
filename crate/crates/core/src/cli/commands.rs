use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{
    evaluate_run, load_run, read_json, sha256_hex, train_run, write_json, EvaluatedRun, CONFIG_FILE, FAN_FILE,
    INVERT_FILE, REPORT_FILE,
};
use super::{
    base_config, parse_family, EvaluateArgs, GenerateArgs, GlobalArgs, InvertArgs, RunConfig, SweepArgs, TrainArgs,
};
use crate::data::{gen_glasses, read_columns, GlassesNormalization, Split};
use crate::error::{Error, Result};
use crate::eval::{crossing_table, grid_980, loglik_table, CellResult, CellStatus, EvalReport};
use crate::models::ModelFamily;
use crate::nnet::Tensor;

pub const GENERATORS: [&str; 1] = ["glasses"];

#[derive(Debug, Serialize, Deserialize)]
struct DataManifest {
    dataset: String,
    seed: u64,
    normalization: GlassesNormalization,
    rows: usize,
    train_rows: usize,
    val_rows: usize,
    test_rows: usize,
    csv: String,
    csv_sha256: String,
}

pub fn generate_data(g: &GlobalArgs, a: &GenerateArgs) -> Result<()> {
    if !GENERATORS.contains(&a.dataset.as_str()) {
        return Err(Error::Usage(format!(
            "unknown dataset generator '{}', known: {}",
            a.dataset,
            GENERATORS.join(", ")
        )));
    }
    let seed = g.seed.unwrap_or(0);
    let normalization = a.normalization.into();
    let dataset = gen_glasses(seed, normalization);
    let out = g.out_dir();
    fs::create_dir_all(&out)?;
    let csv = dataset.to_csv();
    let csv_name = format!("{}.csv", a.dataset);
    fs::write(out.join(&csv_name), &csv)?;
    let count = |s: Split| dataset.split.as_ref().map_or(0, |v| v.iter().filter(|&&x| x == s).count());
    let manifest = DataManifest {
        dataset: a.dataset.clone(),
        seed,
        normalization,
        rows: dataset.len(),
        train_rows: count(Split::Train),
        val_rows: count(Split::Val),
        test_rows: count(Split::Test),
        csv_sha256: sha256_hex(csv.as_bytes()),
        csv: csv_name,
    };
    write_json(&out.join(format!("{}.manifest.json", a.dataset)), &manifest)?;
    println!("{}", out.join(&manifest.csv).display());
    Ok(())
}

pub fn train(g: &GlobalArgs, a: &TrainArgs) -> Result<()> {
    let mut cfg = base_config(g)?;
    if let Some(m) = &a.model {
        cfg.model.family = parse_family(m)?;
    }
    if let Some(f) = a.fold {
        cfg.fold = f;
    }
    a.run.apply(&mut cfg);
    let out = g.out_dir();
    let manifest = train_run(&cfg, &out)?;
    println!(
        "{}: best epoch {} val {} -> {}",
        manifest.family,
        manifest.training.best_epoch,
        manifest.training.best_val_loss,
        out.display()
    );
    Ok(())
}

enum FanGrid {
    Levels(Vec<f64>),
    Roots,
}

fn fan_grid(a: &EvaluateArgs) -> Result<FanGrid> {
    if let Some(t) = &a.taus {
        if t.is_empty() {
            return Err(Error::Usage("--taus needs at least one level".into()));
        }
        return Ok(FanGrid::Levels(t.clone()));
    }
    match a.grid.as_deref() {
        None => Ok(FanGrid::Levels((1..=19).map(|j| j as f64 / 20.0).collect())),
        Some("980") => Ok(FanGrid::Levels(grid_980())),
        Some("roots") => Ok(FanGrid::Roots),
        Some(s) => {
            let n: usize = s
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Usage(format!("--grid expects 980, roots or a positive count, got '{s}'")))?;
            Ok(FanGrid::Levels((1..=n).map(|j| j as f64 / (n + 1) as f64).collect()))
        }
    }
}

/// Wide CSV: raw features, raw target, then one `q_<τ>` column per level in
/// original units.
fn fan_csv(
    feature_names: &[String],
    target_name: &str,
    x_raw: &Tensor,
    y_raw: &[f64],
    taus: &[f64],
    quantiles: &Tensor,
) -> String {
    let mut s = String::new();
    let mut header: Vec<String> = feature_names.to_vec();
    header.push(target_name.to_string());
    header.extend(taus.iter().map(|t| format!("q_{t}")));
    s.push_str(&header.join(","));
    s.push('\n');
    for r in 0..x_raw.rows() {
        for v in x_raw.row(r) {
            let _ = write!(s, "{v},");
        }
        let _ = write!(s, "{}", y_raw[r]);
        for v in quantiles.row(r) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn evaluate(_g: &GlobalArgs, a: &EvaluateArgs) -> Result<()> {
    let grid = fan_grid(a)?;
    let EvaluatedRun {
        report,
        manifest,
        model,
        fold,
    } = evaluate_run(&a.run, a.data.as_deref())?;
    let taus = match grid {
        FanGrid::Levels(t) => t,
        FanGrid::Roots => model
            .grid()
            .map(|g| g.ascending_roots())
            .ok_or_else(|| Error::Usage(format!("--grid roots needs a Chebyshev model, run is {}", model.family())))?,
    };
    let mut q = model.predict_quantiles(&fold.test_x, &taus)?.values;
    let std = &fold.standardizer;
    q.data_mut().iter_mut().for_each(|v| *v = std.inverse_target(*v));
    fs::write(
        a.run.join(FAN_FILE),
        fan_csv(
            &manifest.feature_names,
            &manifest.target_name,
            &fold.test_x_raw,
            &fold.test_y_raw,
            &taus,
            &q,
        ),
    )?;
    write_json(&a.run.join(REPORT_FILE), &report)?;
    let roots = report.crossing_count_roots.map_or("-".to_string(), |c| c.to_string());
    println!(
        "{} fold {}: crossings grid {} roots {} loglik {}",
        report.model, report.fold, report.crossing_count_grid, roots, report.loglik_sum
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepConfig<'a> {
    models: Vec<ModelFamily>,
    folds: usize,
    /// Cell `(m, k)` runs `base` with family `m`, fold `k` and seed `base.seed + k`.
    base: &'a RunConfig,
}

struct SweepLog {
    file: Mutex<fs::File>,
}

impl SweepLog {
    fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file: Mutex::new(file) })
    }

    fn line(&self, msg: &str) {
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = writeln!(f, "{ts:.3} {msg}") {
            log::warn!("sweep log write failed: {e}");
        }
    }
}

fn cell_config(base: &RunConfig, family: ModelFamily, fold: usize) -> RunConfig {
    let mut cfg = base.clone();
    cfg.model.family = family;
    cfg.fold = fold;
    cfg.seed = base.seed.wrapping_add(fold as u64);
    cfg
}

fn cached_report(dir: &Path, cfg: &RunConfig) -> Option<EvalReport> {
    let echoed = fs::read_to_string(dir.join(CONFIG_FILE)).ok()?;
    if echoed != cfg.to_json() {
        return None;
    }
    read_json(&dir.join(REPORT_FILE)).ok()
}

fn run_cell(dir: &Path, cfg: &RunConfig) -> Result<EvalReport> {
    train_run(cfg, dir)?;
    let report = evaluate_run(dir, None)?.report;
    write_json(&dir.join(REPORT_FILE), &report)?;
    Ok(report)
}

fn cells_csv(cells: &[CellResult]) -> String {
    let opt = |v: Option<String>| v.unwrap_or_default();
    let mut s = String::from("model,fold,status,crossing_count_grid,crossing_count_roots,loglik_sum,error\n");
    for c in cells {
        let status = match c.status {
            CellStatus::Ok => "ok",
            CellStatus::Failed => "failed",
        };
        let err = c.error.as_deref().unwrap_or("").replace(['"', '\n', ','], " ");
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            c.model,
            c.fold,
            status,
            opt(c.crossing_count_grid.map(|v| v.to_string())),
            opt(c.crossing_count_roots.map(|v| v.to_string())),
            opt(c.loglik_sum.map(|v| v.to_string())),
            err
        );
    }
    s
}

pub fn sweep(g: &GlobalArgs, a: &SweepArgs) -> Result<()> {
    let mut base = base_config(g)?;
    a.run.apply(&mut base);
    let models = a.models.iter().map(|m| parse_family(m)).collect::<Result<Vec<_>>>()?;
    for &m in &models {
        cell_config(&base, m, 0).validate()?;
    }
    let dataset = base.data.load()?;
    let available = base.data.available_folds(&dataset);
    let folds = a.folds.unwrap_or(available);
    if folds == 0 || folds > available {
        return Err(Error::config("folds", format!("must lie in 1..={available}, got {folds}")));
    }
    drop(dataset);

    let out = g.out_dir();
    let cells_dir = out.join("cells");
    fs::create_dir_all(&cells_dir)?;
    write_json(
        &out.join("sweep_config.json"),
        &SweepConfig {
            models: models.clone(),
            folds,
            base: &base,
        },
    )?;
    let log = SweepLog::open(&out.join("sweep.log"))?;
    log.line(&format!("start models={} folds={folds}", a.models.join(",")));

    let jobs: Vec<(ModelFamily, usize)> = models.iter().flat_map(|&m| (0..folds).map(move |k| (m, k))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    let cells: Vec<CellResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, k)| {
                let cfg = cell_config(&base, m, k);
                let dir: PathBuf = cells_dir.join(format!("{m}-fold{k}"));
                if a.resume {
                    if let Some(r) = cached_report(&dir, &cfg) {
                        log.line(&format!("{m} fold {k}: reused"));
                        return CellResult::from_report(&r);
                    }
                }
                log.line(&format!("{m} fold {k}: start"));
                match run_cell(&dir, &cfg) {
                    Ok(r) => {
                        log.line(&format!("{m} fold {k}: ok"));
                        CellResult::from_report(&r)
                    }
                    Err(e) => {
                        log.line(&format!("{m} fold {k}: failed: {e}"));
                        log::warn!("{m} fold {k} failed: {e}");
                        CellResult::failed(m, k, e.to_string())
                    }
                }
            })
            .collect()
    });

    fs::write(out.join("cells.csv"), cells_csv(&cells))?;
    fs::write(out.join("table_crossings.csv"), crossing_table(&cells))?;
    fs::write(out.join("table_loglik.csv"), loglik_table(&cells))?;
    let failed = cells.iter().filter(|c| c.status == CellStatus::Failed).count();
    log.line(&format!("done cells={} failed={failed}", cells.len()));
    println!("{} cells, {failed} failed -> {}", cells.len(), out.display());
    Ok(())
}

pub fn invert(_g: &GlobalArgs, a: &InvertArgs) -> Result<()> {
    if !(a.tol > 0.0) {
        return Err(Error::config("tol", "must be positive"));
    }
    let (manifest, model) = load_run(&a.run)?;
    if !model.family().is_chebyshev() {
        return Err(Error::Usage(format!("invert needs an ours-q0/ours-mean run, got {}", model.family())));
    }
    let target = a.target.clone().unwrap_or_else(|| manifest.target_name.clone());
    let mut names: Vec<&str> = manifest.feature_names.iter().map(String::as_str).collect();
    names.push(&target);
    let rows = read_columns(&a.input, &names)?;
    let std = &manifest.standardizer;
    let d = manifest.feature_names.len();

    let mut s = String::from("row,tau,residual,iterations,status\n");
    let (mut ok, mut flagged) = (0usize, 0usize);
    for (i, row) in rows.iter().enumerate() {
        let x = std.transform_features(&Tensor::new(1, d, row[..d].to_vec())?)?;
        let z = std.transform_target(row[d]);
        match model.invert(x.row(0), z, a.tol / std.target_std, a.max_iter) {
            Ok(inv) => {
                ok += 1;
                let _ = writeln!(s, "{i},{},{},{},ok", inv.tau, inv.residual * std.target_std, inv.iterations);
            }
            Err(Error::OutOfSupport { .. }) => {
                flagged += 1;
                let _ = writeln!(s, "{i},,,,out-of-support");
            }
            Err(Error::NoConvergence { iterations, residual }) => {
                flagged += 1;
                let _ = writeln!(s, "{i},,{},{iterations},no-convergence", residual * std.target_std);
            }
            Err(e) => return Err(e),
        }
    }
    let out = a.run.join(INVERT_FILE);
    fs::write(&out, s)?;
    println!("{ok} rows inverted, {flagged} flagged -> {}", out.display());
    Ok(())
}
