use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Body, QuantileModel};
use crate::error::{Error, Result};
use crate::losses::{gaussian_nll, pinball, TauSample};
use crate::nnet::{Adam, AdamConfig, Network, Tensor};
use crate::rng::{stream_rng, STREAM_TRAIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    /// τ draws per sample and step.
    pub n_tau: usize,
    pub patience: usize,
    pub max_epochs: usize,
    /// Validation pinball is averaged over `j / (validation_taus + 1)`, `j = 1..=validation_taus`.
    pub validation_taus: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: AdamConfig::default(),
            batch_size: 128,
            n_tau: 8,
            patience: 200,
            max_epochs: 2000,
            validation_taus: 19,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && o.learning_rate.is_finite()) {
            return Err(Error::config("optimizer.learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
            return Err(Error::config("optimizer.beta1/beta2", "must lie in [0, 1)"));
        }
        if !(o.epsilon > 0.0) {
            return Err(Error::config("optimizer.epsilon", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        if self.n_tau == 0 {
            return Err(Error::config("n_tau", "must be >= 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs", "must be >= 1"));
        }
        if self.validation_taus == 0 {
            return Err(Error::config("validation_taus", "must be >= 1"));
        }
        Ok(())
    }

    pub fn validation_grid(&self) -> Vec<f64> {
        let m = self.validation_taus;
        (1..=m).map(|j| j as f64 / (m + 1) as f64).collect()
    }
}

/// Training and validation portions, already standardized.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub train_x: &'a Tensor,
    pub train_y: &'a [f64],
    pub val_x: &'a Tensor,
    pub val_y: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean minibatch objective; absent for epoch 0 (the untrained model).
    pub train_loss: Option<f64>,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainingHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for r in &self.epochs {
            let tl = r.train_loss.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{}\n", r.epoch, tl, r.val_loss));
        }
        s
    }
}

impl QuantileModel {
    /// Validation criterion: mean pinball over `grid` (mean NLL for the Normal family).
    pub fn validation_loss(&self, x: &Tensor, y: &[f64], grid: &[f64]) -> Result<f64> {
        if y.is_empty() || y.len() != x.rows() {
            return Err(Error::dim("validation targets", x.rows(), y.len()));
        }
        if let Body::Normal { .. } = self.body {
            let (mu, sigma) = self.normal_params(x)?;
            let (nll, _, _) = gaussian_nll(y, &mu, &sigma)?;
            return Ok(nll / y.len() as f64);
        }
        let pred = self.predict_quantiles(x, grid)?;
        let mut total = 0.0;
        for (r, &yr) in y.iter().enumerate() {
            for (j, &t) in grid.iter().enumerate() {
                total += pinball(yr, pred.values.get(r, j), t);
            }
        }
        Ok(total / (y.len() * grid.len()) as f64)
    }

    /// Minibatch Adam with early stopping on the validation criterion. The best
    /// weights are restored before returning.
    pub fn train(&mut self, data: TrainData<'_>, cfg: &TrainConfig, seed: u64) -> Result<TrainingHistory> {
        cfg.validate()?;
        let n = data.train_x.rows();
        if n == 0 || data.train_y.len() != n {
            return Err(Error::dim("training targets", n, data.train_y.len()));
        }
        let grid = cfg.validation_grid();
        let mut rng = stream_rng(seed, STREAM_TRAIN);
        let mut opts: Vec<Adam> = self.networks().iter().map(|net| Adam::new(net, cfg.optimizer)).collect();

        let initial = self.validation_loss(data.val_x, data.val_y, &grid)?;
        if !initial.is_finite() {
            return Err(Error::Diverged {
                epoch: 0,
                reason: "non-finite validation loss before training".into(),
            });
        }
        let mut history = TrainingHistory {
            epochs: vec![EpochRecord {
                epoch: 0,
                train_loss: None,
                val_loss: initial,
            }],
            best_epoch: 0,
            best_val_loss: initial,
            stopped_early: false,
        };
        let mut best: Vec<Network> = self.networks().into_iter().cloned().collect();
        let mut order: Vec<usize> = (0..n).collect();

        for epoch in 1..=cfg.max_epochs {
            order.shuffle(&mut rng);
            let (mut sum, mut batches) = (0.0, 0usize);
            for idx in order.chunks(cfg.batch_size) {
                let xb = data.train_x.select_rows(idx);
                let yb: Vec<f64> = idx.iter().map(|&i| data.train_y[i]).collect();
                let taus = TauSample::draw(&mut rng, idx.len() * cfg.n_tau);
                let obj = self.objective(&xb, &yb, &taus.values).map_err(|e| match e {
                    Error::NonFinite(what) => Error::Diverged { epoch, reason: what },
                    other => other,
                })?;
                if !obj.loss.is_finite() || obj.grads.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Diverged {
                        epoch,
                        reason: format!("non-finite loss or gradient (loss {})", obj.loss),
                    });
                }
                for ((net, opt), g) in self.networks_mut().into_iter().zip(&mut opts).zip(&obj.grads) {
                    opt.step(net, g)?;
                }
                sum += obj.loss;
                batches += 1;
            }
            let val = self
                .validation_loss(data.val_x, data.val_y, &grid)
                .map_err(|e| match e {
                    Error::NonFinite(what) => Error::Diverged { epoch, reason: what },
                    other => other,
                })?;
            if !val.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    reason: "non-finite validation loss".into(),
                });
            }
            history.epochs.push(EpochRecord {
                epoch,
                train_loss: Some(sum / batches as f64),
                val_loss: val,
            });
            if val < history.best_val_loss {
                history.best_val_loss = val;
                history.best_epoch = epoch;
                best = self.networks().into_iter().cloned().collect();
            } else if epoch - history.best_epoch >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
        for (net, b) in self.networks_mut().into_iter().zip(best) {
            *net = b;
        }
        log::debug!(
            "{}: best epoch {} of {}, val {:.6}",
            self.family(),
            history.best_epoch,
            history.epochs.len() - 1,
            history.best_val_loss
        );
        Ok(history)
    }
}
