//! Minibatch objectives and their gradients on every network parameter.

use super::{cheb_cs_from_outputs, Body, Penalty, QuantileModel};
use crate::cheb::{basis_weights_into, clenshaw};
use crate::error::{Error, Result};
use crate::losses::{central_difference_points, crossing_penalty, derivative_penalty, gaussian_nll, mc_quantile_loss};
use crate::nnet::{Gradients, Tensor};

/// Value of a minibatch objective and its gradients, one entry per network in
/// [`QuantileModel::networks`] order.
#[derive(Debug, Clone)]
pub struct Objective {
    pub loss: f64,
    /// Quantile loss (or mean NLL for the Normal family) before any penalty.
    pub data_loss: f64,
    pub penalty: f64,
    pub grads: Vec<Gradients>,
}

/// Rows `[τ, x_r]` for every `(r, τ)` pair, `taus` laid out `[sample][draw]`.
fn tau_inputs(x: &Tensor, taus: &[f64], n_tau: usize) -> Result<Tensor> {
    let d = x.cols();
    let mut data = Vec::with_capacity(taus.len() * (d + 1));
    for (i, &t) in taus.iter().enumerate() {
        data.push(t);
        data.extend_from_slice(x.row(i / n_tau));
    }
    Tensor::new(taus.len(), d + 1, data)
}

impl QuantileModel {
    /// Minibatch objective. `taus` holds `n_tau` draws per row of `x`, laid out
    /// `[sample][draw]`; the Normal family ignores it.
    pub fn objective(&self, x: &Tensor, y: &[f64], taus: &[f64]) -> Result<Objective> {
        self.check_input(x)?;
        let bs = x.rows();
        if bs == 0 {
            return Err(Error::Usage("empty minibatch".into()));
        }
        if y.len() != bs {
            return Err(Error::dim("objective targets", bs, y.len()));
        }
        if let Body::Normal { net } = &self.body {
            let (out, cache) = net.forward(x)?;
            let mu: Vec<f64> = (0..bs).map(|r| out.get(r, 0)).collect();
            let sigma: Vec<f64> = (0..bs).map(|r| out.get(r, 1)).collect();
            let (nll, gmu, gsig) = gaussian_nll(y, &mu, &sigma)?;
            let inv = 1.0 / bs as f64;
            let mut up = Tensor::zeros(bs, 2);
            for r in 0..bs {
                up.row_mut(r).copy_from_slice(&[gmu[r] * inv, gsig[r] * inv]);
            }
            let (g, _) = net.backward(&cache, &up)?;
            return Ok(Objective {
                loss: nll * inv,
                data_loss: nll * inv,
                penalty: 0.0,
                grads: vec![g],
            });
        }
        if taus.is_empty() || taus.len() % bs != 0 {
            return Err(Error::dim("objective taus", bs, taus.len()));
        }
        for &t in taus {
            crate::cheb::check_tau(t)?;
        }
        let n_tau = taus.len() / bs;
        match &self.body {
            Body::Cheb { phi, k, grid, map } => {
                let d = grid.degree();
                let len = map.out_len();
                let (o, phi_cache) = phi.forward(x)?;
                let (kv, k_cache) = k.forward(x)?;
                let batch = cheb_cs_from_outputs(grid, map, &o, kv.data())?;
                let preds: Vec<f64> = taus
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| clenshaw(batch.integrated.row(i / n_tau), t))
                    .collect();
                let (loss, g) = mc_quantile_loss(&preds, y, taus)?;

                let mut g_root = Tensor::zeros(bs, d);
                let mut g_k = Tensor::zeros(bs, 1);
                let mut basis = vec![0.0; len];
                let mut g_big = vec![0.0; len];
                let mut g_c = vec![0.0; d];
                for r in 0..bs {
                    g_big.iter_mut().for_each(|v| *v = 0.0);
                    for j in 0..n_tau {
                        let i = r * n_tau + j;
                        basis_weights_into(taus[i], &mut basis);
                        g_big.iter_mut().zip(&basis).for_each(|(a, b)| *a += g[i] * b);
                    }
                    g_k.row_mut(r)[0] = map.transpose_into(&g_big, &mut g_c);
                    grid.dct_transpose_into(&g_c, g_root.row_mut(r));
                }
                let (g_phi, _) = phi.backward(&phi_cache, &g_root)?;
                let (g_kn, _) = k.backward(&k_cache, &g_k)?;
                Ok(Objective {
                    loss,
                    data_loss: loss,
                    penalty: 0.0,
                    grads: vec![g_phi, g_kn],
                })
            }
            Body::Nam { phi, k, cc } => {
                let nodes = cc.degree() + 1;
                let dim = self.input_dim() + 1;
                let mut data = Vec::with_capacity(taus.len() * nodes * dim);
                for (i, &t) in taus.iter().enumerate() {
                    let xr = x.row(i / n_tau);
                    for kk in 0..nodes {
                        data.push(cc.node(kk, t));
                        data.extend_from_slice(xr);
                    }
                }
                let (out, phi_cache) = phi.forward(&Tensor::new(taus.len() * nodes, dim, data)?)?;
                let (kv, k_cache) = k.forward(x)?;
                let w = cc.weights();
                let preds: Vec<f64> = taus
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| {
                        let vals = &out.data()[i * nodes..(i + 1) * nodes];
                        let s: f64 = w.iter().zip(vals).map(|(a, b)| a * b).sum();
                        t * s + kv.get(i / n_tau, 0)
                    })
                    .collect();
                let (loss, g) = mc_quantile_loss(&preds, y, taus)?;
                let mut g_out = Tensor::zeros(taus.len() * nodes, 1);
                let mut g_k = Tensor::zeros(bs, 1);
                for (i, &t) in taus.iter().enumerate() {
                    let gd = g_out.data_mut();
                    for kk in 0..nodes {
                        gd[i * nodes + kk] = g[i] * t * w[kk];
                    }
                    g_k.row_mut(i / n_tau)[0] += g[i];
                }
                let (g_phi, _) = phi.backward(&phi_cache, &g_out)?;
                let (g_kn, _) = k.backward(&k_cache, &g_k)?;
                Ok(Objective {
                    loss,
                    data_loss: loss,
                    penalty: 0.0,
                    grads: vec![g_phi, g_kn],
                })
            }
            Body::Tau { psi } => {
                let m = taus.len();
                let penalty_kind = self.config().family.penalty();
                let lambda = self.config().penalty_weight;
                let mut eval_taus = taus.to_vec();
                let mut widths = Vec::new();
                if penalty_kind == Penalty::Derivative {
                    let h = self.config().penalty_step;
                    let pts = taus
                        .iter()
                        .map(|&t| central_difference_points(t, h))
                        .collect::<Result<Vec<_>>>()?;
                    eval_taus.extend(pts.iter().map(|p| p.0));
                    eval_taus.extend(pts.iter().map(|p| p.1));
                    widths = pts.iter().map(|p| p.1 - p.0).collect();
                }
                let rows_per_pass = eval_taus.len() / m;
                let mut data = Vec::with_capacity(eval_taus.len() * (self.input_dim() + 1));
                for pass in 0..rows_per_pass {
                    let block = tau_inputs(x, &eval_taus[pass * m..(pass + 1) * m], n_tau)?;
                    data.extend_from_slice(block.data());
                }
                let input = Tensor::new(eval_taus.len(), self.input_dim() + 1, data)?;
                let (out, cache) = psi.forward(&input)?;
                let out = out.data();
                let (loss, mut g) = mc_quantile_loss(&out[..m], y, taus)?;
                let mut upstream = vec![0.0; eval_taus.len()];
                let penalty = match penalty_kind {
                    Penalty::None => 0.0,
                    Penalty::Crossing => {
                        let mut order: Vec<usize> = Vec::with_capacity(m);
                        let mut sorted = Tensor::zeros(bs, n_tau);
                        for r in 0..bs {
                            let mut idx: Vec<usize> = (r * n_tau..(r + 1) * n_tau).collect();
                            idx.sort_by(|&a, &b| taus[a].total_cmp(&taus[b]));
                            for (j, &i) in idx.iter().enumerate() {
                                sorted.row_mut(r)[j] = out[i];
                            }
                            order.extend(idx);
                        }
                        let (p, gp) = crossing_penalty(&sorted)?;
                        for (pos, &i) in order.iter().enumerate() {
                            g[i] += lambda * gp.data()[pos];
                        }
                        p
                    }
                    Penalty::Derivative => {
                        let (p, gl, gu) = derivative_penalty(&out[m..2 * m], &out[2 * m..3 * m], &widths)?;
                        for i in 0..m {
                            upstream[m + i] = lambda * gl[i];
                            upstream[2 * m + i] = lambda * gu[i];
                        }
                        p
                    }
                };
                upstream[..m].copy_from_slice(&g);
                let (g_psi, _) = psi.backward(&cache, &Tensor::new(eval_taus.len(), 1, upstream)?)?;
                Ok(Objective {
                    loss: loss + lambda * penalty,
                    data_loss: loss,
                    penalty,
                    grads: vec![g_psi],
                })
            }
            Body::Normal { .. } => unreachable!(),
        }
    }
}
