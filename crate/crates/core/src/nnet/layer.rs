use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Softplus,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Softplus => softplus(z),
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation. ReLU uses 0 at exactly 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => sigmoid(z),
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Sign constraint on stored weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightConstraint {
    Free,
    /// Every effective weight is `max(0, stored)`.
    NonNegative,
    /// Row-major `in × out` flags; `true` entries are `max(0, stored)`.
    PerEntry(Vec<bool>),
}

impl WeightConstraint {
    #[inline]
    fn is_nonneg(&self, idx: usize) -> bool {
        match self {
            WeightConstraint::Free => false,
            WeightConstraint::NonNegative => true,
            WeightConstraint::PerEntry(flags) => flags[idx],
        }
    }
}

/// Dense affine map followed by an element-wise activation.
///
/// Weights are stored row-major with shape `(in_dim, out_dim)`, so that a batch
/// `x` of shape `(n, in_dim)` maps to `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub(crate) in_dim: usize,
    pub(crate) out_dim: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
    pub(crate) activation: Activation,
    pub(crate) constraint: WeightConstraint,
    /// `false` entries are absent connections.
    pub(crate) mask: Option<Vec<bool>>,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::config("layer", "dimensions must be positive"));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
            constraint: WeightConstraint::Free,
            mask: None,
        })
    }

    pub fn with_constraint(mut self, constraint: WeightConstraint) -> Result<Self> {
        if let WeightConstraint::PerEntry(flags) = &constraint {
            if flags.len() != self.in_dim * self.out_dim {
                return Err(Error::dim("weight constraint", self.in_dim * self.out_dim, flags.len()));
            }
        }
        self.constraint = constraint;
        Ok(self)
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.in_dim * self.out_dim {
            return Err(Error::dim("connection mask", self.in_dim * self.out_dim, mask.len()));
        }
        for (w, m) in self.weights.iter_mut().zip(&mask) {
            if !m {
                *w = 0.0;
            }
        }
        self.mask = Some(mask);
        Ok(self)
    }

    /// Fan-in scaled uniform initialization (`±√(6/fan_in)`, fan-in counted over
    /// present connections). Constrained entries take the absolute value. Biases
    /// start at zero.
    pub fn init_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let (n_in, n_out) = (self.in_dim, self.out_dim);
        let fan_in: Vec<usize> = (0..n_out)
            .map(|j| (0..n_in).filter(|&i| self.connected(i * n_out + j)).count().max(1))
            .collect();
        for i in 0..n_in {
            for j in 0..n_out {
                let idx = i * n_out + j;
                let bound = (6.0 / fan_in[j] as f64).sqrt();
                let u: f64 = rng.random::<f64>() * 2.0 * bound - bound;
                self.weights[idx] = if !self.connected(idx) {
                    0.0
                } else if self.constraint.is_nonneg(idx) {
                    u.abs()
                } else {
                    u
                };
            }
        }
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn constraint(&self) -> &WeightConstraint {
        &self.constraint
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    #[inline]
    pub fn connected(&self, idx: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[idx])
    }

    #[inline]
    pub fn is_nonneg(&self, idx: usize) -> bool {
        self.constraint.is_nonneg(idx)
    }

    pub fn effective_weights(&self) -> Vec<f64> {
        self.weights
            .iter()
            .enumerate()
            .map(|(idx, &w)| {
                if !self.connected(idx) {
                    0.0
                } else if self.constraint.is_nonneg(idx) {
                    w.max(0.0)
                } else {
                    w
                }
            })
            .collect()
    }

    /// Pre-activation `x W_eff + b`.
    pub(crate) fn affine(&self, x: &Tensor, w_eff: &[f64]) -> Tensor {
        let (n, out) = (x.rows(), self.out_dim);
        let mut z = Tensor::zeros(n, out);
        for r in 0..n {
            let zr = z.row_mut(r);
            zr.copy_from_slice(&self.bias);
            for (i, &xi) in x.row(r).iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let wr = &w_eff[i * out..(i + 1) * out];
                for (zj, wj) in zr.iter_mut().zip(wr) {
                    *zj += xi * wj;
                }
            }
        }
        z
    }

    /// Gradient of the stored parameters given `∂L/∂z`, plus `∂L/∂x`.
    pub(crate) fn affine_backward(
        &self,
        x: &Tensor,
        w_eff: &[f64],
        dz: &Tensor,
    ) -> (Vec<f64>, Vec<f64>, Tensor) {
        let (n, inp, out) = (x.rows(), self.in_dim, self.out_dim);
        let mut dw = vec![0.0; inp * out];
        let mut db = vec![0.0; out];
        let mut dx = Tensor::zeros(n, inp);
        for r in 0..n {
            let dzr = dz.row(r);
            for (b, g) in db.iter_mut().zip(dzr) {
                *b += g;
            }
            let xr = x.row(r);
            let dxr = dx.row_mut(r);
            for i in 0..inp {
                let wr = &w_eff[i * out..(i + 1) * out];
                let dwr = &mut dw[i * out..(i + 1) * out];
                let xi = xr[i];
                let mut acc = 0.0;
                for j in 0..out {
                    dwr[j] += xi * dzr[j];
                    acc += dzr[j] * wr[j];
                }
                dxr[i] = acc;
            }
        }
        for (idx, g) in dw.iter_mut().enumerate() {
            if !self.connected(idx) || (self.constraint.is_nonneg(idx) && self.weights[idx] <= 0.0) {
                *g = 0.0;
            }
        }
        (dw, db, dx)
    }
}
