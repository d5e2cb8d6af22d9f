use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layer::{sigmoid, softplus};
use super::{Activation, DenseLayer, Tensor};
use crate::error::{Error, Result};

/// Lower floor of the positive head.
pub const POSITIVE_FLOOR: f64 = 1e-3;
/// Shift added to the raw output before the softplus.
pub const POSITIVE_SHIFT: f64 = 1e-5;

/// `10⁻³ + softplus(z + 10⁻⁵)`.
#[inline]
pub fn shifted_softplus(z: f64) -> f64 {
    POSITIVE_FLOOR + softplus(z + POSITIVE_SHIFT)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputTransform {
    None,
    /// [`shifted_softplus`] on every output column `j >= skip`.
    ShiftedSoftplus { skip: usize },
}

/// Ordered stack of dense layers with an optional positivity head.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub(crate) layers: Vec<DenseLayer>,
    pub(crate) output_transform: OutputTransform,
}

/// Activations kept by [`Network::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Tensor>,
    pre: Vec<Tensor>,
    raw_output: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients with the same layout as a [`Network`]'s stored parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|x| *x *= factor);
            l.bias.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>, output_transform: OutputTransform) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network", "at least one layer required"));
        }
        for w in layers.windows(2) {
            if w[0].out_dim != w[1].in_dim {
                return Err(Error::dim("network layers", w[0].out_dim, w[1].in_dim));
            }
        }
        Ok(Self {
            layers,
            output_transform,
        })
    }

    /// Fully connected stack: `hidden` layers with `activation`, then an
    /// identity output layer of width `output_dim`.
    pub fn dense<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        activation: Activation,
        output_transform: OutputTransform,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input_dim;
        for &h in hidden {
            layers.push(DenseLayer::new(prev, h, activation)?);
            prev = h;
        }
        layers.push(DenseLayer::new(prev, output_dim, Activation::Identity)?);
        for l in &mut layers {
            l.init_uniform(rng);
        }
        Network::new(layers, output_transform)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn output_transform(&self) -> OutputTransform {
        self.output_transform
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn apply_transform(&self, raw: &Tensor) -> Tensor {
        match self.output_transform {
            OutputTransform::None => raw.clone(),
            OutputTransform::ShiftedSoftplus { skip } => {
                let mut out = raw.clone();
                let cols = out.cols();
                for (idx, v) in out.data_mut().iter_mut().enumerate() {
                    if idx % cols >= skip {
                        *v = shifted_softplus(*v);
                    }
                }
                out
            }
        }
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.cols() != self.input_dim() {
            return Err(Error::dim("network input", self.input_dim(), input.cols()));
        }
        Ok(())
    }

    /// Forward pass keeping the activations needed by [`Network::backward`].
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
        self.check_input(input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let z = layer.affine(&x, &layer.effective_weights());
            let mut a = z.clone();
            let act = layer.activation;
            a.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        let out = self.apply_transform(&x);
        if !out.all_finite() {
            return Err(Error::NonFinite("network output".into()));
        }
        Ok((
            out,
            ForwardCache {
                inputs,
                pre,
                raw_output: x,
            },
        ))
    }

    /// Forward pass without a cache.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            let mut z = layer.affine(&x, &layer.effective_weights());
            let act = layer.activation;
            z.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
            x = z;
        }
        let out = self.apply_transform(&x);
        if !out.all_finite() {
            return Err(Error::NonFinite("network output".into()));
        }
        Ok(out)
    }

    /// Reverse pass: parameter gradients and the gradient on the input.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Tensor) -> Result<(Gradients, Tensor)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::Usage(
                "forward cache was produced by a different network".into(),
            ));
        }
        if upstream.shape() != cache.raw_output.shape() {
            return Err(Error::Usage(format!(
                "upstream gradient shape {:?} does not match the cached output {:?}",
                upstream.shape(),
                cache.raw_output.shape()
            )));
        }
        let mut grad = upstream.clone();
        if let OutputTransform::ShiftedSoftplus { skip } = self.output_transform {
            let cols = grad.cols();
            let raw = cache.raw_output.data();
            for (idx, g) in grad.data_mut().iter_mut().enumerate() {
                if idx % cols >= skip {
                    *g *= sigmoid(raw[idx] + POSITIVE_SHIFT);
                }
            }
        }
        let mut layer_grads = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            let z = cache.pre[l].data();
            grad.data_mut()
                .iter_mut()
                .zip(z)
                .for_each(|(g, zv)| *g *= act.derivative(*zv));
            let (dw, db, dx) = layer.affine_backward(&cache.inputs[l], &layer.effective_weights(), &grad);
            layer_grads.push(LayerGrad {
                weights: dw,
                bias: db,
            });
            grad = dx;
        }
        layer_grads.reverse();
        Ok((Gradients { layers: layer_grads }, grad))
    }
}
