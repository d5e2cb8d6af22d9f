use serde::{Deserialize, Serialize};

use super::{Gradients, LayerGrad, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer state for one [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    first: Vec<LayerGrad>,
    second: Vec<LayerGrad>,
}

impl Adam {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        let zeros = Gradients::zeros_like(net).layers;
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers.len() {
            return Err(Error::dim("adam gradients", net.layers.len(), grads.layers.len()));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= learning_rate * mh / (vh.sqrt() + epsilon);
            }
        };
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let g = &grads.layers[l];
            if g.weights.len() != layer.weights.len() || g.bias.len() != layer.bias.len() {
                return Err(Error::dim("adam layer gradients", layer.weights.len(), g.weights.len()));
            }
            let (m, v) = (&mut self.first[l], &mut self.second[l]);
            update(&mut layer.weights, &g.weights, &mut m.weights, &mut v.weights);
            update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{Activation, OutputTransform};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(seed: u64) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Network::dense(2, &[4], 1, Activation::Relu, OutputTransform::None, &mut rng).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut n = net(0);
        let before = n.clone();
        let mut opt = Adam::new(&n, AdamConfig::default());
        opt.step(&mut n, &Gradients::zeros_like(&before)).unwrap();
        assert_eq!(n, before);
    }

    #[test]
    fn constant_positive_gradient_descends() {
        let mut n = net(0);
        let mut g = Gradients::zeros_like(&n);
        g.layers[0].weights[0] = 0.7;
        let mut opt = Adam::new(&n, AdamConfig::default());
        let mut prev = n.layers[0].weights[0];
        for _ in 0..20 {
            opt.step(&mut n, &g).unwrap();
            let cur = n.layers[0].weights[0];
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let run = || {
            let mut n = net(11);
            let mut opt = Adam::new(&n, AdamConfig::default());
            for s in 0..50 {
                let mut g = Gradients::zeros_like(&n);
                for (i, w) in g.layers[0].weights.iter_mut().enumerate() {
                    *w = ((s * 31 + i * 17) % 7) as f64 - 3.0;
                }
                opt.step(&mut n, &g).unwrap();
            }
            n
        };
        let (a, b) = (run(), run());
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&la.weights), bits(&lb.weights));
            assert_eq!(bits(&la.bias), bits(&lb.bias));
        }
    }
}
