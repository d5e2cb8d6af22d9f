//! The quantile model families behind one predict/train interface.

mod invert;
mod objective;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf_inv;

use crate::cheb::{
    clenshaw, differentiate, integrate_series_with, ChebGrid, ChebSeries, ConstantMode,
    CcWeights, EndpointRule, IntegratedSeries, IntegrationLength, IntegrationMap,
};
use crate::error::{Error, Result};
use crate::nnet::{build_pcdn, Activation, Network, OutputTransform, Tensor};

pub use invert::{invert_monotone, Inversion};
pub use objective::Objective;
pub use train::{EpochRecord, TrainConfig, TrainData, TrainingHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    OursQ0,
    OursMean,
    Nam,
    Iqn,
    IqnP,
    IqnD,
    Pcdn,
    Normal,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 8] = [
        ModelFamily::OursQ0,
        ModelFamily::OursMean,
        ModelFamily::Nam,
        ModelFamily::Iqn,
        ModelFamily::IqnP,
        ModelFamily::IqnD,
        ModelFamily::Pcdn,
        ModelFamily::Normal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::OursQ0 => "ours-q0",
            ModelFamily::OursMean => "ours-mean",
            ModelFamily::Nam => "nam",
            ModelFamily::Iqn => "iqn",
            ModelFamily::IqnP => "iqn-p",
            ModelFamily::IqnD => "iqn-d",
            ModelFamily::Pcdn => "pcdn",
            ModelFamily::Normal => "normal",
        }
    }

    pub fn is_chebyshev(self) -> bool {
        matches!(self, ModelFamily::OursQ0 | ModelFamily::OursMean)
    }

    /// Families whose φ_w / K_w pair shares the hidden budget.
    pub fn has_constant_net(self) -> bool {
        self.is_chebyshev() || self == ModelFamily::Nam
    }

    pub fn penalty(self) -> Penalty {
        match self {
            ModelFamily::IqnP => Penalty::Crossing,
            ModelFamily::IqnD => Penalty::Derivative,
            _ => Penalty::None,
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = ModelFamily::ALL.iter().map(|m| m.name()).collect();
                Error::config("model", format!("unknown model '{s}', expected one of {}", known.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Penalty {
    None,
    Crossing,
    Derivative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub family: ModelFamily,
    /// Number of Chebyshev roots for the Ours families.
    pub degree: usize,
    /// Clenshaw-Curtis degree for NAM (even).
    pub nam_degree: usize,
    pub integration_length: IntegrationLength,
    pub endpoint_rule: EndpointRule,
    pub hidden: Vec<usize>,
    /// Split every hidden width between φ_w and K_w instead of giving both the full width.
    pub split_hidden: bool,
    pub activation: Activation,
    pub penalty_weight: f64,
    pub penalty_step: f64,
    pub monotone_fraction: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::uci(ModelFamily::OursQ0)
    }
}

impl ModelConfig {
    /// One hidden layer of 200 neurons.
    pub fn uci(family: ModelFamily) -> Self {
        Self {
            family,
            degree: 64,
            nam_degree: 64,
            integration_length: IntegrationLength::Extended,
            endpoint_rule: EndpointRule::Halved,
            hidden: vec![200],
            split_hidden: true,
            activation: Activation::Relu,
            penalty_weight: 1.0,
            penalty_step: 1e-3,
            monotone_fraction: 0.5,
        }
    }

    /// Hidden layers 120, 60, 10.
    pub fn glasses(family: ModelFamily) -> Self {
        Self {
            hidden: vec![120, 60, 10],
            split_hidden: false,
            ..Self::uci(family)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("hidden", "hidden widths must be non-empty and positive"));
        }
        if self.family.has_constant_net() && self.split_hidden && self.hidden.contains(&1) {
            return Err(Error::config("hidden", "split hidden layers need width >= 2"));
        }
        if self.family.is_chebyshev() && self.degree == 0 {
            return Err(Error::config("degree", "must be >= 1"));
        }
        if self.family == ModelFamily::Nam && (self.nam_degree < 2 || self.nam_degree % 2 == 1) {
            return Err(Error::config("nam_degree", "must be even and >= 2"));
        }
        if !(self.penalty_weight >= 0.0 && self.penalty_weight.is_finite()) {
            return Err(Error::config("penalty_weight", "must be finite and >= 0"));
        }
        if !(self.penalty_step > 0.0 && self.penalty_step < 1.0) {
            return Err(Error::config("penalty_step", "must lie in (0, 1)"));
        }
        if !(self.monotone_fraction > 0.0 && self.monotone_fraction < 1.0) {
            return Err(Error::config("monotone_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }

    fn pair_widths(&self) -> (Vec<usize>, Vec<usize>) {
        if self.split_hidden {
            let phi = self.hidden.iter().map(|h| h - h / 2).collect();
            let k = self.hidden.iter().map(|h| h / 2).collect();
            (phi, k)
        } else {
            (self.hidden.clone(), self.hidden.clone())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Body {
    Cheb {
        phi: Network,
        k: Network,
        grid: ChebGrid,
        map: IntegrationMap,
    },
    Nam {
        phi: Network,
        k: Network,
        cc: CcWeights,
    },
    /// IQN variants and PCDN: ψ(τ, x).
    Tau { psi: Network },
    /// Output column 0 is μ, column 1 is σ.
    Normal { net: Network },
}

/// Quantiles at `taus` for every input row.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantilePrediction {
    pub taus: Vec<f64>,
    /// `n × q`.
    pub values: Tensor,
    /// `∂q/∂τ`, `n × q`, when the family exposes it.
    pub derivative_values: Option<Tensor>,
}

/// Per-row Chebyshev coefficients of the derivative and of its integral.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebBatch {
    /// `n × d`.
    pub derivative: Tensor,
    /// `n × (d + 1)` (or `n × d` when truncated).
    pub integrated: Tensor,
    /// `K_w(x)` per row.
    pub constants: Vec<f64>,
}

/// DCT and integration of raw derivative outputs at the roots.
pub fn cheb_cs_from_outputs(
    grid: &ChebGrid,
    map: &IntegrationMap,
    root_values: &Tensor,
    constants: &[f64],
) -> Result<ChebBatch> {
    let d = grid.degree();
    if root_values.cols() != d {
        return Err(Error::dim("cheb_cs root values", d, root_values.cols()));
    }
    if map.degree() != d {
        return Err(Error::dim("cheb_cs integration map", d, map.degree()));
    }
    if constants.len() != root_values.rows() {
        return Err(Error::dim("cheb_cs constants", root_values.rows(), constants.len()));
    }
    if !root_values.all_finite() || constants.iter().any(|k| !k.is_finite()) {
        return Err(Error::NonFinite("cheb_cs inputs".into()));
    }
    let n = root_values.rows();
    let len = map.out_len();
    let mut derivative = Tensor::zeros(n, d);
    let mut integrated = Tensor::zeros(n, len);
    for r in 0..n {
        grid.dct_into(root_values.row(r), derivative.row_mut(r));
        map.apply_into(derivative.row(r), constants[r], integrated.row_mut(r));
    }
    Ok(ChebBatch {
        derivative,
        integrated,
        constants: constants.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileModel {
    config: ModelConfig,
    input_dim: usize,
    pub(crate) body: Body,
}

/// Upper bound on rows pushed through a network in one NAM prediction chunk.
const NAM_CHUNK_ROWS: usize = 1 << 16;

impl QuantileModel {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, input_dim: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::config("input_dim", "need at least one covariate"));
        }
        let act = config.activation;
        let (phi_h, k_h) = config.pair_widths();
        let body = match config.family {
            ModelFamily::OursQ0 | ModelFamily::OursMean => {
                let d = config.degree;
                let phi = Network::dense(
                    input_dim,
                    &phi_h,
                    d,
                    act,
                    OutputTransform::ShiftedSoftplus { skip: 0 },
                    rng,
                )?;
                let k = Network::dense(input_dim, &k_h, 1, act, OutputTransform::None, rng)?;
                Self::cheb_body(&config, phi, k)?
            }
            ModelFamily::Nam => {
                let phi = Network::dense(
                    input_dim + 1,
                    &phi_h,
                    1,
                    act,
                    OutputTransform::ShiftedSoftplus { skip: 0 },
                    rng,
                )?;
                let k = Network::dense(input_dim, &k_h, 1, act, OutputTransform::None, rng)?;
                Body::Nam {
                    phi,
                    k,
                    cc: CcWeights::new(config.nam_degree, config.endpoint_rule)?,
                }
            }
            ModelFamily::Iqn | ModelFamily::IqnP | ModelFamily::IqnD => Body::Tau {
                psi: Network::dense(input_dim + 1, &config.hidden, 1, act, OutputTransform::None, rng)?,
            },
            ModelFamily::Pcdn => Body::Tau {
                psi: build_pcdn(input_dim, &config.hidden, config.monotone_fraction, rng)?,
            },
            ModelFamily::Normal => Body::Normal {
                net: Network::dense(
                    input_dim,
                    &config.hidden,
                    2,
                    act,
                    OutputTransform::ShiftedSoftplus { skip: 1 },
                    rng,
                )?,
            },
        };
        Ok(Self {
            config,
            input_dim,
            body,
        })
    }

    fn cheb_body(config: &ModelConfig, phi: Network, k: Network) -> Result<Body> {
        let mode = match config.family {
            ModelFamily::OursMean => ConstantMode::Mean,
            _ => ConstantMode::Q0,
        };
        Ok(Body::Cheb {
            phi,
            k,
            grid: ChebGrid::new(config.degree)?,
            map: IntegrationMap::new(config.degree, mode, config.integration_length)?,
        })
    }

    /// Rebuilds a model from checkpointed networks, in [`QuantileModel::networks`] order.
    pub fn from_networks(config: ModelConfig, input_dim: usize, mut nets: Vec<Network>) -> Result<Self> {
        config.validate()?;
        let expect_nets = if config.family.has_constant_net() { 2 } else { 1 };
        if nets.len() != expect_nets {
            return Err(Error::Checkpoint(format!(
                "{} expects {expect_nets} networks, checkpoint holds {}",
                config.family,
                nets.len()
            )));
        }
        let check = |net: &Network, inp: usize, out: usize, what: &str| -> Result<()> {
            if net.input_dim() != inp || net.output_dim() != out {
                return Err(Error::Checkpoint(format!(
                    "{what} network is {}→{}, expected {inp}→{out}",
                    net.input_dim(),
                    net.output_dim()
                )));
            }
            Ok(())
        };
        let body = match config.family {
            ModelFamily::OursQ0 | ModelFamily::OursMean => {
                let k = nets.pop().unwrap();
                let phi = nets.pop().unwrap();
                check(&phi, input_dim, config.degree, "φ")?;
                check(&k, input_dim, 1, "K")?;
                Self::cheb_body(&config, phi, k)?
            }
            ModelFamily::Nam => {
                let k = nets.pop().unwrap();
                let phi = nets.pop().unwrap();
                check(&phi, input_dim + 1, 1, "φ")?;
                check(&k, input_dim, 1, "K")?;
                Body::Nam {
                    phi,
                    k,
                    cc: CcWeights::new(config.nam_degree, config.endpoint_rule)?,
                }
            }
            ModelFamily::Iqn | ModelFamily::IqnP | ModelFamily::IqnD | ModelFamily::Pcdn => {
                let psi = nets.pop().unwrap();
                check(&psi, input_dim + 1, 1, "ψ")?;
                Body::Tau { psi }
            }
            ModelFamily::Normal => {
                let net = nets.pop().unwrap();
                check(&net, input_dim, 2, "normal")?;
                Body::Normal { net }
            }
        };
        Ok(Self {
            config,
            input_dim,
            body,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn family(&self) -> ModelFamily {
        self.config.family
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// All trainable networks, in checkpoint order (φ_w before K_w).
    pub fn networks(&self) -> Vec<&Network> {
        match &self.body {
            Body::Cheb { phi, k, .. } | Body::Nam { phi, k, .. } => vec![phi, k],
            Body::Tau { psi } => vec![psi],
            Body::Normal { net } => vec![net],
        }
    }

    pub fn networks_mut(&mut self) -> Vec<&mut Network> {
        match &mut self.body {
            Body::Cheb { phi, k, .. } | Body::Nam { phi, k, .. } => vec![phi, k],
            Body::Tau { psi } => vec![psi],
            Body::Normal { net } => vec![net],
        }
    }

    pub fn param_count(&self) -> usize {
        self.networks().iter().map(|n| n.param_count()).sum()
    }

    /// Root grid of the Ours families.
    pub fn grid(&self) -> Option<&ChebGrid> {
        match &self.body {
            Body::Cheb { grid, .. } => Some(grid),
            _ => None,
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(Error::dim("model input", self.input_dim, x.cols()));
        }
        Ok(())
    }

    /// Chebyshev coefficients for every row of `x` (Ours families only).
    pub fn cheb_cs(&self, x: &Tensor) -> Result<ChebBatch> {
        self.check_input(x)?;
        let Body::Cheb { phi, k, grid, map } = &self.body else {
            return Err(Error::Usage(format!("{} has no Chebyshev representation", self.family())));
        };
        let o = phi.predict(x)?;
        let kv = k.predict(x)?;
        cheb_cs_from_outputs(grid, map, &o, kv.data())
    }

    /// Per-row integrated series with their diagnostics (Ours families only).
    pub fn integrated_series(&self, x: &Tensor) -> Result<Vec<IntegratedSeries>> {
        let batch = self.cheb_cs(x)?;
        let Body::Cheb { map, .. } = &self.body else { unreachable!() };
        (0..x.rows())
            .map(|r| {
                let c = ChebSeries::new(batch.derivative.row(r).to_vec())?;
                integrate_series_with(&c, batch.constants[r], map.mode(), self.config.integration_length)
            })
            .collect()
    }

    pub fn predict_quantiles(&self, x: &Tensor, taus: &[f64]) -> Result<QuantilePrediction> {
        self.check_input(x)?;
        for &t in taus {
            crate::cheb::check_tau(t)?;
        }
        let (n, q) = (x.rows(), taus.len());
        let (values, derivative_values) = match &self.body {
            Body::Cheb { .. } => {
                let batch = self.cheb_cs(x)?;
                let mut values = Tensor::zeros(n, q);
                let mut deriv = Tensor::zeros(n, q);
                for r in 0..n {
                    let big = batch.integrated.row(r);
                    let slope = differentiate(big);
                    let vr = values.row_mut(r);
                    for (j, &t) in taus.iter().enumerate() {
                        vr[j] = clenshaw(big, t);
                    }
                    let drow = deriv.row_mut(r);
                    for (j, &t) in taus.iter().enumerate() {
                        drow[j] = if slope.is_empty() { 0.0 } else { clenshaw(&slope, t) };
                    }
                }
                (values, Some(deriv))
            }
            Body::Nam { phi, k, cc } => {
                let kv = k.predict(x)?;
                let nodes = cc.degree() + 1;
                let per_row = (q * nodes).max(1);
                let chunk = (NAM_CHUNK_ROWS / per_row).max(1);
                let mut values = Tensor::zeros(n, q);
                let mut deriv = Tensor::zeros(n, q);
                for start in (0..n).step_by(chunk) {
                    let end = (start + chunk).min(n);
                    let mut inputs = Vec::with_capacity((end - start) * (q * nodes + q) * (self.input_dim + 1));
                    for r in start..end {
                        let xr = x.row(r);
                        for &t in taus {
                            for kk in 0..nodes {
                                inputs.push(cc.node(kk, t));
                                inputs.extend_from_slice(xr);
                            }
                        }
                        for &t in taus {
                            inputs.push(t);
                            inputs.extend_from_slice(xr);
                        }
                    }
                    let rows = inputs.len() / (self.input_dim + 1);
                    let out = phi.predict(&Tensor::new(rows, self.input_dim + 1, inputs)?)?;
                    let out = out.data();
                    let stride = q * nodes + q;
                    for r in start..end {
                        let base = (r - start) * stride;
                        for (j, &t) in taus.iter().enumerate() {
                            let vals = &out[base + j * nodes..base + (j + 1) * nodes];
                            values.row_mut(r)[j] = cc.integrate(vals, t, kv.get(r, 0))?;
                            deriv.row_mut(r)[j] = out[base + q * nodes + j];
                        }
                    }
                }
                (values, Some(deriv))
            }
            Body::Tau { psi } => {
                let mut inputs = Vec::with_capacity(n * q * (self.input_dim + 1));
                for r in 0..n {
                    for &t in taus {
                        inputs.push(t);
                        inputs.extend_from_slice(x.row(r));
                    }
                }
                let out = psi.predict(&Tensor::new(n * q, self.input_dim + 1, inputs)?)?;
                (Tensor::new(n, q, out.into_data())?, None)
            }
            Body::Normal { net } => {
                let mut z = Vec::with_capacity(q);
                for &t in taus {
                    if t <= 0.0 || t >= 1.0 {
                        return Err(Error::InfiniteQuantile { tau: t });
                    }
                    z.push(std::f64::consts::SQRT_2 * erf_inv(2.0 * t - 1.0));
                }
                let out = net.predict(x)?;
                let mut values = Tensor::zeros(n, q);
                let mut deriv = Tensor::zeros(n, q);
                let root_2pi = (2.0 * std::f64::consts::PI).sqrt();
                for r in 0..n {
                    let (mu, sigma) = (out.get(r, 0), out.get(r, 1));
                    for (j, &zj) in z.iter().enumerate() {
                        values.row_mut(r)[j] = mu + sigma * zj;
                        deriv.row_mut(r)[j] = sigma * root_2pi * (0.5 * zj * zj).exp();
                    }
                }
                (values, Some(deriv))
            }
        };
        if !values.all_finite() {
            return Err(Error::NonFinite(format!("{} quantile predictions", self.family())));
        }
        Ok(QuantilePrediction {
            taus: taus.to_vec(),
            values,
            derivative_values,
        })
    }

    /// `(μ, σ)` per row for the Normal family.
    pub fn normal_params(&self, x: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(x)?;
        let Body::Normal { net } = &self.body else {
            return Err(Error::Usage(format!("{} is not the normal family", self.family())));
        };
        let out = net.predict(x)?;
        Ok(((0..x.rows()).map(|r| out.get(r, 0)).collect(), (0..x.rows()).map(|r| out.get(r, 1)).collect()))
    }
}
