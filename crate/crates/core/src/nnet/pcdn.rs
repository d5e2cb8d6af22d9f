//! Partially constrained dense network: monotone non-decreasing in the first
//! input (τ), unconstrained in the remaining ones.
//!
//! Each hidden layer is split into *selected* neurons (the first
//! `⌊fraction · width⌋`) and *unselected* ones.
//!
//! * layer 1: τ feeds only the selected neurons through non-negative weights;
//!   every covariate feeds every neuron with free weights;
//! * deeper layers: selected ← selected (non-negative), unselected ← unselected
//!   (free); no cross connections;
//! * output: selected → non-negative, unselected → free.
//!
//! With ReLU activations every selected neuron is non-decreasing in τ and every
//! unselected neuron ignores τ, so the output is non-decreasing in τ for any
//! parameter values.

use rand::Rng;

use super::{Activation, DenseLayer, Network, OutputTransform, WeightConstraint};
use crate::error::{Error, Result};

/// Number of selected neurons in a hidden layer of `width`.
pub fn selected_count(width: usize, monotone_fraction: f64) -> usize {
    (width as f64 * monotone_fraction).floor() as usize
}

pub fn build_pcdn<R: Rng + ?Sized>(
    covariate_dim: usize,
    hidden: &[usize],
    monotone_fraction: f64,
    rng: &mut R,
) -> Result<Network> {
    if !(monotone_fraction > 0.0 && monotone_fraction < 1.0) {
        return Err(Error::config(
            "monotone_fraction",
            format!("must lie in (0, 1), got {monotone_fraction}"),
        ));
    }
    if hidden.is_empty() {
        return Err(Error::config("hidden", "PCDN needs at least one hidden layer"));
    }
    let selected: Vec<usize> = hidden
        .iter()
        .map(|&h| selected_count(h, monotone_fraction))
        .collect();
    if let Some(pos) = selected.iter().position(|&s| s == 0) {
        return Err(Error::config(
            "monotone_fraction",
            format!("hidden layer {pos} of width {} gets no selected neurons", hidden[pos]),
        ));
    }

    let mut layers = Vec::with_capacity(hidden.len() + 1);

    let (in0, out0, sel0) = (covariate_dim + 1, hidden[0], selected[0]);
    let mut mask = vec![true; in0 * out0];
    let mut nonneg = vec![false; in0 * out0];
    for j in 0..out0 {
        mask[j] = j < sel0;
        nonneg[j] = j < sel0;
    }
    layers.push(
        DenseLayer::new(in0, out0, Activation::Relu)?
            .with_constraint(WeightConstraint::PerEntry(nonneg))?
            .with_mask(mask)?,
    );

    for l in 1..hidden.len() {
        let (inp, out) = (hidden[l - 1], hidden[l]);
        let (sel_in, sel_out) = (selected[l - 1], selected[l]);
        let mut mask = vec![false; inp * out];
        let mut nonneg = vec![false; inp * out];
        for i in 0..inp {
            for j in 0..out {
                let idx = i * out + j;
                mask[idx] = (i < sel_in) == (j < sel_out);
                nonneg[idx] = i < sel_in && j < sel_out;
            }
        }
        layers.push(
            DenseLayer::new(inp, out, Activation::Relu)?
                .with_constraint(WeightConstraint::PerEntry(nonneg))?
                .with_mask(mask)?,
        );
    }

    let last = *hidden.last().unwrap();
    let sel_last = *selected.last().unwrap();
    let nonneg = (0..last).map(|i| i < sel_last).collect();
    layers.push(
        DenseLayer::new(last, 1, Activation::Identity)?
            .with_constraint(WeightConstraint::PerEntry(nonneg))?,
    );

    for l in &mut layers {
        l.init_uniform(rng);
    }
    Network::new(layers, OutputTransform::None)
}
