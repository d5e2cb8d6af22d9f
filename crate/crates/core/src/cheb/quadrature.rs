//! Clenshaw-Curtis quadrature over `[0, τ]` on τ-dependent cosine nodes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::check_tau;
use crate::error::{Error, Result};

/// Endpoint treatment of the DCT-I sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndpointRule {
    /// Standard Clenshaw-Curtis: first/last node terms halved and the top
    /// even coefficient halved. Exact for polynomials of degree `≤ d + 1`.
    #[default]
    Halved,
    /// Plain sums without any halving. Carries a bias of `1/(d(d+1))` on
    /// constant integrands.
    AsPrinted,
}

fn check_even_degree(degree: usize) -> Result<()> {
    if degree < 2 || degree % 2 != 0 {
        return Err(Error::InvalidDegree {
            degree,
            reason: "Clenshaw-Curtis degree must be even and at least 2",
        });
    }
    Ok(())
}

/// Nodes `(τ/2) cos(πk/d) + τ/2` for `k = 0..=d`; `nodes[0] = τ`, `nodes[d] = 0`.
pub fn cc_nodes(degree: usize, tau: f64) -> Result<Vec<f64>> {
    check_even_degree(degree)?;
    check_tau(tau)?;
    let d = degree as f64;
    Ok((0..=degree)
        .map(|k| {
            if k == degree {
                0.0
            } else {
                0.5 * tau * (PI * k as f64 / d).cos() + 0.5 * tau
            }
        })
        .collect())
}

fn node_weight(rule: EndpointRule, k: usize, degree: usize) -> f64 {
    match rule {
        EndpointRule::Halved if k == 0 || k == degree => 0.5,
        _ => 1.0,
    }
}

fn top_weight(rule: EndpointRule, m: usize, half: usize) -> f64 {
    match rule {
        EndpointRule::Halved if m == half => 0.5,
        _ => 1.0,
    }
}

/// `∫_0^τ φ + K0` from `φ` sampled at [`cc_nodes`], via the normalized DCT-I
/// coefficients `c̄_j = (2/d) Σ_k φ_k cos(jπk/d)` and
/// `τ (c̄_0/2 − Σ_{k=1}^{d/2} c̄_{2k}/(4k² − 1)) + K0`.
pub fn clenshaw_curtis_integral(
    phi_values: &[f64],
    tau: f64,
    k0: f64,
    rule: EndpointRule,
) -> Result<f64> {
    if phi_values.is_empty() {
        return Err(Error::InsufficientDegree { needed: 3, got: 0 });
    }
    let degree = phi_values.len() - 1;
    check_even_degree(degree)?;
    check_tau(tau)?;
    let d = degree as f64;
    let half = degree / 2;
    let coeff = |j: usize| -> f64 {
        let s: f64 = phi_values
            .iter()
            .enumerate()
            .map(|(k, v)| node_weight(rule, k, degree) * v * (j as f64 * PI * k as f64 / d).cos())
            .sum();
        2.0 / d * s
    };
    let mut acc = 0.5 * coeff(0);
    for m in 1..=half {
        let mf = m as f64;
        acc -= top_weight(rule, m, half) * coeff(2 * m) / (4.0 * mf * mf - 1.0);
    }
    Ok(tau * acc + k0)
}

/// Collapsed quadrature weights: `P(τ) = τ Σ_k w_k φ(t̄_k(τ)) + K0`.
///
/// Algebraically identical to [`clenshaw_curtis_integral`] but linear in the node
/// values, which makes the adjoint trivial.
#[derive(Debug, Clone, PartialEq)]
pub struct CcWeights {
    degree: usize,
    rule: EndpointRule,
    weights: Vec<f64>,
    cosines: Vec<f64>,
}

impl CcWeights {
    pub fn new(degree: usize, rule: EndpointRule) -> Result<Self> {
        check_even_degree(degree)?;
        let d = degree as f64;
        let half = degree / 2;
        let weights = (0..=degree)
            .map(|k| {
                let mut inner = 0.5;
                for m in 1..=half {
                    let mf = m as f64;
                    inner -= top_weight(rule, m, half) * (2.0 * mf * PI * k as f64 / d).cos()
                        / (4.0 * mf * mf - 1.0);
                }
                2.0 / d * node_weight(rule, k, degree) * inner
            })
            .collect();
        let cosines = (0..=degree).map(|k| (PI * k as f64 / d).cos()).collect();
        Ok(Self {
            degree,
            rule,
            weights,
            cosines,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn rule(&self) -> EndpointRule {
        self.rule
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Node `k` for quantile `τ`, matching [`cc_nodes`].
    #[inline]
    pub fn node(&self, k: usize, tau: f64) -> f64 {
        if k == self.degree {
            0.0
        } else {
            0.5 * tau * self.cosines[k] + 0.5 * tau
        }
    }

    pub fn integrate(&self, phi_values: &[f64], tau: f64, k0: f64) -> Result<f64> {
        if phi_values.len() != self.degree + 1 {
            return Err(Error::dim("CcWeights::integrate", self.degree + 1, phi_values.len()));
        }
        check_tau(tau)?;
        let s: f64 = self.weights.iter().zip(phi_values).map(|(w, v)| w * v).sum();
        Ok(tau * s + k0)
    }

    /// `∫_0^b f` for a callable, using nodes on `[0, b]`.
    pub fn integrate_fn(&self, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let s: f64 = (0..=self.degree)
            .map(|k| self.weights[k] * f(self.node(k, b)))
            .sum();
        b * s
    }
}
