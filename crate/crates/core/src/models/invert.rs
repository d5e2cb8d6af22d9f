use serde::{Deserialize, Serialize};

use super::{Body, QuantileModel};
use crate::cheb::{clenshaw, differentiate};
use crate::error::{Error, Result};
use crate::nnet::Tensor;

/// Slopes below this trigger a bisection step.
const FLAT_SLOPE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub tau: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `P(τ) = y` on `[0, 1]` by Newton from `τ = 0.5`, keeping a sign
/// bracket and bisecting whenever a Newton step leaves it or the slope is flat.
/// `iterations` counts the steps taken.
pub fn invert_monotone(
    p: impl Fn(f64) -> f64,
    dp: impl Fn(f64) -> f64,
    y: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Inversion> {
    if !(tol > 0.0) {
        return Err(Error::config("tol", "must be positive"));
    }
    if !y.is_finite() {
        return Err(Error::NonFinite(format!("inversion target {y}")));
    }
    let (lo_v, hi_v) = (p(0.0), p(1.0));
    if y < lo_v - tol || y > hi_v + tol {
        return Err(Error::OutOfSupport { y, lo: lo_v, hi: hi_v });
    }
    if (lo_v - y).abs() <= tol {
        return Ok(Inversion {
            tau: 0.0,
            residual: (lo_v - y).abs(),
            iterations: 0,
        });
    }
    if (hi_v - y).abs() <= tol {
        return Ok(Inversion {
            tau: 1.0,
            residual: (hi_v - y).abs(),
            iterations: 0,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut tau = 0.5;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let r = p(tau) - y;
        residual = r.abs();
        if residual <= tol {
            return Ok(Inversion {
                tau,
                residual,
                iterations: it - 1,
            });
        }
        if r > 0.0 {
            hi = tau;
        } else {
            lo = tau;
        }
        let slope = dp(tau);
        let newton = tau - r / slope;
        tau = if slope.abs() < FLAT_SLOPE || !newton.is_finite() || newton <= lo || newton >= hi {
            0.5 * (lo + hi)
        } else {
            newton
        };
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

impl QuantileModel {
    /// τ with `P(τ; x) = y` for one input row (Ours families only).
    pub fn invert(&self, x_row: &[f64], y: f64, tol: f64, max_iter: usize) -> Result<Inversion> {
        if !matches!(self.body, Body::Cheb { .. }) {
            return Err(Error::Usage(format!("{} has no analytic derivative to invert", self.family())));
        }
        let x = Tensor::new(1, x_row.len(), x_row.to_vec())?;
        let batch = self.cheb_cs(&x)?;
        let big = batch.integrated.row(0);
        let slope = differentiate(big);
        invert_monotone(
            |t| clenshaw(big, t),
            |t| if slope.is_empty() { 0.0 } else { clenshaw(&slope, t) },
            y,
            tol,
            max_iter,
        )
    }
}
