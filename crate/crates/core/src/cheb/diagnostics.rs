use serde::{Deserialize, Serialize};

use super::{clenshaw, make_grid, CcWeights, ChebSeries, EndpointRule, IntegratedSeries};
use crate::error::{Error, Result};

/// `(|c_{d−1}|, |c_{d−2}|)`: the last two coefficients in absolute value.
pub fn decay_diagnostic(series: &ChebSeries) -> Result<(f64, f64)> {
    let c = series.coeffs();
    let d = c.len();
    if d < 2 {
        return Err(Error::InsufficientDegree { needed: 2, got: d });
    }
    Ok((c[d - 1].abs(), c[d - 2].abs()))
}

/// [`decay_diagnostic`] divided by `max_k |c_k|`; an all-zero series gives `(0, 0)`.
pub fn decay_diagnostic_normalized(series: &ChebSeries) -> Result<(f64, f64)> {
    let (a, b) = decay_diagnostic(series)?;
    let scale = series.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Ok((0.0, 0.0));
    }
    Ok((a / scale, b / scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityAudit {
    pub n_points: usize,
    /// Adjacent strict decreases of `P` along the sorted grid.
    pub decreases: usize,
    /// Minimum of the derivative series over the same grid.
    pub min_derivative: f64,
    pub argmin_tau: f64,
}

/// Checks `P` on `n_grid` equidistant points of `[0, 1]` merged with the roots of
/// the source degree.
pub fn monotonicity_audit(integrated: &IntegratedSeries, n_grid: usize) -> Result<MonotonicityAudit> {
    if n_grid < 2 {
        return Err(Error::Usage(format!("monotonicity audit needs n_grid >= 2, got {n_grid}")));
    }
    let mut taus: Vec<f64> = (0..n_grid)
        .map(|i| i as f64 / (n_grid - 1) as f64)
        .collect();
    taus.extend_from_slice(make_grid(integrated.source_degree())?.roots());
    taus.sort_by(f64::total_cmp);

    let big = integrated.coeffs();
    let small = integrated.derivative();
    let values: Vec<f64> = taus.iter().map(|&t| clenshaw(big, t)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("monotonicity audit".into()));
    }
    let decreases = values.windows(2).filter(|w| w[1] < w[0]).count();
    let (min_derivative, argmin_tau) = taus
        .iter()
        .map(|&t| (clenshaw(small.coeffs(), t), t))
        .fold((f64::INFINITY, 0.0), |acc, x| if x.0 < acc.0 { x } else { acc });
    Ok(MonotonicityAudit {
        n_points: taus.len(),
        decreases,
        min_derivative,
        argmin_tau,
    })
}

/// Compares `K` against the two candidate "mean" integrals of the represented
/// quantile function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanConstantDiagnostic {
    pub k: f64,
    /// `∫_0^1 τ P(τ) dτ`, the condition the mean constant formula is derived from.
    pub weighted_integral: f64,
    /// `∫_0^1 P(τ) dτ`, the mean of the represented distribution.
    pub plain_integral: f64,
    pub weighted_residual: f64,
    pub plain_residual: f64,
}

pub fn mean_constant_diagnostic(integrated: &IntegratedSeries, k: f64) -> Result<MeanConstantDiagnostic> {
    let coeffs = integrated.coeffs();
    // τP has degree len; an even rule of degree >= len + 2 integrates it exactly.
    let mut degree = coeffs.len() + 2;
    degree += degree % 2;
    let rule = CcWeights::new(degree, EndpointRule::Halved)?;
    let weighted_integral = rule.integrate_fn(1.0, |t| t * clenshaw(coeffs, t));
    let plain_integral = rule.integrate_fn(1.0, |t| clenshaw(coeffs, t));
    Ok(MeanConstantDiagnostic {
        k,
        weighted_integral,
        plain_integral,
        weighted_residual: weighted_integral - k,
        plain_residual: plain_integral - k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb::{integrate_series, ConstantMode};
    use approx::assert_abs_diff_eq;

    #[test]
    fn decay_examples() {
        let s = ChebSeries::new(vec![2.0, 0.0]).unwrap();
        assert_eq!(decay_diagnostic(&s).unwrap(), (0.0, 2.0));
        let s = ChebSeries::new(vec![1.0, 0.5, 0.25, 0.125]).unwrap();
        assert_eq!(decay_diagnostic(&s).unwrap(), (0.125, 0.25));
        assert_eq!(decay_diagnostic_normalized(&s).unwrap(), (0.125, 0.25));
        let s = ChebSeries::new(vec![0.0; 5]).unwrap();
        assert_eq!(decay_diagnostic(&s).unwrap(), (0.0, 0.0));
        assert_eq!(decay_diagnostic_normalized(&s).unwrap(), (0.0, 0.0));
        let s = ChebSeries::new(vec![1.0]).unwrap();
        assert!(matches!(
            decay_diagnostic(&s),
            Err(Error::InsufficientDegree { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn audit_linear_increasing() {
        let p = integrate_series(&ChebSeries::new(vec![2.0, 0.0]).unwrap(), 5.0, ConstantMode::Q0)
            .unwrap();
        let a = monotonicity_audit(&p, 100).unwrap();
        assert_eq!(a.decreases, 0);
        assert_abs_diff_eq!(a.min_derivative, 1.0, epsilon = 1e-12);
        assert_eq!(a.n_points, 102);
    }

    #[test]
    fn audit_parabola_decreases() {
        let p = integrate_series(&ChebSeries::new(vec![0.0, 1.0]).unwrap(), 0.0, ConstantMode::Q0)
            .unwrap();
        let a = monotonicity_audit(&p, 100).unwrap();
        assert!(a.decreases > 0);
        assert!(a.min_derivative < 0.0);
        assert_abs_diff_eq!(a.argmin_tau, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn audit_constant_has_no_strict_decrease() {
        let p = integrate_series(&ChebSeries::new(vec![0.0, 0.0]).unwrap(), 3.0, ConstantMode::Q0)
            .unwrap();
        assert_eq!(monotonicity_audit(&p, 50).unwrap().decreases, 0);
        assert!(monotonicity_audit(&p, 1).is_err());
    }

    #[test]
    fn mean_diagnostic_on_uniform_quantiles() {
        let s = ChebSeries::new(vec![2.0, 0.0]).unwrap();
        let k = 0.25;
        let p = integrate_series(&s, k, ConstantMode::Mean).unwrap();
        let diag = mean_constant_diagnostic(&p, k).unwrap();
        // P(τ) = ½C_0 + ½(2τ − 1) = K + 1/6 + τ − ½.
        let offset = k + 1.0 / 6.0 - 0.5;
        assert_abs_diff_eq!(diag.plain_integral, offset + 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(diag.weighted_integral, offset / 2.0 + 1.0 / 3.0, epsilon = 1e-13);
    }
}
