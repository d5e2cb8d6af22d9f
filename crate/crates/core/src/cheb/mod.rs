//! Chebyshev machinery on the quantile interval `[0, 1]`.
//!
//! A series `c_0..c_{m-1}` represents `p(τ) = ½c_0 + Σ_{k≥1} c_k T_k(2τ − 1)`.
//! Values sampled at the `d` Chebyshev roots are turned into coefficients with a
//! DCT-II, integrated in coefficient space, and evaluated with the Clenshaw
//! backward recurrence. Every map between root values and integrated
//! coefficients is linear, and the adjoints are exposed so that callers can push
//! gradients back through them.

mod diagnostics;
mod quadrature;

pub use diagnostics::{
    decay_diagnostic, decay_diagnostic_normalized, mean_constant_diagnostic, monotonicity_audit,
    MeanConstantDiagnostic, MonotonicityAudit,
};
pub use quadrature::{cc_nodes, clenshaw_curtis_integral, CcWeights, EndpointRule};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed Chebyshev roots on `[0, 1]` together with the DCT-II cosine table.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebGrid {
    degree: usize,
    roots: Vec<f64>,
    /// Row-major `d × d`, entry `(j, k)` is `cos(jπ(k + ½)/d)`.
    cos_matrix: Vec<f64>,
}

impl ChebGrid {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidDegree {
                degree,
                reason: "the root grid needs at least one point",
            });
        }
        let d = degree as f64;
        let roots = (0..degree)
            .map(|k| 0.5 * (PI * (k as f64 + 0.5) / d).cos() + 0.5)
            .collect();
        let mut cos_matrix = Vec::with_capacity(degree * degree);
        for j in 0..degree {
            for k in 0..degree {
                cos_matrix.push((j as f64 * PI * (k as f64 + 0.5) / d).cos());
            }
        }
        Ok(Self {
            degree,
            roots,
            cos_matrix,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Roots in index order, i.e. strictly decreasing.
    pub fn roots(&self) -> &[f64] {
        &self.roots
    }

    /// Roots sorted ascending (reverse index order).
    pub fn ascending_roots(&self) -> Vec<f64> {
        self.roots.iter().rev().copied().collect()
    }

    pub fn cos_matrix(&self) -> &[f64] {
        &self.cos_matrix
    }

    /// DCT-II: `c_j = (2/d) Σ_k values[k] cos(jπ(k + ½)/d)`.
    pub fn values_to_coeffs(&self, values: &[f64]) -> Result<ChebSeries> {
        if values.len() != self.degree {
            return Err(Error::dim("values_to_coeffs", self.degree, values.len()));
        }
        let mut coeffs = vec![0.0; self.degree];
        self.dct_into(values, &mut coeffs);
        ChebSeries::new(coeffs)
    }

    pub(crate) fn dct_into(&self, values: &[f64], out: &mut [f64]) {
        let d = self.degree;
        let scale = 2.0 / d as f64;
        for (j, o) in out.iter_mut().enumerate().take(d) {
            let row = &self.cos_matrix[j * d..(j + 1) * d];
            let s: f64 = row.iter().zip(values).map(|(c, v)| c * v).sum();
            *o = scale * s;
        }
    }

    /// Adjoint of [`ChebGrid::values_to_coeffs`]: maps a gradient on the
    /// coefficients to a gradient on the root values.
    pub(crate) fn dct_transpose_into(&self, grad_coeffs: &[f64], out: &mut [f64]) {
        let d = self.degree;
        let scale = 2.0 / d as f64;
        out[..d].iter_mut().for_each(|o| *o = 0.0);
        for (j, g) in grad_coeffs.iter().enumerate().take(d) {
            if *g == 0.0 {
                continue;
            }
            let row = &self.cos_matrix[j * d..(j + 1) * d];
            for (o, c) in out.iter_mut().zip(row) {
                *o += scale * g * c;
            }
        }
    }
}

/// Convenience constructor mirroring [`ChebGrid::new`].
pub fn make_grid(degree: usize) -> Result<ChebGrid> {
    ChebGrid::new(degree)
}

/// How the constant of integration `C_0` is tied to `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantMode {
    /// `K` is the value at `τ = 0`.
    Q0,
    /// `K` enters through the odd-coefficient weights `1/(k² − 4)`.
    Mean,
}

/// Number of coefficients kept after integrating a length-`d` series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrationLength {
    /// `d + 1` coefficients: the exact antiderivative of the interpolant.
    #[default]
    Extended,
    /// `d` coefficients, dropping the top mode `c_{d−1}/(4d)`.
    #[serde(rename = "truncate-to-d")]
    TruncateToDegree,
}

/// A truncated Chebyshev expansion on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebSeries {
    coeffs: Vec<f64>,
}

impl ChebSeries {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InsufficientDegree { needed: 1, got: 0 });
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, tau: f64) -> Result<f64> {
        eval_cheb(&self.coeffs, tau)
    }

    pub fn integrate(&self, k: f64, mode: ConstantMode) -> Result<IntegratedSeries> {
        integrate_series(self, k, mode)
    }
}

/// Antiderivative of a [`ChebSeries`] with its constant of integration fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedSeries {
    coeffs: Vec<f64>,
    constant_mode: ConstantMode,
    source_decay: (f64, f64),
    source_degree: usize,
}

impl IntegratedSeries {
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn constant_mode(&self) -> ConstantMode {
        self.constant_mode
    }

    /// `(|c_{d−1}|, |c_{d−2}|)` of the integrated source series (missing entries are 0).
    pub fn source_decay(&self) -> (f64, f64) {
        self.source_decay
    }

    pub fn source_degree(&self) -> usize {
        self.source_degree
    }

    pub fn eval(&self, tau: f64) -> Result<f64> {
        eval_cheb(&self.coeffs, tau)
    }

    /// Derivative series recovered by Chebyshev differentiation.
    pub fn derivative(&self) -> ChebSeries {
        let mut c = differentiate(&self.coeffs);
        if c.is_empty() {
            c.push(0.0);
        }
        ChebSeries { coeffs: c }
    }
}

/// Linear map from `(c, K)` to the integrated coefficients `C`.
///
/// `C_k = (c_{k−1} − c_{k+1}) / (4k)` for `k ≥ 1` (with `c_j = 0` for `j ≥ d`), and
/// `C_0 = 2K − 2 Σ_{k≥1} s_k C_k`, where `s_k = (−1)^k` for [`ConstantMode::Q0`] and
/// `s_k = [k odd] / (k² − 4)` for [`ConstantMode::Mean`].
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationMap {
    degree: usize,
    out_len: usize,
    mode: ConstantMode,
    constant_weights: Vec<f64>,
}

impl IntegrationMap {
    pub fn new(degree: usize, mode: ConstantMode, length: IntegrationLength) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidDegree {
                degree,
                reason: "cannot integrate an empty series",
            });
        }
        let out_len = match length {
            IntegrationLength::Extended => degree + 1,
            IntegrationLength::TruncateToDegree => degree,
        };
        let constant_weights = (0..out_len)
            .map(|k| match (k, mode) {
                (0, _) => 0.0,
                (k, ConstantMode::Q0) => {
                    if k % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                (k, ConstantMode::Mean) => {
                    if k % 2 == 1 {
                        let kf = k as f64;
                        1.0 / (kf * kf - 4.0)
                    } else {
                        0.0
                    }
                }
            })
            .collect();
        Ok(Self {
            degree,
            out_len,
            mode,
            constant_weights,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    pub fn mode(&self) -> ConstantMode {
        self.mode
    }

    pub(crate) fn apply_into(&self, c: &[f64], k: f64, out: &mut [f64]) {
        let d = self.degree;
        let at = |j: usize| if j < d { c[j] } else { 0.0 };
        let mut acc = 0.0;
        for kk in 1..self.out_len {
            let v = (at(kk - 1) - at(kk + 1)) / (4.0 * kk as f64);
            out[kk] = v;
            acc += self.constant_weights[kk] * v;
        }
        out[0] = 2.0 * k - 2.0 * acc;
    }

    /// Adjoint of [`IntegrationMap::apply_into`]. Writes the gradient on `c` into
    /// `grad_c` and returns the gradient on `K`.
    pub(crate) fn transpose_into(&self, grad_big: &[f64], grad_c: &mut [f64]) -> f64 {
        let d = self.degree;
        grad_c[..d].iter_mut().for_each(|g| *g = 0.0);
        let g0 = grad_big[0];
        for kk in 1..self.out_len {
            let g = (grad_big[kk] - 2.0 * self.constant_weights[kk] * g0) / (4.0 * kk as f64);
            if kk - 1 < d {
                grad_c[kk - 1] += g;
            }
            if kk + 1 < d {
                grad_c[kk + 1] -= g;
            }
        }
        2.0 * g0
    }
}

/// Integrates with the exact (`d + 1`-coefficient) antiderivative.
pub fn integrate_series(series: &ChebSeries, k: f64, mode: ConstantMode) -> Result<IntegratedSeries> {
    integrate_series_with(series, k, mode, IntegrationLength::Extended)
}

pub fn integrate_series_with(
    series: &ChebSeries,
    k: f64,
    mode: ConstantMode,
    length: IntegrationLength,
) -> Result<IntegratedSeries> {
    if !k.is_finite() {
        return Err(Error::NonFinite("constant of integration".into()));
    }
    if series.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("series coefficients".into()));
    }
    let d = series.len();
    let map = IntegrationMap::new(d, mode, length)?;
    let mut coeffs = vec![0.0; map.out_len()];
    map.apply_into(&series.coeffs, k, &mut coeffs);
    let c = &series.coeffs;
    let source_decay = (
        c.get(d.wrapping_sub(1)).map_or(0.0, |v| v.abs()),
        if d >= 2 { c[d - 2].abs() } else { 0.0 },
    );
    Ok(IntegratedSeries {
        coeffs,
        constant_mode: mode,
        source_decay,
        source_degree: d,
    })
}

/// Clenshaw backward recurrence at `σ = 2τ − 1`. No domain check.
#[inline]
pub(crate) fn clenshaw(coeffs: &[f64], tau: f64) -> f64 {
    let sigma = 2.0 * tau - 1.0;
    let (mut d1, mut d2) = (0.0, 0.0);
    for &c in coeffs[1..].iter().rev() {
        let d3 = d1;
        d1 = 2.0 * sigma * d1 - d2 + c;
        d2 = d3;
    }
    sigma * d1 - d2 + 0.5 * coeffs[0]
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::Domain { tau })
    }
}

/// Evaluates `½c_0 + Σ c_k T_k(2τ − 1)` for `τ ∈ [0, 1]`.
pub fn eval_cheb(coeffs: &[f64], tau: f64) -> Result<f64> {
    if coeffs.is_empty() {
        return Err(Error::InsufficientDegree { needed: 1, got: 0 });
    }
    check_tau(tau)?;
    Ok(clenshaw(coeffs, tau))
}

/// Row-wise evaluation of an `n × m` coefficient matrix at `q` quantiles.
/// Returns a row-major `n × q` matrix.
pub fn eval_batch(coeffs: &[f64], row_len: usize, taus: &[f64]) -> Result<Vec<f64>> {
    if row_len == 0 {
        return Err(Error::InsufficientDegree { needed: 1, got: 0 });
    }
    if coeffs.len() % row_len != 0 {
        return Err(Error::dim("eval_batch", row_len, coeffs.len() % row_len));
    }
    for &t in taus {
        check_tau(t)?;
    }
    let mut out = Vec::with_capacity(coeffs.len() / row_len * taus.len());
    for row in coeffs.chunks_exact(row_len) {
        out.extend(taus.iter().map(|&t| clenshaw(row, t)));
    }
    Ok(out)
}

/// Coefficients of `d/dτ` of a series on `[0, 1]` (one shorter than the input).
pub fn differentiate(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    if n < 2 {
        return Vec::new();
    }
    // b_{k-1} = b_{k+1} + 2k a_k in σ, then a factor 2 for dσ/dτ.
    let mut b = vec![0.0; n + 1];
    for k in (1..n).rev() {
        b[k - 1] = b[k + 1] + 2.0 * k as f64 * coeffs[k];
    }
    b.truncate(n - 1);
    b.iter_mut().for_each(|v| *v *= 2.0);
    b
}

/// Evaluation functional of a length-`len` series at `τ`: `w_0 = ½`,
/// `w_k = T_k(2τ − 1)`. The series value is `Σ w_k c_k`.
pub(crate) fn basis_weights_into(tau: f64, out: &mut [f64]) {
    let sigma = 2.0 * tau - 1.0;
    let n = out.len();
    if n == 0 {
        return;
    }
    out[0] = 0.5;
    if n == 1 {
        return;
    }
    out[1] = sigma;
    let (mut prev, mut cur) = (1.0, sigma);
    for o in out.iter_mut().skip(2) {
        let next = 2.0 * sigma * cur - prev;
        *o = next;
        prev = cur;
        cur = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn naive_eval(coeffs: &[f64], tau: f64) -> f64 {
        let x = 2.0 * tau - 1.0;
        let (mut t0, mut t1) = (1.0, x);
        let mut s = 0.5 * coeffs[0];
        for (k, c) in coeffs.iter().enumerate().skip(1) {
            let tk = if k == 1 {
                t1
            } else {
                let t2 = 2.0 * x * t1 - t0;
                t0 = t1;
                t1 = t2;
                t2
            };
            s += c * tk;
        }
        s
    }

    #[test]
    fn grid_roots_match_closed_form() {
        assert_eq!(make_grid(1).unwrap().roots(), &[0.5]);
        let g2 = make_grid(2).unwrap();
        assert_abs_diff_eq!(g2.roots()[0], 0.853_553_39, epsilon = 1e-8);
        assert_abs_diff_eq!(g2.roots()[1], 0.146_446_61, epsilon = 1e-8);
        let g4 = make_grid(4).unwrap();
        let expected = [0.961_939_77, 0.691_341_72, 0.308_658_28, 0.038_060_23];
        for (r, e) in g4.roots().iter().zip(expected) {
            assert_abs_diff_eq!(*r, e, epsilon = 1e-8);
        }
        assert!(matches!(make_grid(0), Err(Error::InvalidDegree { .. })));
    }

    #[test]
    fn roots_strictly_decreasing_inside_unit_interval() {
        for d in 1..=128 {
            let g = make_grid(d).unwrap();
            assert!(g.roots().iter().all(|&r| r > 0.0 && r < 1.0));
            assert!(g.roots().windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn dct_examples() {
        let g2 = make_grid(2).unwrap();
        let s = g2.values_to_coeffs(&[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(s.coeffs()[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.coeffs()[1], 0.0, epsilon = 1e-15);

        let s = g2
            .values_to_coeffs(&[0.707_106_78, -0.707_106_78])
            .unwrap();
        assert_abs_diff_eq!(s.coeffs()[0], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s.coeffs()[1], 1.0, epsilon = 1e-8);

        let g4 = make_grid(4).unwrap();
        assert_eq!(g4.values_to_coeffs(&[0.0; 4]).unwrap().coeffs(), &[0.0; 4]);
        assert!(matches!(
            g4.values_to_coeffs(&[1.0; 3]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn integrate_constant_q0() {
        let s = ChebSeries::new(vec![2.0, 0.0]).unwrap();
        let p = integrate_series(&s, 5.0, ConstantMode::Q0).unwrap();
        assert_eq!(p.coeffs().len(), 3);
        assert_abs_diff_eq!(p.coeffs()[0], 11.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.coeffs()[1], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(p.coeffs()[2], 0.0, epsilon = 1e-14);
        for t in [0.0, 0.3, 1.0] {
            assert_abs_diff_eq!(p.eval(t).unwrap(), 5.0 + t, epsilon = 1e-13);
        }
    }

    #[test]
    fn integrate_linear_q0() {
        let s = ChebSeries::new(vec![0.0, 1.0]).unwrap();
        let p = integrate_series(&s, 0.0, ConstantMode::Q0).unwrap();
        assert_abs_diff_eq!(p.coeffs()[0], -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(p.coeffs()[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.coeffs()[2], 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(p.eval(0.75).unwrap(), -0.1875, epsilon = 1e-15);
    }

    #[test]
    fn integrate_constant_mean_mode_as_printed() {
        let s = ChebSeries::new(vec![2.0, 0.0]).unwrap();
        let p = integrate_series(&s, 5.0, ConstantMode::Mean).unwrap();
        assert_abs_diff_eq!(p.coeffs()[0], 10.0 + 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn truncated_length_drops_top_mode() {
        let s = ChebSeries::new(vec![1.0, 0.5, 0.25, 0.125]).unwrap();
        let full = integrate_series(&s, 0.0, ConstantMode::Q0).unwrap();
        let short =
            integrate_series_with(&s, 0.0, ConstantMode::Q0, IntegrationLength::TruncateToDegree)
                .unwrap();
        assert_eq!(full.coeffs().len(), 5);
        assert_eq!(short.coeffs().len(), 4);
        assert_abs_diff_eq!(full.coeffs()[4], 0.125 / 16.0, epsilon = 1e-15);
        assert_eq!(&full.coeffs()[1..4], &short.coeffs()[1..4]);
    }

    #[test]
    fn integrate_rejects_non_finite() {
        let s = ChebSeries::new(vec![f64::NAN, 0.0]).unwrap();
        assert!(matches!(
            integrate_series(&s, 0.0, ConstantMode::Q0),
            Err(Error::NonFinite(_))
        ));
        let s = ChebSeries::new(vec![1.0]).unwrap();
        assert!(integrate_series(&s, f64::INFINITY, ConstantMode::Q0).is_err());
    }

    #[test]
    fn eval_examples_and_domain() {
        assert_eq!(eval_cheb(&[2.0, 0.0], 0.37).unwrap(), 1.0);
        assert_abs_diff_eq!(eval_cheb(&[0.0, 1.0], 0.75).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            eval_cheb(&[-0.25, 0.0, 0.125], 0.75).unwrap(),
            -0.1875,
            epsilon = 1e-15
        );
        assert!(matches!(eval_cheb(&[1.0], 1.5), Err(Error::Domain { .. })));
        assert!(matches!(eval_cheb(&[1.0], -1e-9), Err(Error::Domain { .. })));
        assert!(matches!(eval_cheb(&[1.0], f64::NAN), Err(Error::Domain { .. })));
        assert!(eval_cheb(&[], 0.5).is_err());
    }

    #[test]
    fn eval_batch_matches_scalar_bitwise() {
        assert_eq!(eval_batch(&[2.0, 0.0], 2, &[0.1, 0.9]).unwrap(), vec![1.0, 1.0]);
        let out = eval_batch(&[0.0, 1.0], 2, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(out, vec![-1.0, 0.0, 1.0]);
        let rows = [0.3, -1.2, 0.7, 0.3, -1.2, 0.7];
        let taus = [0.0, 0.13, 0.5, 0.77, 1.0];
        let out = eval_batch(&rows, 3, &taus).unwrap();
        assert_eq!(&out[..5], &out[5..]);
        for (t, v) in taus.iter().zip(&out[..5]) {
            assert_eq!(v.to_bits(), eval_cheb(&rows[..3], *t).unwrap().to_bits());
        }
        assert!(eval_batch(&rows, 3, &[1.2]).is_err());
    }

    #[test]
    fn clenshaw_agrees_with_naive_recurrence() {
        let coeffs: Vec<f64> = (0..40).map(|k| ((k * 7919) % 13) as f64 / 7.0 - 0.9).collect();
        let scale: f64 = coeffs.iter().map(|c| c.abs()).sum();
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let a = eval_cheb(&coeffs, t).unwrap();
            let b = naive_eval(&coeffs, t);
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn differentiate_inverts_integrate() {
        let s = ChebSeries::new(vec![0.4, -0.3, 1.1, 0.05, -0.2]).unwrap();
        let p = integrate_series(&s, -2.0, ConstantMode::Mean).unwrap();
        let back = p.derivative();
        assert_eq!(back.len(), s.len());
        for (a, b) in back.coeffs().iter().zip(s.coeffs()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn basis_weights_reproduce_clenshaw() {
        let c = [0.7, -0.1, 0.25, 0.4, -0.33];
        let mut w = [0.0; 5];
        for t in [0.0, 0.21, 0.5, 0.93, 1.0] {
            basis_weights_into(t, &mut w);
            let direct: f64 = w.iter().zip(&c).map(|(a, b)| a * b).sum();
            assert_abs_diff_eq!(direct, clenshaw(&c, t), epsilon = 1e-14);
        }
    }

    #[test]
    fn adjoints_match_forward_maps() {
        // <A x, y> == <x, A^T y> for the DCT and the integration map.
        let g = make_grid(7).unwrap();
        let x: Vec<f64> = (0..7).map(|i| (i as f64 * 0.37).sin() + 0.2).collect();
        let y: Vec<f64> = (0..8).map(|i| (i as f64 * 1.3).cos()).collect();
        let mut ax = vec![0.0; 7];
        g.dct_into(&x, &mut ax);
        let mut aty = vec![0.0; 7];
        g.dct_transpose_into(&y[..7], &mut aty);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);

        for mode in [ConstantMode::Q0, ConstantMode::Mean] {
            for len in [IntegrationLength::Extended, IntegrationLength::TruncateToDegree] {
                let map = IntegrationMap::new(7, mode, len).unwrap();
                let k = 0.8;
                let mut big = vec![0.0; map.out_len()];
                map.apply_into(&x, k, &mut big);
                let mut gc = vec![0.0; 7];
                let gk = map.transpose_into(&y[..map.out_len()], &mut gc);
                let lhs: f64 = big.iter().zip(&y).map(|(a, b)| a * b).sum();
                let rhs: f64 = x.iter().zip(&gc).map(|(a, b)| a * b).sum::<f64>() + k * gk;
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn positive_root_values_can_still_decrease_between_roots() {
        // The interpolant of positive root values may dip below zero between
        // two small neighbouring values, so P need not increase across them.
        let g = make_grid(4).unwrap();
        let s = g.values_to_coeffs(&[1.0, 1e-3, 1e-3, 1.0]).unwrap();
        let p = integrate_series(&s, 0.0, ConstantMode::Q0).unwrap();
        let vals: Vec<f64> = g.ascending_roots().iter().map(|&t| p.eval(t).unwrap()).collect();
        assert!(vals[2] < vals[1]);
    }
}
