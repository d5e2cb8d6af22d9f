//! Brute-force oracles shared by the integration tests. None of them goes
//! through the crate's recurrences or transforms.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `T_k(u) = cos(k arccos u)` on `[-1, 1]`.
pub fn cheb_t(k: usize, u: f64) -> f64 {
    (k as f64 * u.clamp(-1.0, 1.0).acos()).cos()
}

/// `½c_0 + Σ c_k T_k(2τ − 1)` term by term.
pub fn direct_eval(coeffs: &[f64], tau: f64) -> f64 {
    let u = 2.0 * tau - 1.0;
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| if k == 0 { 0.5 * c } else { c * cheb_t(k, u) })
        .sum()
}

/// DCT-II as an explicit double loop.
pub fn direct_dct(values: &[f64]) -> Vec<f64> {
    let d = values.len();
    (0..d)
        .map(|j| {
            let s: f64 = values
                .iter()
                .enumerate()
                .map(|(k, v)| v * (j as f64 * PI * (k as f64 + 0.5) / d as f64).cos())
                .sum();
            2.0 / d as f64 * s
        })
        .collect()
}

/// Ascending Chebyshev roots on `[0, 1]`.
pub fn ascending_roots(d: usize) -> Vec<f64> {
    let mut r: Vec<f64> = (0..d)
        .map(|k| 0.5 * (PI * (k as f64 + 0.5) / d as f64).cos() + 0.5)
        .collect();
    r.reverse();
    r
}

/// Antiderivative of `T_k` in `u`.
fn t_antiderivative(k: usize, u: f64) -> f64 {
    match k {
        0 => u,
        1 => 0.5 * u * u,
        _ => cheb_t(k + 1, u) / (2.0 * (k + 1) as f64) - cheb_t(k - 1, u) / (2.0 * (k - 1) as f64),
    }
}

/// `∫_0^τ p(s) ds` for the series `coeffs`, from the closed-form antiderivatives.
pub fn integral_from_zero(coeffs: &[f64], tau: f64) -> f64 {
    let u = 2.0 * tau - 1.0;
    let s: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let w = if k == 0 { 0.5 } else { 1.0 };
            w * c * (t_antiderivative(k, u) - t_antiderivative(k, -1.0))
        })
        .sum();
    0.5 * s
}
