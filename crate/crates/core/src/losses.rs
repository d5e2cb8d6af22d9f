//! Training objectives.
//!
//! Every loss returns its value together with the gradient on the predictions
//! it was fed, so that models can push it back through their networks.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nnet::Tensor;

/// `(y − q)(τ − 𝟙[y < q])`.
#[inline]
pub fn pinball(y: f64, q: f64, tau: f64) -> f64 {
    let ind = if y < q { 1.0 } else { 0.0 };
    (y - q) * (tau - ind)
}

/// `∂/∂q` of [`pinball`], with the indicator convention at `y = q`.
#[inline]
pub fn pinball_grad(y: f64, q: f64, tau: f64) -> f64 {
    let ind = if y < q { 1.0 } else { 0.0 };
    ind - tau
}

/// i.i.d. uniform quantile levels, drawn fresh every training step.
#[derive(Debug, Clone, PartialEq)]
pub struct TauSample {
    pub values: Vec<f64>,
}

impl TauSample {
    /// Draws `n` values from the open interval `(0, 1)`.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        let values = (0..n)
            .map(|_| loop {
                let t: f64 = rng.random();
                if t > 0.0 {
                    break t;
                }
            })
            .collect();
        Self { values }
    }
}

/// Monte-Carlo quantile-function loss.
///
/// `preds` and `taus` are laid out as `[sample][draw]` with `n_tau = preds.len() /
/// ys.len()` draws per sample; the loss is the mean pinball over all pairs.
pub fn mc_quantile_loss(preds: &[f64], ys: &[f64], taus: &[f64]) -> Result<(f64, Vec<f64>)> {
    if ys.is_empty() || preds.is_empty() {
        return Err(Error::Usage("empty batch in quantile loss".into()));
    }
    if preds.len() != taus.len() {
        return Err(Error::dim("mc_quantile_loss taus", preds.len(), taus.len()));
    }
    if preds.len() % ys.len() != 0 {
        return Err(Error::dim("mc_quantile_loss targets", preds.len(), ys.len()));
    }
    let n_tau = preds.len() / ys.len();
    let inv = 1.0 / preds.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(preds.len());
    for (i, (&q, &t)) in preds.iter().zip(taus).enumerate() {
        let y = ys[i / n_tau];
        total += pinball(y, q, t);
        grad.push(pinball_grad(y, q, t) * inv);
    }
    Ok((total * inv, grad))
}

/// Crossing penalty over an `n × m` matrix whose rows hold predictions at
/// ascending quantile levels: mean over rows and adjacent pairs of
/// `max(0, φ(τ_j) − φ(τ_{j+1}))`.
pub fn crossing_penalty(sorted_outputs: &Tensor) -> Result<(f64, Tensor)> {
    let (n, m) = (sorted_outputs.rows(), sorted_outputs.cols());
    if m < 2 {
        return Err(Error::Usage(format!("crossing penalty needs >= 2 quantile levels, got {m}")));
    }
    if n == 0 {
        return Err(Error::Usage("empty batch in crossing penalty".into()));
    }
    let inv = 1.0 / (n * (m - 1)) as f64;
    let mut total = 0.0;
    let mut grad = Tensor::zeros(n, m);
    for r in 0..n {
        let row = sorted_outputs.row(r);
        let g = grad.row_mut(r);
        for j in 0..m - 1 {
            let gap = row[j] - row[j + 1];
            if gap > 0.0 {
                total += gap;
                g[j] += inv;
                g[j + 1] -= inv;
            }
        }
    }
    Ok((total * inv, grad))
}

/// Clamped central-difference points `(τ − h/2, τ + h/2) ∩ [0, 1]`.
pub fn central_difference_points(tau: f64, h: f64) -> Result<(f64, f64)> {
    if !(h > 0.0) {
        return Err(Error::config("penalty_step", format!("step must be positive, got {h}")));
    }
    Ok(((tau - 0.5 * h).max(0.0), (tau + 0.5 * h).min(1.0)))
}

/// Derivative penalty `max(0, max_i −(upper_i − lower_i)/width_i)` over every
/// (sample, τ) pair. The gradient flows only to the maximizing pair.
pub fn derivative_penalty(
    lower: &[f64],
    upper: &[f64],
    widths: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if lower.is_empty() {
        return Err(Error::Usage("empty batch in derivative penalty".into()));
    }
    if lower.len() != upper.len() || lower.len() != widths.len() {
        return Err(Error::dim("derivative_penalty", lower.len(), upper.len().min(widths.len())));
    }
    let mut best = (0.0, None);
    for i in 0..lower.len() {
        let neg_slope = -(upper[i] - lower[i]) / widths[i];
        if neg_slope > best.0 {
            best = (neg_slope, Some(i));
        }
    }
    let mut gl = vec![0.0; lower.len()];
    let mut gu = vec![0.0; lower.len()];
    if let Some(i) = best.1 {
        gl[i] = 1.0 / widths[i];
        gu[i] = -1.0 / widths[i];
    }
    Ok((best.0, gl, gu))
}

/// Summed Gaussian negative log-likelihood with gradients on `mu` and `sigma`.
pub fn gaussian_nll(ys: &[f64], mu: &[f64], sigma: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if ys.len() != mu.len() || ys.len() != sigma.len() {
        return Err(Error::dim("gaussian_nll", ys.len(), mu.len().min(sigma.len())));
    }
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut total = 0.0;
    let mut gmu = Vec::with_capacity(ys.len());
    let mut gsig = Vec::with_capacity(ys.len());
    for ((&y, &m), &s) in ys.iter().zip(mu).zip(sigma) {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NonFinite(format!("gaussian scale {s}")));
        }
        let r = y - m;
        let s2 = s * s;
        total += half_log_2pi + s.ln() + r * r / (2.0 * s2);
        gmu.push(-r / s2);
        gsig.push(1.0 / s - r * r / (s2 * s));
    }
    Ok((total, gmu, gsig))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn pinball_examples() {
        assert_abs_diff_eq!(pinball(1.0, 0.0, 0.9), 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(pinball(0.0, 1.0, 0.9), 0.1, epsilon = 1e-15);
        assert_eq!(pinball(2.5, 2.5, 0.3), 0.0);
    }

    #[test]
    fn mc_loss_examples() {
        let (l, _) = mc_quantile_loss(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0], &[0.1, 0.5, 0.7, 0.2]).unwrap();
        assert_eq!(l, 0.0);
        let (l, g) = mc_quantile_loss(&[0.0, 0.0], &[1.0], &[0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(l, 0.5, epsilon = 1e-15);
        assert_eq!(g, vec![-0.125, -0.375]);
        assert!(mc_quantile_loss(&[], &[], &[]).is_err());
        assert!(mc_quantile_loss(&[0.0, 1.0, 2.0], &[1.0, 2.0], &[0.5; 3]).is_err());
    }

    #[test]
    fn mc_loss_single_tau_equals_batch_mean_pinball() {
        let ys = [0.3, -1.2, 2.0, 0.0];
        let qs = [0.1, -1.0, 2.5, 0.0];
        let (l, _) = mc_quantile_loss(&qs, &ys, &[0.3; 4]).unwrap();
        let direct: f64 = ys.iter().zip(&qs).map(|(y, q)| pinball(*y, *q, 0.3)).sum::<f64>() / 4.0;
        assert_eq!(l, direct);
    }

    #[test]
    fn crossing_penalty_examples() {
        let mono = Tensor::from_rows(&[vec![0.1, 0.2, 0.9]]).unwrap();
        assert_eq!(crossing_penalty(&mono).unwrap().0, 0.0);
        let crossed = Tensor::from_rows(&[vec![1.0, 0.7]]).unwrap();
        let (p, g) = crossing_penalty(&crossed).unwrap();
        assert_abs_diff_eq!(p, 0.3, epsilon = 1e-15);
        assert_eq!(g.row(0), &[1.0, -1.0]);
        let doubled = Tensor::from_rows(&[vec![2.0, 1.4]]).unwrap();
        assert_abs_diff_eq!(crossing_penalty(&doubled).unwrap().0, 0.6, epsilon = 1e-15);
        assert!(crossing_penalty(&Tensor::from_rows(&[vec![1.0]]).unwrap()).is_err());
    }

    #[test]
    fn derivative_penalty_examples() {
        let taus = [0.2, 0.5, 0.8];
        let h = 1e-3;
        let pts: Vec<(f64, f64)> = taus.iter().map(|&t| central_difference_points(t, h).unwrap()).collect();
        let widths: Vec<f64> = pts.iter().map(|(a, b)| b - a).collect();
        let eval = |f: &dyn Fn(f64) -> f64| -> (Vec<f64>, Vec<f64>) {
            (pts.iter().map(|p| f(p.0)).collect(), pts.iter().map(|p| f(p.1)).collect())
        };
        let (lo, hi) = eval(&|t| 3.0 * t + 1.0);
        assert_eq!(derivative_penalty(&lo, &hi, &widths).unwrap().0, 0.0);
        let (lo, hi) = eval(&|t| -t);
        assert_abs_diff_eq!(derivative_penalty(&lo, &hi, &widths).unwrap().0, 1.0, epsilon = 1e-9);
        let (lo2, hi2) = eval(&|t| -t + 17.0);
        assert_abs_diff_eq!(
            derivative_penalty(&lo2, &hi2, &widths).unwrap().0,
            derivative_penalty(&lo, &hi, &widths).unwrap().0,
            epsilon = 1e-9
        );
        assert!(central_difference_points(0.5, 0.0).is_err());
        assert_eq!(central_difference_points(0.0, 0.1).unwrap(), (0.0, 0.05));
    }

    #[test]
    fn gaussian_nll_examples() {
        let (l, gm, _) = gaussian_nll(&[1.0], &[1.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(l, 0.918_938_5, epsilon = 1e-7);
        assert_eq!(gm, vec![0.0]);
        let (l2, _, _) = gaussian_nll(&[3.0], &[1.0], &[2.0]).unwrap();
        let (l0, _, _) = gaussian_nll(&[1.0], &[1.0], &[2.0]).unwrap();
        assert_abs_diff_eq!(l2 - l0, 0.5, epsilon = 1e-14);
        assert!(gaussian_nll(&[0.0], &[0.0], &[0.0]).is_err());
        assert!(gaussian_nll(&[0.0], &[0.0], &[-1.0]).is_err());
    }

    proptest! {
        #[test]
        fn pinball_nonnegative_and_midpoint_convex(
            y in -10.0f64..10.0, a in -10.0f64..10.0, b in -10.0f64..10.0, tau in 0.0f64..=1.0
        ) {
            prop_assert!(pinball(y, a, tau) >= 0.0);
            let mid = pinball(y, 0.5 * (a + b), tau);
            prop_assert!(mid <= 0.5 * (pinball(y, a, tau) + pinball(y, b, tau)) + 1e-12);
        }

        #[test]
        fn mc_loss_permutation_invariant(
            pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.01f64..0.99), 1..20),
            rot in 0usize..20
        ) {
            let qs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let ts: Vec<f64> = pairs.iter().map(|p| p.2).collect();
            let (a, _) = mc_quantile_loss(&qs, &ys, &ts).unwrap();
            let k = rot % pairs.len();
            let rotate = |v: &Vec<f64>| { let mut w = v.clone(); w.rotate_left(k); w };
            let (b, _) = mc_quantile_loss(&rotate(&qs), &rotate(&ys), &rotate(&ts)).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn nll_minimized_at_mean(y in -5.0f64..5.0, s in 0.1f64..3.0, off in -2.0f64..2.0) {
            let (at, _, _) = gaussian_nll(&[y], &[y], &[s]).unwrap();
            let (away, _, _) = gaussian_nll(&[y], &[y + off], &[s]).unwrap();
            prop_assert!(at <= away);
        }
    }
}
