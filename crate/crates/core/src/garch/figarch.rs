//! Lag weights of the truncated FIGARCH(1, d, 1) expansion
//! `1 − (1 − βB)⁻¹ (1 − φB) (1 − B)^d = Σ λ_k B^k`.

use crate::error::{Error, Result};

/// Coefficients `π_j` of `(1 − B)^d`, `j < len`.
pub fn fractional_difference_coeffs(d: f64, len: usize) -> Vec<f64> {
    let mut pi = Vec::with_capacity(len);
    if len == 0 {
        return pi;
    }
    pi.push(1.0);
    for j in 1..len {
        let prev = pi[j - 1];
        pi.push(prev * ((j - 1) as f64 - d) / j as f64);
    }
    pi
}

/// Raw coefficients `λ_0..λ_{T-1}` without the sign check. `λ_0` is always
/// zero.
pub fn figarch_weights_unchecked(beta: f64, phi: f64, d: f64, truncation: usize) -> Vec<f64> {
    let pi = fractional_difference_coeffs(d, truncation);
    // (1 − φB)(1 − B)^d
    let c: Vec<f64> = (0..truncation)
        .map(|j| if j == 0 { pi[0] } else { pi[j] - phi * pi[j - 1] })
        .collect();
    // divide by (1 − βB): a_j = c_j + β a_{j−1}
    let mut lambda = vec![0.0; truncation];
    let mut a_prev = c[0];
    for j in 1..truncation {
        let a = c[j] + beta * a_prev;
        lambda[j] = -a;
        a_prev = a;
    }
    lambda
}

/// Lag weights `Λ = (λ_0, …, λ_{T-1})`. Fails if any `λ_j` with `j ≥ 1` is
/// negative, since the conditional variance could then turn negative.
pub fn figarch_weights(beta: f64, phi: f64, d: f64, truncation: usize) -> Result<Vec<f64>> {
    if truncation < 2 {
        return Err(Error::params("truncation must be at least 2"));
    }
    if !(0.0..1.0).contains(&beta) || !(0.0..1.0).contains(&phi) || !(0.0..1.0).contains(&d) {
        return Err(Error::params(format!(
            "FIGARCH box constraints violated: beta={beta}, phi={phi}, d={d}"
        )));
    }
    let lambda = figarch_weights_unchecked(beta, phi, d, truncation);
    if let Some((j, l)) = lambda.iter().enumerate().skip(1).find(|(_, &l)| l < 0.0) {
        return Err(Error::params(format!(
            "negative FIGARCH weight lambda_{j} = {l} for beta={beta}, phi={phi}, d={d}"
        )));
    }
    Ok(lambda)
}

/// `ω + Σ_{j≥1} λ_j ε²_{t−j}` where `eps_sq_window` holds `ε²_{t−T+1..t}`,
/// oldest first. The newest entry pairs with `λ_0 = 0`.
pub fn figarch_step(omega: f64, eps_sq_window: &[f64], lambda: &[f64]) -> Result<f64> {
    let t = lambda.len();
    if eps_sq_window.len() != t {
        return Err(Error::data(format!(
            "FIGARCH window has length {}, expected {t}",
            eps_sq_window.len()
        )));
    }
    let mut conv = 0.0;
    for j in 1..t {
        conv += lambda[j] * eps_sq_window[t - 1 - j];
    }
    Ok(omega + conv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_coefficients_half() {
        let pi = fractional_difference_coeffs(0.5, 3);
        assert_eq!(pi, vec![1.0, -0.5, -0.125]);
    }

    #[test]
    fn cancelling_operator_gives_zero_weights() {
        let l = figarch_weights(0.3, 0.3, 0.0, 16).unwrap();
        assert!(l.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn first_weights_closed_form() {
        let (b, p, d) = (0.4, 0.2, 0.45);
        let l = figarch_weights(b, p, d, 8).unwrap();
        assert_eq!(l[0], 0.0);
        assert!((l[1] - (d + p - b)).abs() < 1e-15);
        // λ₂ = (1−d)d/2 + φd − β(φ − β + d) ... via a₂ = c₂ + βa₁
        let a1 = -d - p + b;
        let c2 = -d * (1.0 - d) / 2.0 + p * d;
        assert!((l[2] + (c2 + b * a1)).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_weights() {
        assert!(figarch_weights(0.9, 0.1, 0.2, 10).is_err());
        assert!(figarch_weights(0.4, 0.2, 0.4, 1).is_err());
    }

    #[test]
    fn step_examples() {
        let lambda = vec![0.0, 0.5, 0.0, 0.0];
        assert_eq!(figarch_step(0.1, &[0.0; 4], &lambda).unwrap(), 0.1);
        // window oldest→newest: ε²_{t-3}, ε²_{t-2}, ε²_{t-1}, ε²_t
        let s = figarch_step(0.1, &[9.0, 9.0, 2.0, 7.0], &lambda).unwrap();
        assert!((s - 1.1).abs() < 1e-15);
        assert!(figarch_step(0.1, &[0.0; 3], &lambda).is_err());
    }
}
