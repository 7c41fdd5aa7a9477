//! Maps between unconstrained training coordinates and constrained model
//! parameters. Gradient steps move the raw values freely; the constrained
//! values always satisfy positivity and stationarity.

use crate::autodiff::{sigmoid, Real};

/// How a raw coordinate (or group of coordinates) becomes a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// `softplus(r) > 0`.
    Softplus,
    /// One member of a softmax group with an implicit zero slack logit, so
    /// the group sums to less than one.
    LogisticSimplex,
    /// `logistic(r) ∈ (0, 1)`.
    LogisticUnit,
    /// Unconstrained.
    Identity,
}

/// A single raw coordinate with its transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedParam {
    pub raw: f64,
    pub transform: Transform,
}

impl ConstrainedParam {
    /// Constrained value; simplex members are reported as if alone in their
    /// group.
    pub fn value(&self) -> f64 {
        match self.transform {
            Transform::Softplus => softplus(self.raw),
            Transform::LogisticSimplex => simplex(&[self.raw])[0],
            Transform::LogisticUnit => sigmoid(self.raw),
            Transform::Identity => self.raw,
        }
    }
}

pub fn softplus<T: Real>(raw: T) -> T {
    raw.softplus()
}

pub fn inverse_softplus(v: f64) -> f64 {
    let v = v.max(1e-12);
    // ln(eᵛ − 1), written to stay accurate for both small and large v
    if v > 30.0 {
        v + (-(-v).exp()).ln_1p()
    } else {
        v.exp_m1().ln()
    }
}

pub fn logistic<T: Real>(raw: T) -> T {
    raw.sigmoid()
}

pub fn inverse_logistic(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Softmax of `raw` against an extra zero logit, dropping the slack share.
pub fn simplex<T: Real>(raw: &[T]) -> Vec<T> {
    let m = raw.iter().map(|r| r.value()).fold(0.0f64, f64::max);
    let exps: Vec<T> = raw.iter().map(|&r| (r - m).exp()).collect();
    let mut denom = exps[0] + (-m).exp();
    for &e in &exps[1..] {
        denom = denom + e;
    }
    exps.into_iter().map(|e| e / denom).collect()
}

pub fn inverse_simplex(shares: &[f64]) -> Vec<f64> {
    let shares: Vec<f64> = shares.iter().map(|s| s.max(1e-12)).collect();
    let slack = (1.0 - shares.iter().sum::<f64>()).max(1e-12);
    shares.iter().map(|s| (s / slack).ln()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverses_roundtrip() {
        for v in [1e-6, 0.1, 1.0, 12.0, 50.0] {
            assert!((softplus(inverse_softplus(v)) - v).abs() < 1e-12 * v.max(1.0), "{v}");
        }
        for p in [0.01, 0.3, 0.5, 0.97] {
            assert!((logistic(inverse_logistic(p)) - p).abs() < 1e-14);
        }
        let shares = [0.05, 0.2, 0.7];
        let back = simplex(&inverse_simplex(&shares));
        for (a, b) in shares.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn simplex_stays_below_one() {
        for raw in [[5.0, 5.0], [-5.0, 10.0], [0.0, 0.0]] {
            let s = simplex(&raw);
            assert!(s.iter().all(|&x| x > 0.0));
            assert!(s.iter().sum::<f64>() < 1.0);
        }
    }

    #[test]
    fn single_param_values() {
        let p = ConstrainedParam {
            raw: 0.0,
            transform: Transform::LogisticUnit,
        };
        assert_eq!(p.value(), 0.5);
        let p = ConstrainedParam {
            raw: 0.0,
            transform: Transform::LogisticSimplex,
        };
        assert_eq!(p.value(), 0.5);
    }
}
