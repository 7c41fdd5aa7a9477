//! Recurrent and convolutional counterparts of the GARCH recursions.
//!
//! GARCH(1,1) and GJR are scalar RNN cells with no activation and no output
//! layer: the new state is the dot product of the parameter list with the
//! observation list `(1, ε², [I(ε<0)·ε²,] σ²_{t−1})`. FIGARCH is a 1-d
//! convolution over the `ε²` series whose kernel is the lag-weight vector Λ,
//! itself a differentiable function of `(β, φ, d)`.

use super::transform::{
    inverse_logistic, inverse_simplex, inverse_softplus, logistic, simplex, softplus, Transform,
};
use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::garch::{
    FigarchParams, Garch11Params, GjrParams, Intercept, ModelKind, ModelParams,
};

/// Kernel parameters in constrained form, on `f64` or on a tape.
#[derive(Debug, Clone)]
pub enum KernelParams<T> {
    Garch11 { omega: T, alpha: T, beta: T },
    Gjr { omega: T, alpha: T, lambda: T, beta: T },
    /// `omega` is the additive intercept after the intercept convention.
    Figarch { omega: T, lambda: Vec<T> },
}

/// Recurrent state of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState<T> {
    pub sigma_prev_sq: T,
    /// LSTM memory; unused by the bare counterparts.
    pub c_prev: T,
    /// Last `T − 1` values of `ε²`, oldest first (FIGARCH kernels only).
    pub eps_sq_window: Vec<f64>,
}

impl<T: Real> CellState<T> {
    /// Fresh state: given variance, zero memory, zero-padded lag window.
    pub fn new(sigma_prev_sq: T, window_len: usize) -> Self {
        Self {
            sigma_prev_sq,
            c_prev: sigma_prev_sq.lift(0.0),
            eps_sq_window: vec![0.0; window_len],
        }
    }

    pub fn to_f64(&self) -> CellState<f64> {
        CellState {
            sigma_prev_sq: self.sigma_prev_sq.value(),
            c_prev: self.c_prev.value(),
            eps_sq_window: self.eps_sq_window.clone(),
        }
    }
}

impl CellState<f64> {
    /// Re-creates this state as constants in the context of `like`.
    pub fn lift<T: Real>(&self, like: T) -> CellState<T> {
        CellState {
            sigma_prev_sq: like.lift(self.sigma_prev_sq),
            c_prev: like.lift(self.c_prev),
            eps_sq_window: self.eps_sq_window.clone(),
        }
    }
}

/// Λ as a differentiable function of `(β, φ, d)`: binomial expansion of
/// `(1 − B)^d`, product with `(1 − φB)`, division by `(1 − βB)`.
pub fn figarch_lambda<T: Real>(beta: T, phi: T, d: T, truncation: usize) -> Vec<T> {
    let one = d.lift(1.0);
    let mut pi = Vec::with_capacity(truncation);
    pi.push(one);
    for j in 1..truncation {
        let prev = pi[j - 1];
        pi.push(prev * (-d + (j - 1) as f64) / j as f64);
    }
    let mut lambda = Vec::with_capacity(truncation);
    lambda.push(d.lift(0.0));
    let mut a_prev = pi[0];
    for j in 1..truncation {
        let c = pi[j] - phi * pi[j - 1];
        let a = c + beta * a_prev;
        lambda.push(-a);
        a_prev = a;
    }
    lambda
}

impl KernelParams<f64> {
    /// Counterpart of a validated stochastic parameter set.
    pub fn from_model(p: &ModelParams) -> Result<Self> {
        p.validate()?;
        Ok(match *p {
            ModelParams::Garch11(g) => KernelParams::Garch11 {
                omega: g.omega,
                alpha: g.alpha,
                beta: g.beta,
            },
            ModelParams::Gjr(g) => KernelParams::Gjr {
                omega: g.omega,
                alpha: g.alpha,
                lambda: g.lambda,
                beta: g.beta,
            },
            ModelParams::Figarch(f) => KernelParams::Figarch {
                omega: match f.intercept {
                    Intercept::Raw => f.omega,
                    Intercept::Scaled => f.omega / (-f.beta + 1.0),
                },
                lambda: figarch_lambda(f.beta, f.phi, f.d, f.truncation),
            },
        })
    }
}

impl<T: Real> KernelParams<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            KernelParams::Garch11 { .. } => ModelKind::Garch11,
            KernelParams::Gjr { .. } => ModelKind::Gjr,
            KernelParams::Figarch { .. } => ModelKind::Figarch,
        }
    }

    /// Lag-window length carried in the cell state.
    pub fn window_len(&self) -> usize {
        match self {
            KernelParams::Figarch { lambda, .. } => lambda.len() - 1,
            _ => 0,
        }
    }

    /// Kernel output for the shock `eps_prev` and the state's previous
    /// variance. FIGARCH pushes `ε²` into the state's lag window.
    pub fn step(&self, eps_prev: f64, state: &mut CellState<T>) -> T {
        match self {
            KernelParams::Figarch { .. } => {
                let w = &mut state.eps_sq_window;
                if !w.is_empty() {
                    w.rotate_left(1);
                    let last = w.len() - 1;
                    w[last] = eps_prev * eps_prev;
                }
                cnn_counterpart_step(self, state)
            }
            _ => rnn_counterpart_step(self, eps_prev, state.sigma_prev_sq)
                .expect("recurrent kernel"),
        }
    }
}

/// `Θ · X` for the recurrent kernels (GARCH(1,1) and GJR).
pub fn rnn_counterpart_step<T: Real>(k: &KernelParams<T>, eps_prev: f64, sigma_prev_sq: T) -> Result<T> {
    let e2 = eps_prev * eps_prev;
    match k {
        KernelParams::Garch11 { omega, alpha, beta } => {
            Ok(*omega * 1.0 + *alpha * e2 + *beta * sigma_prev_sq)
        }
        KernelParams::Gjr {
            omega,
            alpha,
            lambda,
            beta,
        } => {
            // The indicator is piecewise constant: it carries no gradient.
            let neg = if eps_prev < 0.0 { 1.0 } else { 0.0 };
            Ok(*omega * 1.0 + *alpha * e2 + *lambda * (neg * e2) + *beta * sigma_prev_sq)
        }
        KernelParams::Figarch { .. } => Err(Error::config(
            "FIGARCH is a convolutional kernel; use cnn_counterpart_step",
        )),
    }
}

/// `ω + Λ ⋆ ε²` over the state's lag window. Non-FIGARCH kernels return
/// their previous variance unchanged.
pub fn cnn_counterpart_step<T: Real>(k: &KernelParams<T>, state: &CellState<T>) -> T {
    match k {
        KernelParams::Figarch { omega, lambda } => {
            let w = &state.eps_sq_window;
            let n = w.len();
            // λ_j pairs with ε²_{t−j}, i.e. the window read newest first.
            let lagged: Vec<f64> = (1..=n).map(|j| w[n - j]).collect();
            *omega + T::dot(&lambda[1..], &lagged)
        }
        _ => state.sigma_prev_sq,
    }
}

/// Trainable kernel: raw coordinates plus the fixed FIGARCH settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GarchKernel {
    pub kind: ModelKind,
    pub raw: Vec<f64>,
    pub truncation: usize,
    pub intercept: Intercept,
}

impl GarchKernel {
    pub fn n_raw(kind: ModelKind) -> usize {
        kind.param_names().len()
    }

    pub fn from_params(p: &ModelParams) -> Self {
        let (raw, truncation, intercept) = match *p {
            ModelParams::Garch11(g) => {
                let mut r = vec![inverse_softplus(g.omega)];
                r.extend(inverse_simplex(&[g.alpha, g.beta]));
                (r, 0, Intercept::Raw)
            }
            ModelParams::Gjr(g) => {
                let mut r = vec![inverse_softplus(g.omega)];
                r.extend(inverse_simplex(&[g.alpha, g.lambda / 2.0, g.beta]));
                (r, 0, Intercept::Raw)
            }
            ModelParams::Figarch(f) => (
                vec![
                    inverse_softplus(f.omega),
                    inverse_logistic(f.beta),
                    inverse_logistic(f.phi),
                    inverse_logistic(f.d),
                ],
                f.truncation,
                f.intercept,
            ),
        };
        Self {
            kind: p.kind(),
            raw,
            truncation,
            intercept,
        }
    }

    pub fn transforms(&self) -> Vec<Transform> {
        match self.kind {
            ModelKind::Garch11 => vec![Transform::Softplus, Transform::LogisticSimplex, Transform::LogisticSimplex],
            ModelKind::Gjr => vec![
                Transform::Softplus,
                Transform::LogisticSimplex,
                Transform::LogisticSimplex,
                Transform::LogisticSimplex,
            ],
            ModelKind::Figarch => vec![
                Transform::Softplus,
                Transform::LogisticUnit,
                Transform::LogisticUnit,
                Transform::LogisticUnit,
            ],
        }
    }

    /// Constrained kernel from raw coordinates `raw` (same layout as
    /// `self.raw`). Fails when FIGARCH lag weights turn negative.
    pub fn prepare<T: Real>(&self, raw: &[T]) -> Result<KernelParams<T>> {
        let omega = softplus(raw[0]);
        Ok(match self.kind {
            ModelKind::Garch11 => {
                let s = simplex(&raw[1..3]);
                KernelParams::Garch11 {
                    omega,
                    alpha: s[0],
                    beta: s[1],
                }
            }
            ModelKind::Gjr => {
                let s = simplex(&raw[1..4]);
                KernelParams::Gjr {
                    omega,
                    alpha: s[0],
                    lambda: s[1] * 2.0,
                    beta: s[2],
                }
            }
            ModelKind::Figarch => {
                let beta = logistic(raw[1]);
                let phi = logistic(raw[2]);
                let d = logistic(raw[3]);
                let lambda = figarch_lambda(beta, phi, d, self.truncation);
                if let Some((j, l)) = lambda.iter().enumerate().skip(1).find(|(_, l)| l.value() < 0.0) {
                    return Err(Error::params(format!(
                        "negative FIGARCH weight lambda_{j} = {}",
                        l.value()
                    )));
                }
                let omega = match self.intercept {
                    Intercept::Raw => omega,
                    Intercept::Scaled => omega / (-beta + 1.0),
                };
                KernelParams::Figarch { omega, lambda }
            }
        })
    }

    /// Constrained parameter values as a stochastic parameter set.
    pub fn params(&self) -> Result<ModelParams> {
        let r = &self.raw;
        let omega = softplus(r[0]);
        let p = match self.kind {
            ModelKind::Garch11 => {
                let s = simplex(&r[1..3]);
                ModelParams::Garch11(Garch11Params {
                    omega,
                    alpha: s[0],
                    beta: s[1],
                })
            }
            ModelKind::Gjr => {
                let s = simplex(&r[1..4]);
                ModelParams::Gjr(GjrParams {
                    omega,
                    alpha: s[0],
                    lambda: s[1] * 2.0,
                    beta: s[2],
                })
            }
            ModelKind::Figarch => ModelParams::Figarch(FigarchParams {
                omega,
                beta: logistic(r[1]),
                phi: logistic(r[2]),
                d: logistic(r[3]),
                truncation: self.truncation,
                intercept: self.intercept,
            }),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn is_feasible(&self) -> bool {
        self.prepare(&self.raw).is_ok()
    }

    /// After an unconstrained update, pulls the FIGARCH `d` coordinate back
    /// toward its value in `prev_raw` by bisection (at most 20 halvings)
    /// until every lag weight is non-negative. Other coordinates are kept.
    pub fn project_feasible(&mut self, prev_raw: &[f64]) {
        if self.kind != ModelKind::Figarch || self.is_feasible() {
            return;
        }
        let target = self.raw[3];
        let anchor = prev_raw[3];
        let mut frac = 0.5;
        for _ in 0..20 {
            self.raw[3] = anchor + frac * (target - anchor);
            if self.is_feasible() {
                return;
            }
            frac *= 0.5;
        }
        self.raw[3] = anchor;
        if !self.is_feasible() {
            self.raw.copy_from_slice(prev_raw);
        }
    }
}
