//! Training objectives. The two likelihood losses drop additive constants,
//! so `n_loss(0, 1) == 0`.

use std::fmt;

use crate::autodiff::Real;
use crate::error::{Error, Result};

/// Default Student-t degrees of freedom.
pub const DEFAULT_DOF: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// Gaussian negative log-likelihood.
    NLoss,
    /// Student-t negative log-likelihood with `dof > 2`.
    TLoss { dof: f64 },
    /// Squared error on volatility (square roots of the inputs).
    Mse,
    /// Absolute error on volatility.
    Mae,
}

impl LossKind {
    pub fn t(dof: f64) -> Result<Self> {
        check_dof(dof)?;
        Ok(LossKind::TLoss { dof })
    }

    /// Parses `n`, `t`, `mse` or `mae`; `dof` is used only for `t`.
    pub fn parse(name: &str, dof: f64) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "n" | "n-loss" | "nloss" | "normal" => Ok(LossKind::NLoss),
            "t" | "t-loss" | "tloss" | "student" => LossKind::t(dof),
            "mse" => Ok(LossKind::Mse),
            "mae" => Ok(LossKind::Mae),
            other => Err(Error::config(format!("unknown loss '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::TLoss { dof } => check_dof(dof),
            _ => Ok(()),
        }
    }

    /// Short name accepted by [`LossKind::parse`].
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::NLoss => "n",
            LossKind::TLoss { .. } => "t",
            LossKind::Mse => "mse",
            LossKind::Mae => "mae",
        }
    }

    pub fn is_likelihood(&self) -> bool {
        matches!(self, LossKind::NLoss | LossKind::TLoss { .. })
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::NLoss => write!(f, "n"),
            LossKind::TLoss { dof } => write!(f, "t({dof})"),
            LossKind::Mse => write!(f, "mse"),
            LossKind::Mae => write!(f, "mae"),
        }
    }
}

fn check_dof(dof: f64) -> Result<()> {
    if dof.is_nan() || dof <= 2.0 {
        return Err(Error::config(format!(
            "t-loss needs more than 2 degrees of freedom, got {dof}"
        )));
    }
    Ok(())
}

fn check_sigma(sigma_hat_sq: f64) -> Result<()> {
    if sigma_hat_sq.is_nan() || sigma_hat_sq <= 0.0 {
        return Err(Error::Domain {
            op: "variance forecast",
            value: sigma_hat_sq,
        });
    }
    Ok(())
}

/// `ln(σ̂²)/2 + y/(2σ̂²)` for squared target `y`.
pub fn n_loss(target_sq: f64, sigma_hat_sq: f64) -> Result<f64> {
    check_sigma(sigma_hat_sq)?;
    Ok(sigma_hat_sq.ln() / 2.0 + target_sq / (2.0 * sigma_hat_sq))
}

/// `ln(σ̂²)/2 + (v+1)/2 · ln(1 + y/((v−2)σ̂²))`.
pub fn t_loss(target_sq: f64, sigma_hat_sq: f64, dof: f64) -> Result<f64> {
    check_dof(dof)?;
    check_sigma(sigma_hat_sq)?;
    Ok(sigma_hat_sq.ln() / 2.0
        + (dof + 1.0) / 2.0 * (target_sq / ((dof - 2.0) * sigma_hat_sq)).ln_1p())
}

/// Derivative of [`n_loss`] with respect to `σ̂²`.
pub fn n_loss_grad(target_sq: f64, sigma_hat_sq: f64) -> f64 {
    0.5 / sigma_hat_sq - target_sq / (2.0 * sigma_hat_sq * sigma_hat_sq)
}

/// Derivative of [`t_loss`] with respect to `σ̂²`.
pub fn t_loss_grad(target_sq: f64, sigma_hat_sq: f64, dof: f64) -> f64 {
    let u = target_sq / ((dof - 2.0) * sigma_hat_sq);
    0.5 / sigma_hat_sq - (dof + 1.0) / 2.0 * u / ((1.0 + u) * sigma_hat_sq)
}

/// Per-step loss on any [`Real`] forecast.
pub fn step_loss<T: Real>(kind: LossKind, target_sq: f64, sigma_hat_sq: T) -> Result<T> {
    check_sigma(sigma_hat_sq.value())?;
    match kind {
        LossKind::NLoss => {
            Ok(sigma_hat_sq.ln()? / 2.0 + sigma_hat_sq.lift(target_sq) / (sigma_hat_sq * 2.0))
        }
        LossKind::TLoss { dof } => {
            let ratio = sigma_hat_sq.lift(target_sq) / (sigma_hat_sq * (dof - 2.0));
            Ok(sigma_hat_sq.ln()? / 2.0 + (ratio + 1.0).ln()? * ((dof + 1.0) / 2.0))
        }
        LossKind::Mse => {
            let diff = sigma_hat_sq.sqrt()? - target_sq.max(0.0).sqrt();
            Ok(diff * diff)
        }
        LossKind::Mae => Ok((sigma_hat_sq.sqrt()? - target_sq.max(0.0).sqrt()).abs()),
    }
}

/// Sum of per-step losses over aligned targets and forecasts.
pub fn series_loss(kind: LossKind, targets_sq: &[f64], sigma_hat_sq: &[f64]) -> Result<f64> {
    kind.validate()?;
    if targets_sq.len() != sigma_hat_sq.len() {
        return Err(Error::data(format!(
            "length mismatch: {} targets, {} forecasts",
            targets_sq.len(),
            sigma_hat_sq.len()
        )));
    }
    if targets_sq.is_empty() {
        return Err(Error::data("empty loss series"));
    }
    let mut total = 0.0;
    for (&y, &s) in targets_sq.iter().zip(sigma_hat_sq) {
        total += match kind {
            LossKind::NLoss => n_loss(y, s)?,
            LossKind::TLoss { dof } => t_loss(y, s, dof)?,
            _ => step_loss(kind, y, s)?,
        };
    }
    Ok(total)
}
