//! Classical maximum-likelihood fitting.
//!
//! Constraints are removed by a smooth change of variables: `ω = exp(r₀)`,
//! the persistence group (`α, β` or `α, λ/2, β`) is a softmax against an
//! implicit slack component so it always sums below one, and the FIGARCH
//! box parameters are logistic. The transformed objective is then minimized
//! with Nelder–Mead. FIGARCH points with a negative lag weight evaluate to
//! `+∞` and are rejected by the simplex.

use super::optim::{nelder_mead, NelderMeadConfig};
use super::{filter_series, sample_variance, FigarchParams, Garch11Params, GjrParams, ModelParams, VarianceInit};
use crate::autodiff::sigmoid;
use crate::error::{Error, Result};
use crate::losses::{series_loss, LossKind};

/// Shortest series accepted by [`fit_mle`].
pub const MIN_FIT_LEN: usize = 30;

const FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleConfig {
    pub optimizer: NelderMeadConfig,
    pub init_variance: VarianceInit,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            optimizer: NelderMeadConfig::default(),
            init_variance: VarianceInit::SampleVariance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub iterations: usize,
    pub evaluations: usize,
    /// Summed loss at the starting parameters.
    pub initial_loss: f64,
    /// Summed loss at the returned parameters.
    pub final_loss: f64,
    pub converged: bool,
    pub n_obs: usize,
}

fn softmax_with_slack(raw: &[f64]) -> Vec<f64> {
    let m = raw.iter().copied().fold(0.0f64, f64::max);
    let exps: Vec<f64> = raw.iter().map(|r| (r - m).exp()).collect();
    let denom = exps.iter().sum::<f64>() + (-m).exp();
    exps.iter().map(|e| e / denom).collect()
}

fn inverse_softmax_with_slack(shares: &[f64]) -> Vec<f64> {
    let shares: Vec<f64> = shares.iter().map(|s| s.max(FLOOR)).collect();
    let slack = (1.0 - shares.iter().sum::<f64>()).max(FLOOR);
    shares.iter().map(|s| (s / slack).ln()).collect()
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(FLOOR, 1.0 - FLOOR);
    (p / (1.0 - p)).ln()
}

/// Unconstrained coordinates of a parameter set.
pub fn to_unconstrained(p: &ModelParams) -> Vec<f64> {
    match *p {
        ModelParams::Garch11(g) => {
            let mut v = vec![g.omega.ln()];
            v.extend(inverse_softmax_with_slack(&[g.alpha, g.beta]));
            v
        }
        ModelParams::Gjr(g) => {
            let mut v = vec![g.omega.ln()];
            v.extend(inverse_softmax_with_slack(&[g.alpha, g.lambda / 2.0, g.beta]));
            v
        }
        ModelParams::Figarch(f) => vec![f.omega.ln(), logit(f.beta), logit(f.phi), logit(f.d)],
    }
}

/// Maps unconstrained coordinates back; `template` fixes the model kind and
/// FIGARCH settings. Fails only where the FIGARCH weights go negative.
pub fn from_unconstrained(template: &ModelParams, raw: &[f64]) -> Result<ModelParams> {
    let omega = raw[0].exp();
    let p = match template {
        ModelParams::Garch11(_) => {
            let s = softmax_with_slack(&raw[1..3]);
            ModelParams::Garch11(Garch11Params {
                omega,
                alpha: s[0],
                beta: s[1],
            })
        }
        ModelParams::Gjr(_) => {
            let s = softmax_with_slack(&raw[1..4]);
            ModelParams::Gjr(GjrParams {
                omega,
                alpha: s[0],
                lambda: 2.0 * s[1],
                beta: s[2],
            })
        }
        ModelParams::Figarch(t) => ModelParams::Figarch(FigarchParams {
            omega,
            beta: sigmoid(raw[1]),
            phi: sigmoid(raw[2]),
            d: sigmoid(raw[3]),
            ..*t
        }),
    };
    p.validate()?;
    Ok(p)
}

fn total_loss(p: &ModelParams, eps: &[f64], loss: LossKind, init: VarianceInit) -> Result<f64> {
    let trace = filter_series(p, eps, init)?;
    let targets: Vec<f64> = eps.iter().map(|e| e * e).collect();
    series_loss(loss, &targets, &trace.sigma_sq)
}

/// Minimizes the summed loss of `eps` under the recursion of `init`'s model
/// kind, starting from `init`.
pub fn fit_mle(
    init: &ModelParams,
    eps: &[f64],
    loss: LossKind,
    cfg: &MleConfig,
) -> Result<(ModelParams, FitReport)> {
    if eps.len() < MIN_FIT_LEN {
        return Err(Error::data(format!(
            "need at least {MIN_FIT_LEN} observations to fit, got {}",
            eps.len()
        )));
    }
    loss.validate()?;
    init.validate()?;
    let init_var = VarianceInit::Fixed(cfg.init_variance.resolve(eps));
    let initial_loss = total_loss(init, eps, loss, init_var)?;
    let n = eps.len() as f64;

    let x0 = to_unconstrained(init);
    // The round trip through the change of variables can move the start by
    // an ulp; keep whichever of the two is better.
    let objective = |x: &[f64]| -> f64 {
        match from_unconstrained(init, x) {
            Ok(p) => total_loss(&p, eps, loss, init_var)
                .map(|v| v / n)
                .unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    };
    let m = nelder_mead(objective, &x0, &cfg.optimizer);

    let (params, final_loss) = match from_unconstrained(init, &m.x) {
        Ok(p) => {
            let l = total_loss(&p, eps, loss, init_var)?;
            if l <= initial_loss {
                (p, l)
            } else {
                (*init, initial_loss)
            }
        }
        Err(_) => (*init, initial_loss),
    };
    Ok((
        params,
        FitReport {
            iterations: m.iterations,
            evaluations: m.evals,
            initial_loss,
            final_loss,
            converged: m.converged,
            n_obs: eps.len(),
        },
    ))
}

/// [`fit_mle`] from [`ModelParams::default_init`].
pub fn fit_default(
    kind: super::ModelKind,
    eps: &[f64],
    loss: LossKind,
) -> Result<(ModelParams, FitReport)> {
    let init = ModelParams::default_init(kind, sample_variance(eps));
    fit_mle(&init, eps, loss, &MleConfig::default())
}

#[cfg(test)]
mod tests {
    use super::super::{simulate, Innovation, ModelKind};
    use super::*;

    #[test]
    fn change_of_variables_roundtrip() {
        let sets = [
            ModelParams::Garch11(Garch11Params::new(0.3, 0.2, 0.7).unwrap()),
            ModelParams::Gjr(GjrParams::new(0.3, 0.1, 0.2, 0.6).unwrap()),
            ModelParams::Figarch(FigarchParams::new(0.3, 0.4, 0.2, 0.45, 32).unwrap()),
        ];
        for p in sets {
            let back = from_unconstrained(&p, &to_unconstrained(&p)).unwrap();
            for (a, b) in p.values().iter().zip(back.values()) {
                assert!((a - b).abs() < 1e-12, "{p:?} vs {back:?}");
            }
        }
    }

    #[test]
    fn rejects_short_series() {
        let init = ModelParams::default_init(ModelKind::Garch11, 1.0);
        let err = fit_mle(&init, &[0.1; 29], LossKind::NLoss, &MleConfig::default());
        assert!(err.is_err());
    }

    #[test]
    fn recovers_garch11() {
        let truth = Garch11Params::new(0.1, 0.2, 0.7).unwrap();
        let sim = simulate(&ModelParams::Garch11(truth), 5000, 42, Innovation::Normal).unwrap();
        let (p, rep) = fit_default(ModelKind::Garch11, sim.returns.values(), LossKind::NLoss).unwrap();
        assert!(rep.final_loss <= rep.initial_loss);
        for (a, b) in p.values().iter().zip(ModelParams::Garch11(truth).values()) {
            assert!((a - b).powi(2) < 0.05, "{p:?}");
        }
    }

    #[test]
    fn iid_data_has_no_persistence() {
        let truth = Garch11Params::new(2.0, 0.0, 0.0).unwrap();
        let sim = simulate(&ModelParams::Garch11(truth), 5000, 5, Innovation::Normal).unwrap();
        let (p, _) = fit_default(ModelKind::Garch11, sim.returns.values(), LossKind::NLoss).unwrap();
        // With σ²_0 at the sample variance, every (ω, β) with ω = (1 − β)·σ²_0
        // yields the same flat trace, so only α and the fitted level are
        // identified.
        assert!(p.values()[1] < 0.05, "{p:?}");
        let tr = filter_series(&p, sim.returns.values(), VarianceInit::SampleVariance).unwrap();
        assert!(tr.sigma_sq.iter().all(|s| (s - 2.0).abs() < 0.3), "{p:?}");
    }

    #[test]
    fn fixed_point_on_constant_series() {
        let eps = vec![1.5; 60];
        // σ² stays at 2.25 = sample variance when ω + (α+β)·2.25 = 2.25.
        let init = ModelParams::Garch11(Garch11Params::new(0.225, 0.1, 0.8).unwrap());
        let cfg = MleConfig::default();
        let (p, rep) = fit_mle(&init, &eps, LossKind::NLoss, &cfg).unwrap();
        assert!((rep.final_loss - rep.initial_loss).abs() < 1e-9);
        let tr = filter_series(&p, &eps, VarianceInit::SampleVariance).unwrap();
        assert!(tr.sigma_sq.iter().all(|s| (s - 2.25).abs() < 1e-6));
    }
}
