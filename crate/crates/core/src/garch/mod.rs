//! Stochastic GARCH-family recursions: one-step updates, series filtering,
//! simulation, iterated forecasts and maximum-likelihood fitting.
//!
//! Conventions shared by every model here:
//!
//! * the conditional mean is zero, so the shock `ε_t` is the return itself;
//! * `trace[0]` is the initial variance and `trace[t]` is the variance of
//!   `ε_t` given everything up to `t − 1`;
//! * FIGARCH sees a zero-padded `ε²` window before enough history exists.

mod figarch;
pub mod mle;
pub mod optim;
mod params;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

pub use figarch::{
    figarch_step, figarch_weights, figarch_weights_unchecked, fractional_difference_coeffs,
};
pub use params::{
    FigarchParams, Garch11Params, GjrParams, Intercept, ModelKind, ModelParams, DEFAULT_TRUNCATION,
};

use crate::error::{Error, Result};
use crate::timeseries::ReturnSeries;

/// `ω + α·ε²_{t−1} + β·σ²_{t−1}`.
pub fn garch11_step(p: &Garch11Params, eps_prev_sq: f64, sigma_prev_sq: f64) -> f64 {
    p.omega + p.alpha * eps_prev_sq + p.beta * sigma_prev_sq
}

/// `ω + α·ε² + λ·I(ε < 0)·ε² + β·σ²_{t−1}` for the lagged shock `ε`.
pub fn gjr_step(p: &GjrParams, eps_prev: f64, sigma_prev_sq: f64) -> f64 {
    let e2 = eps_prev * eps_prev;
    let neg = if eps_prev < 0.0 { 1.0 } else { 0.0 };
    p.omega + p.alpha * e2 + p.lambda * (neg * e2) + p.beta * sigma_prev_sq
}

/// Mean of `ε²`: the sample variance around the zero conditional mean.
pub fn sample_variance(eps: &[f64]) -> f64 {
    if eps.is_empty() {
        return 0.0;
    }
    eps.iter().map(|e| e * e).sum::<f64>() / eps.len() as f64
}

/// Starting value `σ²_0` for a filtered trace.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum VarianceInit {
    /// Mean of `ε²` over the series being filtered.
    #[default]
    SampleVariance,
    Fixed(f64),
}

impl VarianceInit {
    pub fn resolve(self, eps: &[f64]) -> f64 {
        match self {
            VarianceInit::SampleVariance => sample_variance(eps),
            VarianceInit::Fixed(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTrace {
    pub sigma_sq: Vec<f64>,
}

impl VarianceTrace {
    pub fn len(&self) -> usize {
        self.sigma_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_sq.is_empty()
    }
}

/// Rolling state of a stochastic model after consuming some shocks.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    /// Variance for the next, not yet observed, shock.
    pub next_sigma_sq: f64,
    /// `ε²` history, oldest first, at most `T − 1` long (FIGARCH only).
    pub eps_sq_history: Vec<f64>,
}

/// Applies the model recursion over `eps`, returning `σ²_0..σ²_{n−1}`.
pub fn filter_series(model: &ModelParams, eps: &[f64], init: VarianceInit) -> Result<VarianceTrace> {
    if eps.is_empty() {
        return Err(Error::data("cannot filter an empty series"));
    }
    model.validate()?;
    let s0 = init.resolve(eps);
    if !(s0.is_finite() && s0 > 0.0) && model.kind() != ModelKind::Figarch {
        return Err(Error::numerical(0, format!("initial variance {s0} is not positive")));
    }
    let n = eps.len();
    let mut out = Vec::with_capacity(n);
    match model {
        ModelParams::Garch11(p) => {
            let mut s = s0;
            out.push(s);
            for t in 1..n {
                s = garch11_step(p, eps[t - 1] * eps[t - 1], s);
                out.push(s);
            }
        }
        ModelParams::Gjr(p) => {
            let mut s = s0;
            out.push(s);
            for t in 1..n {
                s = gjr_step(p, eps[t - 1], s);
                out.push(s);
            }
        }
        ModelParams::Figarch(p) => {
            let lambda = p.weights()?;
            let big_t = lambda.len();
            let omega = p.effective_omega();
            let mut window = vec![0.0; big_t];
            for t in 0..n {
                // window holds ε²_{t−T+1..t}
                window.rotate_left(1);
                window[big_t - 1] = eps[t] * eps[t];
                out.push(figarch_step(omega, &window, &lambda)?);
            }
        }
    }
    if let Some(i) = out.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::numerical(i, format!("conditional variance {}", out[i])));
    }
    Ok(VarianceTrace { sigma_sq: out })
}

/// State after filtering all of `eps`: the variance forecast for the next
/// shock plus FIGARCH lag history.
pub fn filter_state(model: &ModelParams, eps: &[f64], init: VarianceInit) -> Result<FilterState> {
    let trace = filter_series(model, eps, init)?;
    let n = eps.len();
    let last_sq = eps[n - 1] * eps[n - 1];
    let last_var = trace.sigma_sq[n - 1];
    Ok(match model {
        ModelParams::Garch11(p) => FilterState {
            next_sigma_sq: garch11_step(p, last_sq, last_var),
            eps_sq_history: Vec::new(),
        },
        ModelParams::Gjr(p) => FilterState {
            next_sigma_sq: gjr_step(p, eps[n - 1], last_var),
            eps_sq_history: Vec::new(),
        },
        ModelParams::Figarch(p) => {
            let keep = p.truncation - 1;
            let start = n.saturating_sub(keep);
            let mut hist = vec![0.0; keep - (n - start)];
            hist.extend(eps[start..].iter().map(|e| e * e));
            let mut window = hist.clone();
            window.push(0.0);
            FilterState {
                next_sigma_sq: figarch_step(p.effective_omega(), &window, &p.weights()?)?,
                eps_sq_history: hist,
            }
        }
    })
}

/// Iterated multi-step forecast from a filter state: `σ²_{t+1..t+h}` with
/// future `ε²` replaced by its conditional expectation `σ²`.
pub fn forecast_path(model: &ModelParams, state: &FilterState, h: usize) -> Result<Vec<f64>> {
    if h == 0 {
        return Err(Error::data("horizon must be at least 1"));
    }
    let mut path = Vec::with_capacity(h);
    path.push(state.next_sigma_sq);
    match model {
        ModelParams::Garch11(p) => {
            for _ in 1..h {
                let prev = *path.last().expect("non-empty");
                path.push(garch11_step(p, prev, prev));
            }
        }
        ModelParams::Gjr(p) => {
            // E[I(ε<0)ε²] = σ²/2 under symmetric innovations.
            for _ in 1..h {
                let prev = *path.last().expect("non-empty");
                path.push(p.omega + p.persistence() * prev);
            }
        }
        ModelParams::Figarch(p) => {
            let lambda = p.weights()?;
            let mut hist = state.eps_sq_history.clone();
            for _ in 1..h {
                hist.push(*path.last().expect("non-empty"));
                let keep = p.truncation - 1;
                if hist.len() > keep {
                    hist.drain(..hist.len() - keep);
                }
                let mut window = hist.clone();
                window.push(0.0);
                path.push(figarch_step(p.effective_omega(), &window, &lambda)?);
            }
        }
    }
    Ok(path)
}

/// Innovation distribution for simulation, normalized to unit variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Innovation {
    Normal,
    /// Student-t scaled by `√((v − 2)/v)`.
    StudentT { dof: f64 },
}

impl Innovation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Innovation::StudentT { dof } if !(dof > 2.0) => Err(Error::params(format!(
                "student-t innovations need dof > 2, got {dof}"
            ))),
            _ => Ok(()),
        }
    }

    fn sampler(&self) -> Result<Box<dyn FnMut(&mut ChaCha8Rng) -> f64>> {
        self.validate()?;
        Ok(match *self {
            Innovation::Normal => Box::new(|rng| StandardNormal.sample(rng)),
            Innovation::StudentT { dof } => {
                let dist = StudentT::new(dof).map_err(|e| Error::params(e.to_string()))?;
                let scale = ((dof - 2.0) / dof).sqrt();
                Box::new(move |rng| dist.sample(rng) * scale)
            }
        })
    }
}

/// Number of discarded warm-up steps before the returned sample.
pub const SIM_BURN_IN: usize = 500;

/// A simulated path and the conditional variances that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub returns: ReturnSeries,
    pub sigma_sq: Vec<f64>,
}

/// Draws `n` shocks `ε_t = z_t·σ_t`, deterministic in `seed`. The recursion
/// starts at the unconditional variance and runs [`SIM_BURN_IN`] steps before
/// recording.
pub fn simulate(model: &ModelParams, n: usize, seed: u64, dist: Innovation) -> Result<Simulation> {
    if n == 0 {
        return Err(Error::data("simulation length must be at least 1"));
    }
    model.validate()?;
    let mut draw = dist.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = n + SIM_BURN_IN;
    let mut eps = Vec::with_capacity(total);
    let mut var = Vec::with_capacity(total);
    match model {
        ModelParams::Garch11(p) => {
            let mut s = model.unconditional_variance()?;
            for t in 0..total {
                if t > 0 {
                    let e: f64 = eps[t - 1];
                    s = garch11_step(p, e * e, s);
                }
                var.push(s);
                eps.push(draw(&mut rng) * s.sqrt());
            }
        }
        ModelParams::Gjr(p) => {
            let mut s = model.unconditional_variance()?;
            for t in 0..total {
                if t > 0 {
                    s = gjr_step(p, eps[t - 1], s);
                }
                var.push(s);
                eps.push(draw(&mut rng) * s.sqrt());
            }
        }
        ModelParams::Figarch(p) => {
            let lambda = p.weights()?;
            let big_t = lambda.len();
            let omega = p.effective_omega();
            let mut window = vec![0.0; big_t];
            for _ in 0..total {
                // The newest slot is unknown when σ²_t is formed; λ_0 = 0.
                window.rotate_left(1);
                window[big_t - 1] = 0.0;
                let s = figarch_step(omega, &window, &lambda)?;
                let e = draw(&mut rng) * s.sqrt();
                window[big_t - 1] = e * e;
                var.push(s);
                eps.push(e);
            }
        }
    }
    let eps = eps.split_off(SIM_BURN_IN);
    let sigma_sq = var.split_off(SIM_BURN_IN);
    if let Some(i) = eps.iter().position(|e| !e.is_finite()) {
        return Err(Error::numerical(i, "non-finite simulated shock"));
    }
    Ok(Simulation {
        returns: ReturnSeries::from_values(eps)?,
        sigma_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g11(o: f64, a: f64, b: f64) -> Garch11Params {
        Garch11Params::new(o, a, b).unwrap()
    }

    #[test]
    fn garch11_step_examples() {
        assert!((garch11_step(&g11(0.1, 0.2, 0.7), 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(garch11_step(&g11(0.1, 0.0, 0.0), 123.0, 45.0), 0.1);
        assert!((garch11_step(&g11(0.05, 0.1, 0.85), 4.0, 2.0) - 2.15).abs() < 1e-15);
    }

    #[test]
    fn gjr_step_examples() {
        let p = GjrParams::new(0.1, 0.1, 0.2, 0.5).unwrap();
        assert!((gjr_step(&p, 1.0, 1.0) - 0.7).abs() < 1e-15);
        assert!((gjr_step(&p, -1.0, 1.0) - 0.9).abs() < 1e-15);
        assert_eq!(gjr_step(&p, 0.0, 2.0), 0.1 + 0.5 * 2.0);
        let sym = GjrParams::new(0.1, 0.2, 0.0, 0.7).unwrap();
        let g = g11(0.1, 0.2, 0.7);
        for (e, s) in [(-1.3, 0.4), (2.0, 1.0), (0.0, 3.0)] {
            assert_eq!(gjr_step(&sym, e, s), garch11_step(&g, e * e, s));
        }
    }

    #[test]
    fn filter_degenerate_is_constant() {
        let m = ModelParams::Garch11(g11(0.1, 0.0, 0.0));
        let tr = filter_series(&m, &[1.0, -2.0, 0.5, 3.0], VarianceInit::Fixed(7.0)).unwrap();
        assert_eq!(tr.sigma_sq, vec![7.0, 0.1, 0.1, 0.1]);
    }

    #[test]
    fn filter_zero_shocks_closed_form() {
        let p = g11(0.2, 0.1, 0.8);
        let s = 3.0;
        let tr = filter_series(&ModelParams::Garch11(p), &[0.0; 60], VarianceInit::Fixed(s)).unwrap();
        for (t, &v) in tr.sigma_sq.iter().enumerate() {
            let bt = p.beta.powi(t as i32);
            let closed = p.omega * (1.0 - bt) / (1.0 - p.beta) + bt * s;
            assert!(((v - closed) / closed).abs() < 1e-10);
        }
    }

    #[test]
    fn filter_rejects_empty() {
        let m = ModelParams::Garch11(g11(0.1, 0.2, 0.7));
        assert!(filter_series(&m, &[], VarianceInit::SampleVariance).is_err());
    }

    #[test]
    fn figarch_filter_left_edge_is_zero_padded() {
        let p = FigarchParams::new(0.2, 0.3, 0.2, 0.4, 8).unwrap();
        let m = ModelParams::Figarch(p);
        let eps = [1.0, 2.0, -1.0];
        let tr = filter_series(&m, &eps, VarianceInit::SampleVariance).unwrap();
        let l = p.weights().unwrap();
        assert_eq!(tr.sigma_sq[0], 0.2);
        assert!((tr.sigma_sq[1] - (0.2 + l[1] * 1.0)).abs() < 1e-15);
        assert!((tr.sigma_sq[2] - (0.2 + l[1] * 4.0 + l[2] * 1.0)).abs() < 1e-15);
    }

    #[test]
    fn simulate_is_deterministic() {
        let m = ModelParams::Garch11(g11(0.1, 0.2, 0.7));
        let a = simulate(&m, 200, 7, Innovation::Normal).unwrap();
        let b = simulate(&m, 200, 7, Innovation::Normal).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, 200, 8, Innovation::Normal).unwrap();
        assert_ne!(a.returns, c.returns);
        assert!(simulate(&m, 0, 7, Innovation::Normal).is_err());
        assert!(simulate(&m, 10, 7, Innovation::StudentT { dof: 2.0 }).is_err());
    }

    #[test]
    fn simulated_variance_matches_unconditional_law() {
        let m = ModelParams::Garch11(g11(0.1, 0.2, 0.7));
        let sim = simulate(&m, 100_000, 11, Innovation::Normal).unwrap();
        let v = sample_variance(sim.returns.values());
        assert!((v - 1.0).abs() < 0.05, "sample variance {v}");
    }

    #[test]
    fn simulated_iid_when_no_dynamics() {
        let m = ModelParams::Garch11(g11(0.4, 0.0, 0.0));
        let sim = simulate(&m, 50_000, 3, Innovation::StudentT { dof: 5.0 }).unwrap();
        assert!(sim.sigma_sq.iter().all(|&s| s == 0.4));
        let v = sample_variance(sim.returns.values());
        assert!((v - 0.4).abs() < 0.03, "sample variance {v}");
    }

    #[test]
    fn forecast_path_closed_form() {
        let p = g11(0.1, 0.15, 0.8);
        let m = ModelParams::Garch11(p);
        let state = FilterState {
            next_sigma_sq: 2.5,
            eps_sq_history: vec![],
        };
        let path = forecast_path(&m, &state, 10).unwrap();
        let ab = p.persistence();
        for (i, &v) in path.iter().enumerate() {
            let h = i + 1;
            let closed: f64 = (0..h.saturating_sub(1)).map(|j| p.omega * ab.powi(j as i32)).sum::<f64>()
                + ab.powi(h as i32 - 1) * 2.5;
            assert!((v - closed).abs() < 1e-12);
        }
        let flat = ModelParams::Garch11(g11(0.3, 0.0, 0.0));
        let st = filter_state(&flat, &[1.0, 2.0], VarianceInit::SampleVariance).unwrap();
        assert!(forecast_path(&flat, &st, 5).unwrap().iter().all(|&v| v == 0.3));
        assert!(forecast_path(&flat, &st, 0).is_err());
    }

    #[test]
    fn filter_state_one_step_matches_trace() {
        let models = [
            ModelParams::Garch11(g11(0.1, 0.2, 0.7)),
            ModelParams::Gjr(GjrParams::new(0.1, 0.1, 0.2, 0.5).unwrap()),
            ModelParams::Figarch(FigarchParams::new(0.2, 0.3, 0.2, 0.4, 8).unwrap()),
        ];
        let eps: Vec<f64> = (0..20).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        for m in models {
            let st = filter_state(&m, &eps[..19], VarianceInit::Fixed(1.0)).unwrap();
            let tr = filter_series(&m, &eps, VarianceInit::Fixed(1.0)).unwrap();
            assert!((st.next_sigma_sq - tr.sigma_sq[19]).abs() < 1e-14, "{m:?}");
        }
    }
}
