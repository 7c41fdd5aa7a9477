//! One-day 5% VaR backtest: fits GARCH(1,1) on the training part of a
//! simulated series, forecasts the test part one day ahead and counts
//! returns outside ±1.65·σ̂.
//!
//! cargo run --release --example var_backtest -- [n] [seed]

use garchnn::eval::{var_limits, var_violations, VAR_MULTIPLIER};
use garchnn::forecast::{Aggregation, Forecaster};
use garchnn::garch::mle::{fit_mle, MleConfig};
use garchnn::garch::{sample_variance, simulate, Garch11Params, Innovation, ModelKind, ModelParams};
use garchnn::losses::LossKind;
use garchnn::timeseries::{build_return_dataset, split};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let truth = ModelParams::Garch11(Garch11Params::new(0.1, 0.1, 0.85).unwrap());
    let sim = simulate(&truth, n, seed, Innovation::Normal).unwrap();
    let data = split(&build_return_dataset(&sim.returns, 1, 1).unwrap(), (8, 1, 1)).unwrap();
    let (start, eps) = data.train.covered_returns().unwrap();
    let s0 = sample_variance(&eps);
    let init = ModelParams::default_init(ModelKind::Garch11, s0);
    let (p, _) = fit_mle(&init, &eps, LossKind::NLoss, &MleConfig::default()).unwrap();

    let fc = Forecaster::Stochastic {
        params: p,
        init_variance: s0,
        stream_start: start,
    }
    .forecast(&data, 1, Aggregation::Daily)
    .unwrap();
    let sigma: Vec<f64> = fc.sigma_hat_sq.iter().map(|v| v.sqrt()).collect();
    let realized: Vec<f64> = fc.anchors.iter().map(|a| sim.returns.values()[a + 1]).collect();
    let (upper, lower) = var_limits(&sigma, VAR_MULTIPLIER);
    let rep = var_violations(&realized, &upper, &lower, VAR_MULTIPLIER).unwrap();
    println!("test days        {}", rep.n);
    println!("upper violations {} ({:.2}%)", rep.upper_count, 100.0 * rep.upper_rate);
    println!("lower violations {} ({:.2}%)", rep.lower_count, 100.0 * rep.lower_rate);
    println!("two-sided rate   {:.2}% (normal reference 9.89%)", 100.0 * rep.total_rate);
}
