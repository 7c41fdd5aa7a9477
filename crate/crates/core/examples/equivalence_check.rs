//! A GARCH model and its neural counterpart are the same recursion. This
//! runs both on one series at identical parameters (the traces agree bit
//! for bit), then fits each from data and compares the estimates and the
//! test forecasts.
//!
//! cargo run --release --example equivalence_check -- [garch11|gjr|figarch]

use garchnn::eval::error_metrics;
use garchnn::forecast::{Aggregation, Forecaster};
use garchnn::garch::mle::{fit_mle, MleConfig};
use garchnn::garch::{filter_series, sample_variance, simulate, Innovation, ModelKind, ModelParams, VarianceInit};
use garchnn::losses::LossKind;
use garchnn::nn::{KernelParams, NnModel, Prepared};
use garchnn::timeseries::{build_return_dataset, split};
use garchnn::training::{train_grid, BatchRegime, TrainConfig};

fn main() {
    let kind = ModelKind::parse(&std::env::args().nth(1).unwrap_or_else(|| "gjr".into())).unwrap();
    let truth = match kind {
        ModelKind::Garch11 => ModelParams::from_values(kind, &[0.2, 0.15, 0.7], None),
        ModelKind::Gjr => ModelParams::from_values(kind, &[0.2, 0.05, 0.15, 0.7], None),
        ModelKind::Figarch => ModelParams::from_values(kind, &[0.2, 0.3, 0.15, 0.4], None),
    }
    .unwrap();
    let sim = simulate(&truth, 4000, 5, Innovation::Normal).unwrap();
    let eps = sim.returns.values();

    let classical = filter_series(&truth, eps, VarianceInit::SampleVariance).unwrap();
    let nn = Prepared::Counterpart(KernelParams::from_model(&truth).unwrap()).filter(eps, classical.sigma_sq[0]);
    let identical = nn.iter().zip(&classical.sigma_sq).all(|(a, b)| a.to_bits() == b.to_bits());
    println!("identical traces over {} steps: {identical}", eps.len());

    let data = split(&build_return_dataset(&sim.returns, 1, 1).unwrap(), (8, 1, 1)).unwrap();
    let (start, train_eps) = data.train.covered_returns().unwrap();
    let s0 = sample_variance(&train_eps);
    let init = ModelParams::default_init(kind, s0);
    let (mle, _) = fit_mle(&init, &train_eps, LossKind::NLoss, &MleConfig::default()).unwrap();
    let cfg = TrainConfig {
        loss: LossKind::NLoss,
        max_epochs: 2000,
        batch: BatchRegime::Minibatch(64),
        ..TrainConfig::default()
    };
    let (m, hist, _) = train_grid(&NnModel::counterpart(&init), &data, &cfg).unwrap();
    let counterpart = m.as_stochastic().unwrap();
    println!("{:<8} {:>8} {:>10} {:>12}", "param", "truth", "classical", "counterpart");
    for (i, name) in kind.param_names().iter().enumerate() {
        println!(
            "{name:<8} {:>8.4} {:>10.4} {:>12.4}",
            truth.values()[i],
            mle.values()[i],
            counterpart.values()[i]
        );
    }
    println!("counterpart trained {} epochs", hist.epochs.len());

    let a = Forecaster::Stochastic {
        params: mle,
        init_variance: s0,
        stream_start: start,
    }
    .forecast(&data, 1, Aggregation::Daily)
    .unwrap();
    let b = Forecaster::Neural(m).forecast(&data, 1, Aggregation::Daily).unwrap();
    let sa: Vec<f64> = a.sigma_hat_sq.iter().map(|v| v.sqrt()).collect();
    let sb: Vec<f64> = b.sigma_hat_sq.iter().map(|v| v.sqrt()).collect();
    let m = error_metrics(&sa, &sb).unwrap();
    println!("test sigma forecasts, classical vs counterpart: MAE {:.5}, MSE {:.6}", m.mae, m.mse);
}
