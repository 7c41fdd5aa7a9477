//! Direct multi-horizon forecasting with the GARCH-LSTM cell against its
//! GJR kernel trained alone, on simulated GJR data with Student-t shocks.
//! Errors are measured on 5-day realized volatility.
//!
//! cargo run --release --example garch_lstm_forecast -- [n] [seed]

use garchnn::eval::{evaluate, horizon_label, MetricScale};
use garchnn::forecast::{Aggregation, Forecaster};
use garchnn::garch::{simulate, GjrParams, Innovation, ModelKind, ModelParams};
use garchnn::losses::LossKind;
use garchnn::nn::NnModel;
use garchnn::timeseries::{build_return_dataset, realized_volatility, split};
use garchnn::training::{initial_variance, train, BatchRegime, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);
    let k = 5;
    let truth = ModelParams::Gjr(GjrParams::new(0.05, 0.04, 0.12, 0.86).unwrap());
    let sim = simulate(&truth, n, seed, Innovation::StudentT { dof: 5.0 }).unwrap();
    let vol = realized_volatility(&sim.returns, k).unwrap();

    println!("{:<4} {:>14} {:>14} {:>8}", "h", "counterpart", "garch-lstm", "w");
    for h in [1, 5, 10] {
        let data = split(&build_return_dataset(&sim.returns, k, h).unwrap(), (8, 1, 1)).unwrap();
        let init = ModelParams::default_init(ModelKind::Gjr, initial_variance(&data.train).unwrap());
        let cfg = TrainConfig {
            loss: LossKind::TLoss { dof: 5.0 },
            horizon: h,
            batch: BatchRegime::Minibatch(64),
            max_epochs: 300,
            ..TrainConfig::default()
        };
        let mut mae = Vec::new();
        let mut blend = f64::NAN;
        for model in [NnModel::counterpart(&init), NnModel::garch_lstm(&init)] {
            let (m, _) = train(&model, &data, &cfg).unwrap();
            if let NnModel::GarchLstm(g) = &m.model {
                blend = g.blend_weight();
            }
            let fc = Forecaster::Neural(m).forecast(&data, h, Aggregation::RealizedWindow(k)).unwrap();
            mae.push(evaluate(&fc, &vol, MetricScale::Volatility).unwrap().mae);
        }
        println!("{:<4} {:>14.5} {:>14.5} {:>8.4}", horizon_label(h), mae[0], mae[1], blend);
    }
}
