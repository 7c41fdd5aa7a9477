//! Loss ablation on heavy-tailed data: a counterpart trained with the
//! Student-t likelihood on returns against one trained with MSE directly on
//! realized volatility. Reports test MAE/MSE per seed.
//!
//! Pass `same` as third argument to train the MSE model on squared returns
//! too, so both share the realized-window aggregation.
//!
//! cargo run --release --example loss_ablation -- [seeds] [n] [same]

use garchnn::eval::{evaluate, MetricScale};
use garchnn::forecast::{Aggregation, Forecaster};
use garchnn::garch::{simulate, Garch11Params, Innovation, ModelKind, ModelParams};
use garchnn::losses::LossKind;
use garchnn::nn::NnModel;
use garchnn::timeseries::{build_dataset, build_return_dataset, realized_volatility, split};
use garchnn::training::{initial_variance, train, BatchRegime, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let same = args.get(3).is_some_and(|a| a == "same");
    let k = 5;
    let truth = ModelParams::Garch11(Garch11Params::new(0.1, 0.1, 0.85).unwrap());
    let mut wins = 0;
    println!("seed  t_mae     mse_mae   t_mse     mse_mse");
    for seed in 0..seeds {
        let sim = simulate(&truth, n, seed, Innovation::StudentT { dof: 5.0 }).unwrap();
        let vol = realized_volatility(&sim.returns, k).unwrap();
        let mut mae = [0.0; 2];
        let mut mse = [0.0; 2];
        for (i, loss) in [LossKind::TLoss { dof: 5.0 }, LossKind::Mse].into_iter().enumerate() {
            let on_returns = loss.is_likelihood() || same;
            let ds = if on_returns {
                build_return_dataset(&sim.returns, k, 1).unwrap()
            } else {
                build_dataset(&sim.returns, &vol, k, 1).unwrap()
            };
            let data = split(&ds, (8, 1, 1)).unwrap();
            let s0 = initial_variance(&data.train).unwrap();
            let init = ModelParams::default_init(ModelKind::Garch11, s0);
            let cfg = TrainConfig {
                loss,
                max_epochs: 2000,
                batch: BatchRegime::Minibatch(64),
                ..TrainConfig::default()
            };
            let (m, _) = train(&NnModel::counterpart(&init), &data, &cfg).unwrap();
            let agg = if on_returns {
                Aggregation::RealizedWindow(k)
            } else {
                Aggregation::Daily
            };
            let fc = Forecaster::Neural(m).forecast(&data, 1, agg).unwrap();
            let met = evaluate(&fc, &vol, MetricScale::Volatility).unwrap();
            mae[i] = met.mae;
            mse[i] = met.mse;
        }
        if mae[0] <= mae[1] {
            wins += 1;
        }
        println!("{seed:<5} {:<9.5} {:<9.5} {:<9.5} {:<9.5}", mae[0], mae[1], mse[0], mse[1]);
    }
    println!("t-loss MAE <= mse-loss MAE in {wins}/{seeds} seeds");
}
