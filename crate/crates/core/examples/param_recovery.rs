//! Simulates GARCH-family series from known parameters and estimates them
//! twice: by classical maximum likelihood and by training the neural
//! counterpart with ADAM over the learning-rate grid. Both fitters see the
//! same training part. Prints per-seed estimates and per-parameter MSE.
//!
//! cargo run --release --example param_recovery -- [garch11|gjr|figarch] [seeds] [n]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use garchnn::garch::mle::{fit_mle, MleConfig};
use garchnn::garch::{sample_variance, simulate, Innovation, ModelKind, ModelParams};
use garchnn::losses::LossKind;
use garchnn::nn::NnModel;
use garchnn::timeseries::{build_return_dataset, split};
use garchnn::training::{train_grid, BatchRegime, TrainConfig};

/// Ground truth in (0.1, 0.9) with persistence kept below 0.9.
fn truth(kind: ModelKind, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let omega = rng.random_range(0.1..0.9);
    let v = match kind {
        ModelKind::Garch11 => {
            let a = rng.random_range(0.1..0.3);
            vec![omega, a, rng.random_range(0.1..0.88 - a)]
        }
        ModelKind::Gjr => {
            let a = rng.random_range(0.1..0.2);
            let l = rng.random_range(0.1..0.2);
            vec![omega, a, l, rng.random_range(0.1..0.88 - a - l / 2.0)]
        }
        ModelKind::Figarch => vec![omega, 0.3, 0.15, 0.4],
    };
    ModelParams::from_values(kind, &v, None).unwrap()
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let kind = ModelKind::parse(args.get(1).map(String::as_str).unwrap_or("garch11")).unwrap();
    let seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(8);
    let n: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let names = kind.param_names();
    let mut se = vec![[0.0; 2]; names.len()];
    for seed in 0..seeds {
        let p = truth(kind, seed);
        let sim = simulate(&p, n, seed, Innovation::Normal).unwrap();
        let data = split(&build_return_dataset(&sim.returns, 1, 1).unwrap(), (8, 1, 1)).unwrap();
        let (_, eps) = data.train.covered_returns().unwrap();
        let init = ModelParams::default_init(kind, sample_variance(&eps));

        let (mle, _) = fit_mle(&init, &eps, LossKind::NLoss, &MleConfig::default()).unwrap();
        let cfg = TrainConfig {
            loss: LossKind::NLoss,
            max_epochs: 2000,
            batch: BatchRegime::Minibatch(64),
            ..TrainConfig::default()
        };
        let (m, hist, scores) = train_grid(&NnModel::counterpart(&init), &data, &cfg).unwrap();
        let nn = m.as_stochastic().unwrap();
        let chosen = scores.iter().find(|s| s.1 == hist.best_val_loss).map_or(f64::NAN, |s| s.0);
        println!("seed {seed}  truth {}", fmt(&p.values()));
        println!("        mle   {}", fmt(&mle.values()));
        println!(
            "        nn    {}  (lr {chosen:.0e}, {} epochs, {})",
            fmt(&nn.values()),
            hist.epochs.len(),
            hist.stop.as_str()
        );
        for (i, t) in p.values().iter().enumerate() {
            se[i][0] += (mle.values()[i] - t).powi(2) / seeds as f64;
            se[i][1] += (nn.values()[i] - t).powi(2) / seeds as f64;
        }
    }
    println!("{:<8} {:>10} {:>10}", "param", "mle_mse", "nn_mse");
    for (n, s) in names.iter().zip(&se) {
        println!("{n:<8} {:>10.5} {:>10.5}", s[0], s[1]);
    }
}
