//! Simulates a GJR-GARCH series with Student-t shocks, fits it by maximum
//! likelihood under both the normal and the Student-t loss, and prints an
//! iterated 10-day variance forecast from the end of the series.
//!
//! cargo run --release --example simulate_and_fit -- [n] [seed]

use garchnn::garch::mle::{fit_mle, MleConfig};
use garchnn::garch::{
    filter_state, forecast_path, sample_variance, simulate, GjrParams, Innovation, ModelKind, ModelParams,
    VarianceInit,
};
use garchnn::losses::LossKind;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);

    let truth = ModelParams::Gjr(GjrParams::new(0.05, 0.05, 0.1, 0.85).unwrap());
    let sim = simulate(&truth, n, seed, Innovation::StudentT { dof: 5.0 }).unwrap();
    let eps = sim.returns.values();
    println!("truth            {:?}", truth.values());

    let init = ModelParams::default_init(ModelKind::Gjr, sample_variance(eps));
    for loss in [LossKind::NLoss, LossKind::TLoss { dof: 5.0 }] {
        let (p, rep) = fit_mle(&init, eps, loss, &MleConfig::default()).unwrap();
        let v: Vec<String> = p.values().iter().map(|x| format!("{x:.4}")).collect();
        println!(
            "{:<6} loss fit   [{}]  loss {:.2} -> {:.2} in {} iterations",
            loss.to_string(),
            v.join(", "),
            rep.initial_loss,
            rep.final_loss,
            rep.iterations
        );
        if matches!(loss, LossKind::TLoss { .. }) {
            let state = filter_state(&p, eps, VarianceInit::SampleVariance).unwrap();
            let path = forecast_path(&p, &state, 10).unwrap();
            println!("long-run variance {:.4}", p.unconditional_variance().unwrap());
            for (i, v) in path.iter().enumerate() {
                println!("  t+{:<2} sigma^2 {v:.4}", i + 1);
            }
        }
    }
}
