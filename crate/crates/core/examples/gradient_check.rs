//! Reverse-mode gradients of the T-loss through a 20-step GARCH-LSTM
//! unroll, compared coordinate by coordinate with central differences.
//!
//! cargo run --release --example gradient_check

use garchnn::autodiff::{Real, Tape};
use garchnn::garch::{GjrParams, ModelParams};
use garchnn::losses::{step_loss, LossKind};
use garchnn::nn::{NnModel, GATE_NAMES};

fn loss<T: Real>(model: &NnModel, raw: &[T], eps: &[f64]) -> T {
    let trace = model.prepare(raw).unwrap().filter(eps, raw[0].lift(1.0));
    let mut total = raw[0].lift(0.0);
    for (e, s) in eps.iter().zip(trace) {
        total = total + step_loss(LossKind::TLoss { dof: 5.0 }, e * e, s).unwrap();
    }
    total
}

fn main() {
    let kernel = ModelParams::Gjr(GjrParams::new(0.1, 0.05, 0.1, 0.8).unwrap());
    let mut model = NnModel::garch_lstm(&kernel);
    let mut raw = model.raw();
    for (i, r) in raw.iter_mut().enumerate().skip(4) {
        *r = ((i * 37 % 11) as f64 - 5.0) / 10.0;
    }
    model.set_raw(&raw);
    let eps: Vec<f64> = (0..20).map(|i| ((i as f64) * 2.3).sin() * 1.4).collect();

    let tape = Tape::new();
    let vars = tape.vars(&raw);
    let l = loss(&model, &vars, &eps);
    let ad = l.backward().wrt(&vars);
    println!("loss {:.6} on a tape of {} nodes", l.value(), tape.len());

    let mut names: Vec<String> = ["omega", "alpha", "lambda", "beta"].iter().map(|s| format!("raw {s}")).collect();
    names.extend(GATE_NAMES.iter().map(|s| s.to_string()));
    names.push("raw w".into());
    println!("{:<12} {:>14} {:>14} {:>10}", "coordinate", "reverse-mode", "central diff", "rel err");
    for i in 0..raw.len() {
        let h = 1e-5;
        let (mut up, mut dn) = (raw.clone(), raw.clone());
        up[i] += h;
        dn[i] -= h;
        let fd = (loss(&model, &up, &eps) - loss(&model, &dn, &eps)) / (2.0 * h);
        let rel = (ad[i] - fd).abs() / ad[i].abs().max(fd.abs()).max(1e-12);
        println!("{:<12} {:>14.8} {:>14.8} {:>10.1e}", names[i], ad[i], fd, rel);
    }
}
