//! Acceptance run: one PASS/FAIL line per criterion. Plain binary
//! (`harness = false`) so the lines always print. Failures are reported
//! but only fail the process when `ACCEPTANCE_STRICT=1` is set.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use garchnn::autodiff::{Real, Tape};
use garchnn::cli::main_with_args;
use garchnn::eval::{evaluate, var_limits, var_violations, MetricScale, VAR_MULTIPLIER};
use garchnn::forecast::{Aggregation, Forecaster};
use garchnn::garch::mle::{fit_mle, MleConfig};
use garchnn::garch::{
    figarch_weights, figarch_weights_unchecked, filter_series, sample_variance, simulate, FigarchParams,
    Garch11Params, GjrParams, Innovation, ModelKind, ModelParams, VarianceInit,
};
use garchnn::losses::{n_loss, step_loss, t_loss, LossKind};
use garchnn::nn::{Blend, GarchLstm, KernelParams, NnModel, Prepared};
use garchnn::timeseries::{
    build_dataset, build_return_dataset, load_series, realized_volatility, split, ColumnMap,
};
use garchnn::training::{initial_variance, train, train_grid, BatchRegime, TrainConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_params(kind: ModelKind, rng: &mut ChaCha8Rng) -> ModelParams {
    match kind {
        ModelKind::Garch11 => {
            let a = rng.random_range(0.02..0.3);
            let b = rng.random_range(0.1..0.97 - a);
            ModelParams::Garch11(Garch11Params::new(rng.random_range(0.05..1.0), a, b).unwrap())
        }
        ModelKind::Gjr => {
            let a = rng.random_range(0.02..0.2);
            let l = rng.random_range(0.0..0.2);
            let b = rng.random_range(0.1..0.97 - a - l / 2.0);
            ModelParams::Gjr(GjrParams::new(rng.random_range(0.05..1.0), a, l, b).unwrap())
        }
        ModelKind::Figarch => loop {
            let (b, phi, d) = (
                rng.random_range(0.0..0.8),
                rng.random_range(0.0..0.5),
                rng.random_range(0.05..0.95),
            );
            let t = rng.random_range(8..=64);
            if let Ok(p) = FigarchParams::new(rng.random_range(0.05..1.0), b, phi, d, t) {
                if p.weights().is_ok() {
                    break ModelParams::Figarch(p);
                }
            }
        },
    }
}

fn returns(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| normal(rng) * scale).collect()
}

// 1 ------------------------------------------------------------------------

fn equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for kind in [ModelKind::Garch11, ModelKind::Gjr, ModelKind::Figarch] {
        for _ in 0..5 {
            let p = random_params(kind, &mut rng);
            let eps = returns(1000, 1.0, &mut rng);
            let classical = filter_series(&p, &eps, VarianceInit::SampleVariance).unwrap();
            let s0 = classical.sigma_sq[0];
            let nn = Prepared::Counterpart(KernelParams::from_model(&p).unwrap()).filter(&eps, s0);
            for (a, b) in nn.iter().zip(&classical.sigma_sq) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("max |Δσ²| = {worst:e} over 15 traces of 1000 steps"))
}

// 2 ------------------------------------------------------------------------

/// Ground truth in (0.1, 0.9) with persistence kept below 0.9.
fn recovery_truth(kind: ModelKind, seed: u64) -> ModelParams {
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

fn recovery() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in [ModelKind::Garch11, ModelKind::Gjr, ModelKind::Figarch] {
        let names = kind.param_names();
        let results: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..8u64)
            .map(|seed| {
                let truth = recovery_truth(kind, seed);
                let sim = simulate(&truth, 5000, seed, Innovation::Normal).unwrap();
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
                let (m, _, _) = train_grid(&NnModel::counterpart(&init), &data, &cfg).unwrap();
                (truth.values(), mle.values(), m.as_stochastic().unwrap().values())
            })
            .collect();
        let mut mse = vec![[0.0; 2]; names.len()];
        for (t, a, b) in &results {
            for i in 0..names.len() {
                mse[i][0] += (a[i] - t[i]).powi(2) / 8.0;
                mse[i][1] += (b[i] - t[i]).powi(2) / 8.0;
            }
        }
        let cells: Vec<String> = names
            .iter()
            .zip(&mse)
            .map(|(n, m)| format!("{n} {:.4}/{:.4}", m[0], m[1]))
            .collect();
        pass &= mse.iter().all(|m| m[0] < 0.05 && m[1] < 0.05);
        parts.push(format!("{}: {}", kind.as_str(), cells.join(" ")));
    }
    outcome(pass, format!("MSE mle/nn: {}", parts.join("; ")))
}

// 3 ------------------------------------------------------------------------

fn total_loss<T: Real>(model: &NnModel, raw: &[T], eps: &[f64], s0: f64, loss: LossKind) -> Option<T> {
    let p = model.prepare(raw).ok()?;
    let trace = p.filter(eps, raw[0].lift(s0));
    let mut total = raw[0].lift(0.0);
    for (e, s) in eps.iter().zip(trace) {
        total = total + step_loss(loss, e * e, s).ok()?;
    }
    Some(total)
}

/// Returns (checked, mismatches, worst absolute error, worst relative error).
fn check_gradient(model: &NnModel, eps: &[f64], s0: f64, loss: LossKind) -> Option<(usize, usize, f64, f64)> {
    let raw = model.raw();
    let tape = Tape::new();
    let vars = tape.vars(&raw);
    let l = total_loss(model, &vars, eps, s0, loss)?;
    let ad = l.backward().wrt(&vars);
    let mut bad = 0;
    let (mut worst_abs, mut worst_rel): (f64, f64) = (0.0, 0.0);
    for i in 0..raw.len() {
        let h = 1e-5 * raw[i].abs().max(1.0);
        let mut up = raw.clone();
        up[i] += h;
        let mut dn = raw.clone();
        dn[i] -= h;
        let fd = (total_loss(model, &up, eps, s0, loss)? - total_loss(model, &dn, eps, s0, loss)?) / (2.0 * h);
        let abs = (ad[i] - fd).abs();
        let rel = abs / ad[i].abs().max(fd.abs());
        worst_abs = worst_abs.max(abs);
        if ad[i] != 0.0 || fd != 0.0 {
            worst_rel = worst_rel.max(rel);
        }
        bad += usize::from(abs > 1e-7 && rel > 1e-4);
    }
    Some((raw.len(), bad, worst_abs, worst_rel))
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut report = Vec::new();
    let mut pass = true;
    for label in ["garch11", "gjr", "figarch", "garch-lstm"] {
        let (mut configs, mut checked, mut bad) = (0, 0, 0);
        let (mut worst_abs, mut worst_rel) = (0.0f64, 0.0f64);
        while configs < 100 {
            let loss = if configs % 2 == 0 {
                LossKind::NLoss
            } else {
                LossKind::TLoss { dof: 5.0 }
            };
            let (model, steps) = if label == "garch-lstm" {
                let kind = [ModelKind::Garch11, ModelKind::Gjr, ModelKind::Figarch][configs % 3];
                let mut m = GarchLstm::new(&random_params(kind, &mut rng));
                let mut raw = m.raw();
                let n_kernel = raw.len() - 10;
                for r in &mut raw[n_kernel..] {
                    *r = normal(&mut rng) * 0.5;
                }
                *raw.last_mut().unwrap() = normal(&mut rng) - 1.0;
                m.set_raw(&raw);
                (NnModel::GarchLstm(m), 20)
            } else {
                let kind = ModelKind::parse(label).unwrap();
                (NnModel::counterpart(&random_params(kind, &mut rng)), 100)
            };
            let s0 = rng.random_range(0.3..2.0);
            let eps = returns(steps, f64::sqrt(s0), &mut rng);
            // resample the rare draw whose finite-difference probe leaves the feasible set
            let Some((c, b, wa, wr)) = check_gradient(&model, &eps, s0, loss) else {
                continue;
            };
            configs += 1;
            checked += c;
            bad += b;
            worst_abs = worst_abs.max(wa);
            worst_rel = worst_rel.max(wr);
        }
        pass &= bad == 0;
        report.push(format!(
            "{label} {bad}/{checked} off (max abs {worst_abs:.1e}, max rel {worst_rel:.1e})"
        ));
    }
    outcome(pass, report.join(", "))
}

// 4 ------------------------------------------------------------------------

/// Weights from Γ-function binomial coefficients and a direct geometric
/// convolution for the division by (1 − βB).
fn figarch_oracle(beta: f64, phi: f64, d: f64, t: usize) -> Vec<f64> {
    use statrs::function::gamma::gamma;
    let pi: Vec<f64> = (0..t).map(|j| gamma(j as f64 - d) / (gamma(j as f64 + 1.0) * gamma(-d))).collect();
    let c: Vec<f64> = (0..t).map(|j| pi[j] - if j > 0 { phi * pi[j - 1] } else { 0.0 }).collect();
    (0..t)
        .map(|j| {
            let a: f64 = (0..=j).map(|i| beta.powi(i as i32) * c[j - i]).sum();
            if j == 0 {
                1.0 - a
            } else {
                -a
            }
        })
        .collect()
}

fn figarch_weights_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut feasible = 0;
    for _ in 0..50 {
        let (b, phi, d) = (
            rng.random_range(0.0..0.95),
            rng.random_range(0.0..0.95),
            rng.random_range(0.01..0.99),
        );
        let t = rng.random_range(2..=64);
        let oracle = figarch_oracle(b, phi, d, t);
        let got = figarch_weights_unchecked(b, phi, d, t);
        if let Ok(w) = figarch_weights(b, phi, d, t) {
            feasible += 1;
            assert_eq!(w, got);
        }
        for (x, y) in got.iter().zip(&oracle) {
            worst = worst.max((x - y).abs());
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max |Δλ| = {worst:e} over 50 draws ({feasible} inside the non-negative region)"),
    )
}

// 5 ------------------------------------------------------------------------

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

fn loss_minimizer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // Values of n_loss are flat to within rounding over a relative band of
    // about 1e-8 around the minimum, so a value-based search cannot resolve
    // further. The stationarity oracle searches |∂n_loss/∂ln σ̂²| from the
    // tape instead, which is monotone in σ̂² and has no such floor.
    let slope = |y: f64, u: f64| {
        let tape = Tape::new();
        let u = tape.var(u);
        step_loss(LossKind::NLoss, y, u.exp()).unwrap().backward().get(&u)
    };
    let (mut worst_arg, mut worst_value_search): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let y: f64 = 10f64.powf(rng.random_range(-1.0..1.0));
        let u = golden_section(|u| slope(y, u).abs(), (y / 10.0).ln(), (y * 10.0).ln());
        worst_arg = worst_arg.max((u.exp() - y).abs());
        let s = golden_section(|s| n_loss(y, s).unwrap(), y / 10.0, y * 10.0);
        worst_value_search = worst_value_search.max((s - y).abs());
    }
    let mut worst_t: f64 = 0.0;
    for _ in 0..1000 {
        let s: f64 = 10f64.powf(rng.random_range(-1.0..1.0));
        let z = normal(&mut rng);
        let y = s * z * z;
        worst_t = worst_t.max((t_loss(y, s, 1e6).unwrap() - n_loss(y, s).unwrap()).abs());
    }
    outcome(
        worst_arg <= 1e-8 && worst_t <= 1e-4,
        format!(
            "max |argmin − y| = {worst_arg:e} (value-only search: {worst_value_search:e}); max |t(1e6) − n| = {worst_t:e}"
        ),
    )
}

// 6 ------------------------------------------------------------------------

fn var_calibration() -> Outcome {
    let truth = ModelParams::Garch11(Garch11Params::new(0.1, 0.1, 0.85).unwrap());
    let expected = 2.0 * Normal::standard().cdf(-VAR_MULTIPLIER);
    let mut rates = Vec::new();
    for seed in 0..10 {
        let sim = simulate(&truth, 5000, seed, Innovation::Normal).unwrap();
        let eps = sim.returns.values();
        let trace = filter_series(&truth, eps, VarianceInit::Fixed(2.0)).unwrap();
        let sigma: Vec<f64> = trace.sigma_sq.iter().map(|v| v.sqrt()).collect();
        let (u, l) = var_limits(&sigma, VAR_MULTIPLIER);
        rates.push(var_violations(eps, &u, &l, VAR_MULTIPLIER).unwrap().total_rate);
    }
    let worst = rates.iter().map(|r| (r - expected).abs()).fold(0.0, f64::max);
    outcome(
        worst <= 0.02,
        format!(
            "analytic {:.4}; rates {:.4}..{:.4}",
            expected,
            rates.iter().cloned().fold(1.0, f64::min),
            rates.iter().cloned().fold(0.0, f64::max)
        ),
    )
}

// 7 ------------------------------------------------------------------------

/// Test MAE of a counterpart trained with `loss`. Likelihood losses learn
/// from squared returns and their daily forecasts are summed over the
/// realized window; `mse_on_returns` forces the same pipeline for MSE.
fn ablation_mae(seed: u64, loss: LossKind, mse_on_returns: bool) -> f64 {
    let k = 5;
    let truth = ModelParams::Garch11(Garch11Params::new(0.1, 0.1, 0.85).unwrap());
    let sim = simulate(&truth, 5000, seed, Innovation::StudentT { dof: 5.0 }).unwrap();
    let vol = realized_volatility(&sim.returns, k).unwrap();
    let on_returns = loss.is_likelihood() || mse_on_returns;
    let ds = if on_returns {
        build_return_dataset(&sim.returns, k, 1).unwrap()
    } else {
        build_dataset(&sim.returns, &vol, k, 1).unwrap()
    };
    let data = split(&ds, (8, 1, 1)).unwrap();
    let init = ModelParams::default_init(ModelKind::Garch11, initial_variance(&data.train).unwrap());
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
    evaluate(&fc, &vol, MetricScale::Volatility).unwrap().mae
}

fn ablation() -> Outcome {
    let t = LossKind::TLoss { dof: 5.0 };
    let wins = (0..10).filter(|&s| ablation_mae(s, t, false) <= ablation_mae(s, LossKind::Mse, false)).count();
    let control = (0..10).filter(|&s| ablation_mae(s, t, false) <= ablation_mae(s, LossKind::Mse, true)).count();
    outcome(
        wins >= 7,
        format!("t-loss MAE ≤ mse-loss MAE in {wins}/10 seeds (informational, mse on returns with the same aggregation: {control}/10)"),
    )
}

// 8 ------------------------------------------------------------------------

fn degeneracy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut compared = 0;
    let mut equal = true;
    for i in 0..30 {
        let kind = [ModelKind::Garch11, ModelKind::Gjr, ModelKind::Figarch][i % 3];
        let p = random_params(kind, &mut rng);
        let mut m = GarchLstm::new(&p).with_blend(Blend::Fixed(0.0));
        let mut raw = m.raw();
        // gates and an arbitrary blend coordinate, which Fixed(0) ignores
        let n_kernel = raw.len() - 10;
        for r in &mut raw[n_kernel..] {
            *r = normal(&mut rng) * 2.0;
        }
        m.set_raw(&raw);
        let eps = returns(300, 1.0, &mut rng);
        let lstm = NnModel::GarchLstm(m.clone()).prepared().unwrap().filter(&eps, 1.3);
        let kernel = NnModel::Counterpart(m.kernel.clone()).prepared().unwrap().filter(&eps, 1.3);
        equal &= lstm.iter().zip(&kernel).all(|(a, b)| a.to_bits() == b.to_bits());
        compared += eps.len();
    }
    outcome(equal, format!("{compared} forecasts compared bit for bit"))
}

// 9 ------------------------------------------------------------------------

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn pipeline() -> Outcome {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/prices.csv");
    let run = |out: &Path| {
        main_with_args([
            "garchnn",
            "pipeline",
            "--data",
            fixture.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "3",
            "--quiet",
        ])
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let codes = (run(a.path()), run(b.path()));
    let fa = read_dir_sorted(a.path());
    let fb = read_dir_sorted(b.path());
    let identical = fa == fb;
    let manifest = String::from_utf8(fa.iter().find(|(n, _)| n == "manifest.kv").unwrap().1.clone()).unwrap();
    let guard = manifest.contains("leakage_check = pass");

    // the guard itself, checked independently of the CLI
    let r = load_series(&fixture, &ColumnMap::default(), 100.0).unwrap();
    let data = split(&build_return_dataset(&r, 5, 1).unwrap(), (8, 1, 1)).unwrap();
    let init = ModelParams::default_init(ModelKind::Gjr, initial_variance(&data.train).unwrap());
    let (_, hist) = train(&NnModel::garch_lstm(&init), &data, &TrainConfig::default()).unwrap();
    let below = hist.max_consumed_index < data.test.records[0].anchor;
    let rejects = data.check_no_leakage(data.test.records[0].anchor).is_err();

    outcome(
        codes == (0, 0) && identical && guard && below && rejects,
        format!(
            "exit codes {codes:?}, {} files byte-identical: {identical}, training consumed up to {} < test start {}",
            fa.len(),
            hist.max_consumed_index,
            data.test.records[0].anchor
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("equivalence of counterpart and classical traces", equivalence),
        ("parameter recovery, 8 seeds, n=5000", recovery),
        ("reverse-mode gradients vs central differences", gradients),
        ("FIGARCH weights vs independent oracle", figarch_weights_check),
        ("loss minimizer and t→n limit", loss_minimizer),
        ("VaR violation rate calibration", var_calibration),
        ("t-loss vs mse-loss ablation", ablation),
        ("GARCH-LSTM with w=0 equals its kernel", degeneracy),
        ("pipeline determinism and leakage guard", pipeline),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = f();
        let dt: Duration = t0.elapsed();
        failed += usize::from(!o.pass);
        println!(
            "criterion {} {}: {name} [{:.1?}] {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            dt,
            o.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
