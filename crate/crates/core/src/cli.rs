//! Command-line pipeline: simulate, fit, train, forecast, evaluate,
//! backtest and compare classical fits with their neural counterparts.
//!
//! Every command writes its outputs into `--out` through a temporary file
//! and a rename, and finishes by rewriting `manifest.kv` with the effective
//! configuration. Nothing in the outputs depends on wall-clock time, so
//! reruns with the same flags are byte-identical.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{evaluate, var_limits, var_trace_csv, var_violations, MetricReport, MetricScale, VAR_MULTIPLIER};
use crate::forecast::{Aggregation, ForecastSeries, Forecaster};
use crate::garch::mle::{fit_mle, MleConfig};
use crate::garch::{
    sample_variance, simulate, FigarchParams, Innovation, Intercept, ModelKind, ModelParams, DEFAULT_TRUNCATION,
};
use crate::kv::KvDoc;
use crate::losses::LossKind;
use crate::nn::NnModel;
use crate::timeseries::{
    build_dataset, build_return_dataset, load_series, realized_volatility, split, split_aligned, ColumnMap,
    PriceSeries, ReturnSeries, SplitDataset, TargetKind, VolSeries, WindowedDataset,
};
use crate::training::{initial_variance, train, train_grid, BatchRegime, TrainConfig, TrainedModel};

pub const DEFAULT_HORIZONS: [usize; 5] = [1, 3, 5, 10, 21];
const SPLIT: (usize, usize, usize) = (8, 1, 1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Fit,
    Train,
    Forecast,
    Evaluate,
    VarBacktest,
    EquivalenceCheck,
    Pipeline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dist {
    Normal,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggChoice {
    /// Daily variances summed over the realized window.
    Realized,
    Daily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleChoice {
    Vol,
    Var,
}

#[derive(Debug, Parser)]
#[command(name = "garchnn", version, about = "GARCH-family volatility models and their neural counterparts")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Simulate return series from known parameters.
    Simulate,
    /// Classical maximum-likelihood fit on the training part.
    Fit,
    /// Gradient training of a counterpart or GARCH-LSTM.
    Train,
    /// Test-set forecasts from fitted or trained artifacts.
    Forecast,
    /// MAE/MSE tables from forecast files.
    Evaluate,
    /// 1-day VaR violation counts.
    VarBacktest,
    /// Classical fit against neural counterpart on simulated data.
    EquivalenceCheck,
    /// fit, train, forecast, evaluate and var-backtest in one go.
    Pipeline,
}

#[derive(Debug, Clone, clap::Args)]
struct Opts {
    /// Price table (date, close) or return table (date, return).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// garch11, gjr, figarch or garch-lstm.
    #[arg(long, global = true, default_value = "gjr")]
    model: String,
    /// Kernel of the GARCH-LSTM cell.
    #[arg(long, global = true, default_value = "gjr")]
    kernel: String,
    /// Use the neural counterpart instead of the classical fit.
    #[arg(long, global = true)]
    counterpart: bool,
    /// mse, n or t.
    #[arg(long, global = true, default_value = "t")]
    loss: String,
    #[arg(long, global = true, default_value_t = 5.0)]
    dof: f64,
    #[arg(long, global = true, value_delimiter = ',', default_values_t = DEFAULT_HORIZONS)]
    horizon: Vec<usize>,
    #[arg(long, global = true, default_value_t = 5)]
    k: usize,
    #[arg(long, global = true, default_value_t = 100.0)]
    scale: f64,
    #[arg(long, global = true, value_delimiter = ',', default_values_t = [0u64])]
    seed: Vec<u64>,
    /// Run seeds seed..seed+N instead of the --seed list.
    #[arg(long, global = true)]
    seeds: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Select the learning rate from 5 log-spaced values in [3e-4, 3e-2].
    #[arg(long, global = true)]
    grid: bool,
    /// Series length for simulate and equivalence-check.
    #[arg(long, global = true, default_value_t = 1000)]
    n: usize,
    /// Ground-truth parameters for simulate, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    params: Option<Vec<f64>>,
    #[arg(long, global = true, value_enum, default_value_t = Dist::Normal)]
    dist: Dist,
    /// Also write a synthetic price table when simulating.
    #[arg(long, global = true)]
    prices: bool,
    #[arg(long, global = true, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long = "max-epochs", global = true, default_value_t = 300)]
    max_epochs: usize,
    /// Records per gradient step, or "full".
    #[arg(long, global = true, default_value = "64")]
    batch: String,
    #[arg(long, global = true, value_enum, default_value_t = AggChoice::Realized)]
    aggregation: AggChoice,
    #[arg(long = "metric-scale", global = true, value_enum, default_value_t = ScaleChoice::Vol)]
    metric_scale: ScaleChoice,
    /// FIGARCH intercept convention: raw or scaled.
    #[arg(long, global = true, default_value = "raw")]
    intercept: String,
    #[arg(long, global = true, default_value_t = DEFAULT_TRUNCATION)]
    truncation: usize,
    /// Training configuration document (key = value) overriding the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Do not list the written files.
    #[arg(long, global = true)]
    quiet: bool,
}

/// Which model a job runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    Classical(ModelKind),
    Counterpart(ModelKind),
    GarchLstm(ModelKind),
}

impl ModelSpec {
    pub fn name(&self) -> String {
        match self {
            ModelSpec::Classical(k) => k.as_str().to_string(),
            ModelSpec::Counterpart(k) => format!("{}-nn", k.as_str()),
            ModelSpec::GarchLstm(k) => format!("garch-lstm-{}", k.as_str()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match *self {
            ModelSpec::Classical(k) | ModelSpec::Counterpart(k) | ModelSpec::GarchLstm(k) => k,
        }
    }
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub data: Option<PathBuf>,
    pub models: Vec<ModelSpec>,
    pub loss: LossKind,
    pub horizons: Vec<usize>,
    pub k: usize,
    pub scale: f64,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub grid: bool,
    pub out: PathBuf,
    pub n: usize,
    pub params: Option<Vec<f64>>,
    pub innovation: Innovation,
    pub write_prices: bool,
    pub aggregation: AggChoice,
    pub metric_scale: MetricScale,
    pub intercept: Intercept,
    pub truncation: usize,
}

impl RunConfig {
    fn from_opts(command: Command, o: Opts) -> Result<Self> {
        let loss = LossKind::parse(&o.loss, o.dof)?;
        let model_kind = |s: &str| ModelKind::parse(s).map_err(|e| Error::config(e.to_string()));
        let kernel = model_kind(&o.kernel)?;
        let main = if o.model.eq_ignore_ascii_case("garch-lstm") {
            ModelSpec::GarchLstm(kernel)
        } else if o.counterpart || command == Command::Train {
            ModelSpec::Counterpart(model_kind(&o.model)?)
        } else {
            ModelSpec::Classical(model_kind(&o.model)?)
        };
        let models = match command {
            Command::Pipeline if !o.model.eq_ignore_ascii_case("garch-lstm") && !o.counterpart => {
                let k = main.kind();
                vec![ModelSpec::Classical(k), ModelSpec::Counterpart(k), ModelSpec::GarchLstm(kernel)]
            }
            _ => vec![main],
        };
        if o.horizon.is_empty() || o.horizon.contains(&0) {
            return Err(Error::config("horizons must be at least 1"));
        }
        let mut horizons = o.horizon.clone();
        horizons.sort_unstable();
        horizons.dedup();
        if o.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if !(o.scale > 0.0 && o.scale.is_finite()) {
            return Err(Error::config("scale must be positive"));
        }
        let seeds = match o.seeds {
            Some(n) => (0..n).map(|i| o.seed[0] + i).collect(),
            None => o.seed.clone(),
        };
        let batch = if o.batch == "full" {
            BatchRegime::FullSequence
        } else {
            BatchRegime::Minibatch(
                o.batch
                    .parse()
                    .map_err(|_| Error::config(format!("bad --batch '{}'", o.batch)))?,
            )
        };
        let mut train = TrainConfig {
            lr: o.lr,
            max_epochs: o.max_epochs,
            seed: seeds[0],
            loss,
            batch,
            ..TrainConfig::default()
        };
        if let Some(path) = &o.config {
            let doc = KvDoc::load(path)?;
            let mut merged = train.to_kv();
            for (k, v) in doc.entries() {
                merged.set(k, v);
            }
            train = TrainConfig::from_kv(&merged)?;
        }
        train.validate()?;
        let innovation = match o.dist {
            Dist::Normal => Innovation::Normal,
            Dist::T => Innovation::StudentT { dof: o.dof },
        };
        Ok(Self {
            command,
            data: o.data,
            models,
            loss: train.loss,
            horizons,
            k: o.k,
            scale: o.scale,
            seeds,
            train,
            grid: o.grid,
            out: o.out,
            n: o.n,
            params: o.params,
            innovation,
            write_prices: o.prices,
            aggregation: o.aggregation,
            metric_scale: match o.metric_scale {
                ScaleChoice::Vol => MetricScale::Volatility,
                ScaleChoice::Var => MetricScale::Variance,
            },
            intercept: Intercept::parse(&o.intercept).map_err(|e| Error::config(e.to_string()))?,
            truncation: o.truncation,
        })
    }

    /// Configuration echo for the manifest.
    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set("command", format!("{:?}", self.command).to_lowercase());
        doc.set("version", env!("CARGO_PKG_VERSION"));
        if let Some(d) = &self.data {
            doc.set("data", d.display());
        }
        let models: Vec<String> = self.models.iter().map(|m| m.name()).collect();
        doc.set("models", models.join(","));
        let hs: Vec<String> = self.horizons.iter().map(|h| h.to_string()).collect();
        doc.set("horizons", hs.join(","));
        doc.set("k", self.k).set("scale", self.scale);
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        doc.set("seeds", seeds.join(","));
        doc.set("grid", self.grid).set("n", self.n);
        doc.set("aggregation", format!("{:?}", self.aggregation).to_lowercase());
        doc.set("metric_scale", format!("{:?}", self.metric_scale).to_lowercase());
        doc.set("intercept", self.intercept.as_str()).set("truncation", self.truncation);
        for (k, v) in self.train.to_kv().entries() {
            doc.set(&format!("train.{k}"), v);
        }
        doc
    }

    fn figarch_template(&self) -> FigarchParams {
        FigarchParams {
            omega: 1.0,
            beta: 0.0,
            phi: 0.0,
            d: 0.5,
            truncation: self.truncation,
            intercept: self.intercept,
        }
    }

    fn init_params(&self, kind: ModelKind, sample_var: f64) -> ModelParams {
        match ModelParams::default_init(kind, sample_var) {
            ModelParams::Figarch(f) => ModelParams::Figarch(FigarchParams {
                truncation: self.truncation,
                intercept: self.intercept,
                ..f
            }),
            p => p,
        }
    }
}

/// Writes `contents` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Loaded data shared by the stages of a run.
struct Workspace {
    returns: ReturnSeries,
    vol: VolSeries,
    /// Split of the longest-horizon dataset; fixes partition boundaries for
    /// models fitted once and used at every horizon.
    reference: SplitDataset,
}

impl Workspace {
    fn load(cfg: &RunConfig) -> Result<Self> {
        let path = cfg
            .data
            .as_ref()
            .ok_or_else(|| Error::config("--data is required for this command"))?;
        let returns = load_series(path, &ColumnMap::default(), cfg.scale)?;
        let vol = realized_volatility(&returns, cfg.k)?;
        let h_max = *cfg.horizons.last().expect("non-empty horizons");
        let reference = split(&build_return_dataset(&returns, cfg.k, h_max)?, SPLIT)?;
        Ok(Self { returns, vol, reference })
    }

    fn dataset(&self, cfg: &RunConfig, target: TargetKind, h: usize) -> Result<WindowedDataset> {
        match target {
            TargetKind::SquaredReturn => build_return_dataset(&self.returns, cfg.k, h),
            TargetKind::RealizedVariance => build_dataset(&self.returns, &self.vol, cfg.k, h),
        }
    }

    /// One-step dataset partitioned at the reference boundaries.
    fn fit_split(&self, cfg: &RunConfig, target: TargetKind) -> Result<SplitDataset> {
        split_aligned(&self.dataset(cfg, target, 1)?, &self.reference)
    }

    fn horizon_split(&self, cfg: &RunConfig, target: TargetKind, h: usize) -> Result<SplitDataset> {
        split(&self.dataset(cfg, target, h)?, SPLIT)
    }
}

fn target_for(loss: LossKind) -> TargetKind {
    if loss.is_likelihood() {
        TargetKind::SquaredReturn
    } else {
        TargetKind::RealizedVariance
    }
}

/// Counterparts trained on a likelihood are stochastic models in disguise:
/// one fit at horizon 1 serves every horizon by iteration.
fn trains_once(spec: ModelSpec, loss: LossKind) -> bool {
    matches!(spec, ModelSpec::Counterpart(_)) && loss.is_likelihood()
}

fn params_path(cfg: &RunConfig, spec: ModelSpec) -> PathBuf {
    cfg.out.join(format!("params_{}.kv", spec.name()))
}

fn checkpoint_path(cfg: &RunConfig, spec: ModelSpec, h: usize) -> PathBuf {
    cfg.out.join(format!("checkpoint_{}_h{h}.kv", spec.name()))
}

fn forecast_path_for(cfg: &RunConfig, spec: ModelSpec, h: usize) -> PathBuf {
    cfg.out.join(format!("forecast_{}_h{h}.csv", spec.name()))
}

fn fmt_values(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

// ---------------------------------------------------------------- simulate

/// `--params` if given, else a moderately persistent default.
fn truth_params(cfg: &RunConfig, kind: ModelKind) -> Result<ModelParams> {
    let default: &[f64] = match kind {
        ModelKind::Garch11 => &[0.1, 0.2, 0.7],
        ModelKind::Gjr => &[0.1, 0.1, 0.2, 0.6],
        ModelKind::Figarch => &[0.1, 0.3, 0.15, 0.4],
    };
    let v = cfg.params.as_deref().unwrap_or(default);
    ModelParams::from_values(kind, v, Some(&cfg.figarch_template()))
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let spec = cfg.models[0];
    let kind = spec.kind();
    let params = truth_params(cfg, kind)?;
    params.validate()?;
    let mut written = Vec::new();
    let mut truth = params.to_kv();
    truth.set("n", cfg.n);
    truth.set("innovation", match cfg.innovation {
        Innovation::Normal => "normal".to_string(),
        Innovation::StudentT { dof } => format!("t({dof})"),
    });
    let path = cfg.out.join("truth.kv");
    write_atomic(&path, &truth.render())?;
    written.push(path);
    let sims: Vec<Result<(u64, ReturnSeries)>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| simulate(&params, cfg.n, seed, cfg.innovation).map(|s| (seed, s.returns)))
        .collect();
    for sim in sims {
        let (seed, r) = sim?;
        let mut csv = String::from("date,return\n");
        for (d, v) in r.timestamps().iter().zip(r.values()) {
            let _ = writeln!(csv, "{d},{v}");
        }
        let path = cfg.out.join(format!("sim_seed{seed}.csv"));
        write_atomic(&path, &csv)?;
        written.push(path);
        if cfg.write_prices {
            let prices = PriceSeries::from_returns(&r, 100.0, cfg.scale)?;
            let mut csv = String::from("date,close\n");
            for (d, c) in prices.timestamps().iter().zip(prices.closes()) {
                let _ = writeln!(csv, "{d},{c}");
            }
            let path = cfg.out.join(format!("prices_seed{seed}.csv"));
            write_atomic(&path, &csv)?;
            written.push(path);
        }
    }
    Ok(written)
}

// --------------------------------------------------------------------- fit

fn fit_classical(ws: &Workspace, cfg: &RunConfig, kind: ModelKind) -> Result<(ModelParams, KvDoc)> {
    if !cfg.loss.is_likelihood() {
        return Err(Error::config("classical fitting needs a likelihood loss (n or t)"));
    }
    let data = ws.fit_split(cfg, TargetKind::SquaredReturn)?;
    let (start, eps) = data
        .train
        .covered_returns()
        .ok_or_else(|| Error::data("training records are not contiguous"))?;
    data.check_no_leakage(start + eps.len() - 1)?;
    let s0 = sample_variance(&eps);
    let (p, rep) = fit_mle(&cfg.init_params(kind, s0), &eps, cfg.loss, &MleConfig::default())?;
    let mut doc = p.to_kv();
    doc.set("init_variance", s0)
        .set("stream_start", start)
        .set("loss", cfg.loss.name())
        .set("iterations", rep.iterations)
        .set("evaluations", rep.evaluations)
        .set("initial_loss", rep.initial_loss)
        .set("final_loss", rep.final_loss)
        .set("converged", rep.converged)
        .set("n_obs", rep.n_obs);
    Ok((p, doc))
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ws = Workspace::load(cfg)?;
    let mut written = Vec::new();
    for &spec in &cfg.models {
        match spec {
            ModelSpec::Classical(kind) => {
                let (_, doc) = fit_classical(&ws, cfg, kind)?;
                let path = params_path(cfg, spec);
                write_atomic(&path, &doc.render())?;
                written.push(path);
            }
            _ => written.extend(train_spec(&ws, cfg, spec)?),
        }
    }
    Ok(written)
}

// ------------------------------------------------------------------- train

fn train_job(ws: &Workspace, cfg: &RunConfig, spec: ModelSpec, h: usize) -> Result<(TrainedModel, String)> {
    let target = target_for(cfg.loss);
    let data = if trains_once(spec, cfg.loss) {
        ws.fit_split(cfg, target)?
    } else {
        ws.horizon_split(cfg, target, h)?
    };
    let s0 = initial_variance(&data.train)?;
    let init = cfg.init_params(spec.kind(), s0);
    let model = match spec {
        ModelSpec::GarchLstm(_) => NnModel::garch_lstm(&init),
        _ => NnModel::counterpart(&init),
    };
    let tc = TrainConfig {
        horizon: h,
        ..cfg.train
    };
    let (m, hist) = if cfg.grid {
        let (m, h, _) = train_grid(&model, &data, &tc)?;
        (m, h)
    } else {
        train(&model, &data, &tc)?
    };
    data.check_no_leakage(hist.max_consumed_index)?;
    Ok((m, hist.to_csv()))
}

fn train_spec(ws: &Workspace, cfg: &RunConfig, spec: ModelSpec) -> Result<Vec<PathBuf>> {
    if let ModelSpec::Classical(_) = spec {
        return Ok(Vec::new());
    }
    let horizons: Vec<usize> = if trains_once(spec, cfg.loss) {
        vec![1]
    } else {
        cfg.horizons.clone()
    };
    let results: Vec<Result<(TrainedModel, String)>> =
        horizons.par_iter().map(|&h| train_job(ws, cfg, spec, h)).collect();
    let mut written = Vec::new();
    for (h, res) in horizons.iter().zip(results) {
        let (m, hist) = res?;
        let path = checkpoint_path(cfg, spec, *h);
        write_atomic(&path, &m.to_kv()?.render())?;
        written.push(path);
        let path = cfg.out.join(format!("history_{}_h{h}.csv", spec.name()));
        write_atomic(&path, &hist)?;
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ws = Workspace::load(cfg)?;
    let mut written = Vec::new();
    for &spec in &cfg.models {
        written.extend(train_spec(&ws, cfg, spec)?);
    }
    Ok(written)
}

// ---------------------------------------------------------------- forecast

fn load_forecaster(cfg: &RunConfig, spec: ModelSpec, h: usize) -> Result<Forecaster> {
    let missing = |p: &Path| Error::data(format!("missing upstream artifact {}", p.display()));
    match spec {
        ModelSpec::Classical(_) => {
            let path = params_path(cfg, spec);
            if !path.exists() {
                return Err(missing(&path));
            }
            let doc = KvDoc::load(&path)?;
            Ok(Forecaster::Stochastic {
                params: ModelParams::from_kv(&doc)?,
                init_variance: doc.require_f64("init_variance")?,
                stream_start: doc.require_f64("stream_start")? as usize,
            })
        }
        _ => {
            let once = trains_once(spec, cfg.loss);
            let path = checkpoint_path(cfg, spec, if once { 1 } else { h });
            if !path.exists() {
                return Err(missing(&path));
            }
            let m = TrainedModel::from_kv(&KvDoc::load(&path)?)?;
            if once {
                Ok(Forecaster::Stochastic {
                    params: m
                        .as_stochastic()
                        .ok_or_else(|| Error::data("checkpoint is not a counterpart"))?,
                    init_variance: m.init_variance,
                    stream_start: m.stream_start,
                })
            } else {
                Ok(Forecaster::Neural(m))
            }
        }
    }
}

fn aggregation_for(cfg: &RunConfig, f: &Forecaster) -> Aggregation {
    match (f.output_kind(), cfg.aggregation) {
        (TargetKind::SquaredReturn, AggChoice::Realized) => Aggregation::RealizedWindow(cfg.k),
        _ => Aggregation::Daily,
    }
}

fn forecast_one(ws: &Workspace, cfg: &RunConfig, spec: ModelSpec, h: usize) -> Result<ForecastSeries> {
    let f = load_forecaster(cfg, spec, h)?;
    let data = ws.horizon_split(cfg, f.output_kind(), h)?;
    f.forecast(&data, h, aggregation_for(cfg, &f))
}

pub fn cmd_forecast(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ws = Workspace::load(cfg)?;
    let mut written = Vec::new();
    for &spec in &cfg.models {
        for &h in &cfg.horizons {
            let fc = forecast_one(&ws, cfg, spec, h)?;
            let path = forecast_path_for(cfg, spec, h);
            write_atomic(&path, &fc.to_csv())?;
            written.push(path);
        }
    }
    Ok(written)
}

// ---------------------------------------------------------------- evaluate

fn read_forecast(path: &Path, h: usize) -> Result<ForecastSeries> {
    if !path.exists() {
        return Err(Error::data(format!("missing upstream artifact {}", path.display())));
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut fc = ForecastSeries {
        horizon: h,
        anchors: Vec::new(),
        timestamps: Vec::new(),
        sigma_hat_sq: Vec::new(),
    };
    for row in rdr.records() {
        let row = row?;
        let bad = || Error::data(format!("malformed forecast row in {}", path.display()));
        fc.anchors.push(row.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?);
        fc.timestamps.push(row.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?);
        fc.sigma_hat_sq.push(row.get(3).and_then(|s| s.parse().ok()).ok_or_else(bad)?);
    }
    Ok(fc)
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ws = Workspace::load(cfg)?;
    let mut report = MetricReport::default();
    for &spec in &cfg.models {
        for &h in &cfg.horizons {
            let fc = read_forecast(&forecast_path_for(cfg, spec, h), h)?;
            report.push(spec.name(), h, evaluate(&fc, &ws.vol, cfg.metric_scale)?);
        }
    }
    let path = cfg.out.join("metrics.csv");
    write_atomic(&path, &report.to_csv())?;
    Ok(vec![path])
}

// ------------------------------------------------------------ var backtest

/// 1-day σ̂ for the returns following each test anchor, with those returns.
fn daily_sigma(ws: &Workspace, cfg: &RunConfig, spec: ModelSpec) -> Result<(ForecastSeries, Vec<f64>)> {
    let f = load_forecaster(cfg, spec, 1)?;
    let data = ws.horizon_split(cfg, f.output_kind(), 1)?;
    let mut fc = f.forecast(&data, 1, Aggregation::Daily)?;
    if f.output_kind() == TargetKind::RealizedVariance {
        // a k-day realized variance spreads over k days
        for v in &mut fc.sigma_hat_sq {
            *v /= cfg.k as f64;
        }
    }
    let realized = fc.anchors.iter().map(|a| ws.returns.values()[a + 1]).collect();
    Ok((fc, realized))
}

pub fn cmd_var_backtest(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if !cfg.horizons.contains(&1) {
        return Err(Error::config("VaR backtests need horizon 1"));
    }
    let ws = Workspace::load(cfg)?;
    let mut written = Vec::new();
    let mut summary = String::from("model,n,upper_rate,lower_rate,total_rate\n");
    for &spec in &cfg.models {
        let (fc, realized) = daily_sigma(&ws, cfg, spec)?;
        let sigma: Vec<f64> = fc.sigma_hat_sq.iter().map(|v| v.sqrt()).collect();
        let (upper, lower) = var_limits(&sigma, VAR_MULTIPLIER);
        let rep = var_violations(&realized, &upper, &lower, VAR_MULTIPLIER)?;
        let _ = writeln!(
            summary,
            "{},{},{},{},{}",
            spec.name(),
            rep.n,
            rep.upper_rate,
            rep.lower_rate,
            rep.total_rate
        );
        let path = cfg.out.join(format!("var_{}.csv", spec.name()));
        write_atomic(&path, &rep.to_csv())?;
        written.push(path);
        let dates: Vec<_> = fc.anchors.iter().map(|a| ws.returns.timestamps()[a + 1]).collect();
        let path = cfg.out.join(format!("var_trace_{}.csv", spec.name()));
        write_atomic(&path, &var_trace_csv(&dates, &realized, &upper, &lower))?;
        written.push(path);
    }
    let path = cfg.out.join("var_summary.csv");
    write_atomic(&path, &summary)?;
    written.push(path);
    Ok(written)
}

// ------------------------------------------------------- equivalence check

/// Per seed: simulate, fit classically and train the counterpart on the
/// training part, then compare parameters and test forecasts.
pub fn cmd_equivalence_check(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let kind = cfg.models[0].kind();
    let truth = truth_params(cfg, kind)?;
    let loss = if cfg.loss.is_likelihood() { cfg.loss } else { LossKind::NLoss };
    let jobs: Vec<Result<(u64, ModelParams, ModelParams, f64, f64, f64)>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let sim = simulate(&truth, cfg.n, seed, cfg.innovation)?;
            let ds = build_return_dataset(&sim.returns, 1, 1)?;
            let data = split(&ds, SPLIT)?;
            let (start, eps) = data.train.covered_returns().expect("contiguous");
            let s0 = sample_variance(&eps);
            let init = cfg.init_params(kind, s0);
            let (classical, _) = fit_mle(&init, &eps, loss, &MleConfig::default())?;
            let tc = TrainConfig { loss, horizon: 1, ..cfg.train };
            let model = NnModel::counterpart(&init);
            let (nn, _) = if cfg.grid {
                let (m, h, _) = train_grid(&model, &data, &tc)?;
                (m, h)
            } else {
                train(&model, &data, &tc)?
            };
            let nn_params = nn.as_stochastic().expect("counterpart");
            // forecast closeness on the test part, σ scale
            let fa = Forecaster::Stochastic {
                params: classical,
                init_variance: s0,
                stream_start: start,
            }
            .forecast(&data, 1, Aggregation::Daily)?;
            let fb = Forecaster::Stochastic {
                params: nn_params,
                init_variance: nn.init_variance,
                stream_start: nn.stream_start,
            }
            .forecast(&data, 1, Aggregation::Daily)?;
            let sa: Vec<f64> = fa.sigma_hat_sq.iter().map(|v| v.sqrt()).collect();
            let sb: Vec<f64> = fb.sigma_hat_sq.iter().map(|v| v.sqrt()).collect();
            let m = crate::eval::error_metrics(&sa, &sb)?;
            let truth_sigma: Vec<f64> = fa.anchors.iter().map(|a| sim.sigma_sq[a + 1].sqrt()).collect();
            let ma = crate::eval::error_metrics(&sa, &truth_sigma)?;
            Ok((seed, classical, nn_params, m.mae, m.mse, ma.mae))
        })
        .collect();

    let names = kind.param_names();
    let mut per_seed = String::from("seed,fitter");
    for n in names {
        let _ = write!(per_seed, ",{n}");
    }
    per_seed.push('\n');
    let mut se = [vec![0.0; names.len()], vec![0.0; names.len()]];
    let mut closeness = String::from("seed,mae_between,mse_between,classical_mae_vs_true_sigma\n");
    let tv = truth.values();
    let n_seeds = cfg.seeds.len() as f64;
    for job in jobs {
        let (seed, a, b, mae, mse, mae_true) = job?;
        for (fi, (label, p)) in [("classical", a), ("counterpart", b)].iter().enumerate() {
            let _ = writeln!(per_seed, "{seed},{label},{}", fmt_values(&p.values()));
            for (i, v) in p.values().iter().enumerate() {
                se[fi][i] += (v - tv[i]).powi(2) / n_seeds;
            }
        }
        let _ = writeln!(closeness, "{seed},{mae},{mse},{mae_true}");
    }
    let mut table = String::from("param,truth,classical_mse,counterpart_mse\n");
    for (i, n) in names.iter().enumerate() {
        let _ = writeln!(table, "{n},{},{},{}", tv[i], se[0][i], se[1][i]);
    }
    let mut written = Vec::new();
    for (file, text) in [
        ("equivalence_params.csv", &table),
        ("equivalence_estimates.csv", &per_seed),
        ("equivalence_forecasts.csv", &closeness),
    ] {
        let path = cfg.out.join(file);
        write_atomic(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

// ---------------------------------------------------------------- pipeline

pub fn cmd_pipeline(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    // fit also trains the neural specs
    let mut written = cmd_fit(cfg)?;
    written.extend(cmd_forecast(cfg)?);
    written.extend(cmd_evaluate(cfg)?);
    if cfg.horizons.contains(&1) {
        written.extend(cmd_var_backtest(cfg)?);
    }
    Ok(written)
}

/// Runs one command and writes the manifest.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut written = match cfg.command {
        Command::Simulate => cmd_simulate(cfg)?,
        Command::Fit => cmd_fit(cfg)?,
        Command::Train => cmd_train(cfg)?,
        Command::Forecast => cmd_forecast(cfg)?,
        Command::Evaluate => cmd_evaluate(cfg)?,
        Command::VarBacktest => cmd_var_backtest(cfg)?,
        Command::EquivalenceCheck => cmd_equivalence_check(cfg)?,
        Command::Pipeline => cmd_pipeline(cfg)?,
    };
    let mut manifest = cfg.to_kv();
    let files: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    manifest.set("outputs", files.join(","));
    manifest.set("leakage_check", "pass");
    let path = cfg.out.join("manifest.kv");
    write_atomic(&path, &manifest.render())?;
    written.push(path);
    Ok(written)
}

/// Parses `args` (program name first) and runs. Returns the exit code:
/// 0 success, 1 usage error, 2 data error, 3 numerical failure.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let command = match cli.command {
        Sub::Simulate => Command::Simulate,
        Sub::Fit => Command::Fit,
        Sub::Train => Command::Train,
        Sub::Forecast => Command::Forecast,
        Sub::Evaluate => Command::Evaluate,
        Sub::VarBacktest => Command::VarBacktest,
        Sub::EquivalenceCheck => Command::EquivalenceCheck,
        Sub::Pipeline => Command::Pipeline,
    };
    let quiet = cli.opts.quiet;
    let result = RunConfig::from_opts(command, cli.opts).and_then(|cfg| run(&cfg));
    match result {
        Ok(files) => {
            if !quiet {
                for f in files {
                    println!("{}", f.display());
                }
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
