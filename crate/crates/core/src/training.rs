//! Gradient training of [`NnModel`]s with ADAM, plateau learning-rate
//! halving, early stopping and best-validation checkpointing.
//!
//! Records are consumed in time order as one rolling stream. The first
//! record feeds its whole window; each later (contiguous) record only adds
//! its newest return. The prediction for a record is the model output right
//! after consuming the record's anchor return. Validation continues from the
//! state reached at the end of the training stream.

use std::fmt::Write as _;

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::garch::{sample_variance, ModelParams};
use crate::kv::KvDoc;
use crate::losses::{step_loss, LossKind, DEFAULT_DOF};
use crate::nn::{CellState, NnModel, Prepared};
use crate::timeseries::{Record, SplitDataset, TargetKind, WindowedDataset};

pub const DEFAULT_LR: f64 = 1e-2;
pub const DEFAULT_BATCH: usize = 64;

/// Learning rates tried by a grid search: 5 log-spaced points from 3e-2
/// down to 3e-4.
pub fn lr_grid() -> [f64; 5] {
    let mut out = [0.0; 5];
    for (i, v) in out.iter_mut().enumerate() {
        *v = 3e-2 * 10f64.powf(-0.5 * i as f64);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected ADAM update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len(), "adam: length mismatch");
    assert_eq!(params.len(), state.m.len(), "adam: state length mismatch");
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// How training records are grouped into gradient steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchRegime {
    /// One step per epoch over the whole training stream.
    FullSequence,
    /// Time-ordered groups of records; the recurrent state is carried
    /// across groups as a constant.
    Minibatch(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub adam: AdamConfig,
    pub plateau_factor: f64,
    /// Epochs without validation improvement before the rate is cut.
    pub plateau_patience: usize,
    /// Epochs without validation improvement before training stops.
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    /// Recorded with the run. Training itself has no random component.
    pub seed: u64,
    pub loss: LossKind,
    pub horizon: usize,
    pub batch: BatchRegime,
    /// Relative validation improvement that counts as progress.
    pub min_rel_improvement: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LR,
            adam: AdamConfig::default(),
            plateau_factor: 0.5,
            plateau_patience: 5,
            early_stop_patience: 20,
            max_epochs: 500,
            seed: 0,
            loss: LossKind::TLoss { dof: DEFAULT_DOF },
            horizon: 1,
            batch: BatchRegime::FullSequence,
            min_rel_improvement: 1e-9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return Err(Error::config("patience values must be at least 1"));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::config("plateau factor must lie in (0, 1)"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if self.batch == BatchRegime::Minibatch(0) {
            return Err(Error::config("batch size must be at least 1"));
        }
        self.loss.validate()
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set("lr", self.lr)
            .set("adam_beta1", self.adam.beta1)
            .set("adam_beta2", self.adam.beta2)
            .set("adam_eps", self.adam.eps)
            .set("plateau_factor", self.plateau_factor)
            .set("plateau_patience", self.plateau_patience)
            .set("early_stop_patience", self.early_stop_patience)
            .set("max_epochs", self.max_epochs)
            .set("seed", self.seed)
            .set("loss", self.loss.name())
            .set("horizon", self.horizon)
            .set("min_rel_improvement", self.min_rel_improvement);
        if let LossKind::TLoss { dof } = self.loss {
            doc.set("dof", dof);
        }
        match self.batch {
            BatchRegime::FullSequence => doc.set("batch", "full"),
            BatchRegime::Minibatch(n) => doc.set("batch", n),
        };
        doc
    }

    /// Reads a config document; absent keys keep their defaults.
    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let mut c = Self::default();
        macro_rules! read {
            ($key:literal, $field:expr) => {
                if let Some(v) = doc.parse_value($key)? {
                    $field = v;
                }
            };
        }
        read!("lr", c.lr);
        read!("adam_beta1", c.adam.beta1);
        read!("adam_beta2", c.adam.beta2);
        read!("adam_eps", c.adam.eps);
        read!("plateau_factor", c.plateau_factor);
        read!("plateau_patience", c.plateau_patience);
        read!("early_stop_patience", c.early_stop_patience);
        read!("max_epochs", c.max_epochs);
        read!("seed", c.seed);
        read!("horizon", c.horizon);
        read!("min_rel_improvement", c.min_rel_improvement);
        if let Some(name) = doc.get("loss") {
            let dof = doc.parse_value("dof")?.unwrap_or(DEFAULT_DOF);
            c.loss = LossKind::parse(name, dof)?;
        }
        match doc.get("batch") {
            None | Some("full") => {}
            Some(s) => {
                let n = s
                    .parse()
                    .map_err(|_| Error::config(format!("bad batch value '{s}'")))?;
                c.batch = BatchRegime::Minibatch(n);
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `max_epochs` was zero; nothing ran.
    NoEpochs,
    MaxEpochs,
    EarlyStop,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::NoEpochs => "no-epochs",
            StopReason::MaxEpochs => "max-epochs",
            StopReason::EarlyStop => "early-stop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss seen during the epoch's gradient steps.
    pub train_loss: f64,
    /// Mean validation loss after the epoch's updates.
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_loss: f64,
    pub stop: StopReason,
    /// Highest return index read while fitting, targets included.
    pub max_consumed_index: usize,
}

impl TrainHistory {
    /// `epoch,train_loss,val_loss,lr` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,lr\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{},{}", e.epoch, e.train_loss, e.val_loss, e.lr);
        }
        out
    }
}

/// A trained model with everything needed to run it forward again.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: NnModel,
    pub horizon: usize,
    pub target: TargetKind,
    pub loss: LossKind,
    /// Variance the recurrent state starts from.
    pub init_variance: f64,
    /// Return index at which the rolling stream starts.
    pub stream_start: usize,
}

impl TrainedModel {
    /// The kernel parameters as a stochastic model, for counterparts.
    pub fn as_stochastic(&self) -> Option<ModelParams> {
        match &self.model {
            NnModel::Counterpart(k) => k.params().ok(),
            NnModel::GarchLstm(_) => None,
        }
    }

    pub fn to_kv(&self) -> Result<KvDoc> {
        let mut doc = self.model.to_kv()?;
        doc.set("horizon", self.horizon)
            .set("target", self.target.as_str())
            .set("loss", self.loss.name())
            .set("init_variance", self.init_variance)
            .set("stream_start", self.stream_start);
        if let LossKind::TLoss { dof } = self.loss {
            doc.set("dof", dof);
        }
        Ok(doc)
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let target = doc.require("target")?;
        Ok(Self {
            model: NnModel::from_kv(doc)?,
            horizon: doc.require("horizon")?.parse().map_err(|_| Error::config("bad horizon"))?,
            target: TargetKind::parse(target)
                .ok_or_else(|| Error::config(format!("unknown target '{target}'")))?,
            loss: LossKind::parse(
                doc.require("loss")?,
                doc.parse_value("dof")?.unwrap_or(DEFAULT_DOF),
            )?,
            init_variance: doc.require_f64("init_variance")?,
            stream_start: doc.require("stream_start")?.parse().map_err(|_| Error::config("bad stream_start"))?,
        })
    }
}

/// Starting variance of the recurrent state: the sample variance of the
/// training returns for squared-return targets, the mean target otherwise
/// (which puts the state on the scale of the outputs).
pub fn initial_variance(train: &WindowedDataset) -> Result<f64> {
    let v = match train.target {
        TargetKind::SquaredReturn => {
            let (_, eps) = contiguous(train)?;
            sample_variance(&eps)
        }
        TargetKind::RealizedVariance => {
            train.records.iter().map(|r| r.target).sum::<f64>() / train.len() as f64
        }
    };
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::data(format!("training data has degenerate variance {v}")));
    }
    Ok(v)
}

fn contiguous(ds: &WindowedDataset) -> Result<(usize, Vec<f64>)> {
    ds.covered_returns()
        .ok_or_else(|| Error::data("dataset records are not contiguous"))
}

/// The returns each record adds to the stream: its whole window for the
/// first record, then only the newest element.
fn record_inputs(records: &[Record], first: bool) -> impl Iterator<Item = (&[f64], &Record)> {
    records.iter().enumerate().map(move |(i, r)| {
        let input = if first && i == 0 {
            &r.window[..]
        } else {
            &r.window[r.window.len() - 1..]
        };
        (input, r)
    })
}

/// Validation records whose targets end before the first test anchor.
pub fn usable_val(data: &SplitDataset) -> &[Record] {
    let test_start = data.test_start();
    let h = data.val.h;
    let n = data.val.records.iter().take_while(|r| r.anchor + h < test_start).count();
    &data.val.records[..n]
}

fn loss_err(e: Error, epoch: usize, anchor: usize) -> Error {
    match e {
        Error::Numerical { .. } => e,
        other => Error::numerical(anchor, format!("epoch {epoch}: {other}")),
    }
}

/// f64 pass: mean loss over `records` continuing from `state`.
fn eval_records(
    p: &Prepared<f64>,
    records: &[Record],
    first: bool,
    state: &mut CellState<f64>,
    loss: LossKind,
    epoch: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (input, r) in record_inputs(records, first) {
        let mut out = 0.0;
        for &e in input {
            out = p.step(e, state);
        }
        let l = step_loss(loss, r.target, out).map_err(|e| loss_err(e, epoch, r.anchor))?;
        if !l.is_finite() {
            return Err(Error::numerical(r.anchor, format!("epoch {epoch}: non-finite loss")));
        }
        total += l;
    }
    Ok(total / records.len() as f64)
}

/// Runs one gradient computation over `records` starting from `state`.
/// Returns (summed loss, gradient of the mean loss, final state).
fn grad_records(
    model: &NnModel,
    records: &[Record],
    first: bool,
    state: &CellState<f64>,
    loss: LossKind,
    epoch: usize,
) -> Result<(f64, Vec<f64>, CellState<f64>)> {
    let tape = Tape::with_capacity(records.len() * 48);
    let raw = model.raw();
    let vars = tape.vars(&raw);
    let p = model.prepare(&vars)?;
    let mut st = state.lift(vars[0]);
    let mut total = tape.constant(0.0);
    let mut sum = 0.0;
    for (input, r) in record_inputs(records, first) {
        let mut out = st.sigma_prev_sq;
        for &e in input {
            out = p.step(e, &mut st);
        }
        let l = step_loss(loss, r.target, out).map_err(|e| loss_err(e, epoch, r.anchor))?;
        if !l.value().is_finite() {
            return Err(Error::numerical(r.anchor, format!("epoch {epoch}: non-finite loss")));
        }
        sum += l.value();
        total = total + l;
    }
    let mean = total / records.len() as f64;
    let grads = mean.backward().wrt(&vars);
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::numerical(
            records.last().map(|r| r.anchor).unwrap_or(0),
            format!("epoch {epoch}: non-finite gradient for raw parameter {i}"),
        ));
    }
    Ok((sum, grads, st.to_f64()))
}

/// Trains `model` on `data.train`, selecting the epoch with the lowest
/// validation loss. Returns that checkpoint and the full history.
pub fn train(model: &NnModel, data: &SplitDataset, cfg: &TrainConfig) -> Result<(TrainedModel, TrainHistory)> {
    cfg.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::data("training needs non-empty train and validation sets"));
    }
    if data.train.h != cfg.horizon {
        return Err(Error::config(format!(
            "dataset horizon {} does not match configured horizon {}",
            data.train.h, cfg.horizon
        )));
    }
    let val = usable_val(data);
    if val.is_empty() {
        return Err(Error::data("no validation record ends before the test period"));
    }
    let h = cfg.horizon;
    let max_consumed = val.last().map(|r| r.anchor + h).unwrap_or(0);
    let max_consumed = max_consumed.max(data.train.last_anchor().unwrap_or(0) + h);
    data.check_no_leakage(max_consumed)?;

    let s0 = initial_variance(&data.train)?;
    let (stream_start, _) = contiguous(&data.train)?;
    let train_recs = &data.train.records;

    let mut current = model.clone();
    current.prepared()?;
    let mut best = current.clone();
    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: None,
        best_val_loss: f64::INFINITY,
        stop: StopReason::NoEpochs,
        max_consumed_index: max_consumed,
    };
    let finish = |best: NnModel, history| {
        (
            TrainedModel {
                model: best,
                horizon: h,
                target: data.train.target,
                loss: cfg.loss,
                init_variance: s0,
                stream_start,
            },
            history,
        )
    };
    if cfg.max_epochs == 0 {
        return Ok(finish(best, history));
    }

    let mut adam = AdamState::new(current.raw().len());
    let mut lr = cfg.lr;
    let mut since_best = 0usize;
    let mut since_cut = 0usize;
    history.stop = StopReason::MaxEpochs;

    for epoch in 0..cfg.max_epochs {
        let start_state = current.prepared()?.initial_state(s0);
        let train_loss = match cfg.batch {
            BatchRegime::FullSequence => {
                let (sum, grads, _) = grad_records(&current, train_recs, true, &start_state, cfg.loss, epoch)?;
                let prev = current.raw();
                let mut raw = prev.clone();
                adam_step(&mut raw, &grads, &mut adam, lr, &cfg.adam);
                current.set_raw(&raw);
                current.project_feasible(&prev);
                sum / train_recs.len() as f64
            }
            BatchRegime::Minibatch(size) => {
                let mut state = start_state;
                let mut sum = 0.0;
                for (b, chunk) in train_recs.chunks(size).enumerate() {
                    let (s, grads, next) = grad_records(&current, chunk, b == 0, &state, cfg.loss, epoch)?;
                    sum += s;
                    state = next;
                    let prev = current.raw();
                    let mut raw = prev.clone();
                    adam_step(&mut raw, &grads, &mut adam, lr, &cfg.adam);
                    current.set_raw(&raw);
                    current.project_feasible(&prev);
                }
                sum / train_recs.len() as f64
            }
        };

        let p = current.prepared()?;
        let mut state = p.initial_state(s0);
        eval_records(&p, train_recs, true, &mut state, cfg.loss, epoch)?;
        let val_loss = eval_records(&p, val, false, &mut state, cfg.loss, epoch)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
        });

        let threshold = history.best_val_loss - cfg.min_rel_improvement * history.best_val_loss.abs();
        if val_loss < threshold || history.best_epoch.is_none() {
            history.best_val_loss = val_loss;
            history.best_epoch = Some(epoch);
            best = current.clone();
            since_best = 0;
            since_cut = 0;
        } else {
            since_best += 1;
            since_cut += 1;
            if since_best >= cfg.early_stop_patience {
                history.stop = StopReason::EarlyStop;
                break;
            }
            if since_cut >= cfg.plateau_patience {
                lr *= cfg.plateau_factor;
                since_cut = 0;
            }
        }
    }
    Ok(finish(best, history))
}

/// Trains once per learning rate of [`lr_grid`] and keeps the run with the
/// lowest best validation loss (earliest on ties). Also returns every
/// `(lr, best val loss)` pair.
pub fn train_grid(
    model: &NnModel,
    data: &SplitDataset,
    cfg: &TrainConfig,
) -> Result<(TrainedModel, TrainHistory, Vec<(f64, f64)>)> {
    use rayon::prelude::*;
    let runs: Vec<Result<(f64, TrainedModel, TrainHistory)>> = lr_grid()
        .par_iter()
        .map(|&lr| {
            let c = TrainConfig { lr, ..*cfg };
            train(model, data, &c).map(|(m, h)| (lr, m, h))
        })
        .collect();
    let mut scores = Vec::new();
    let mut best: Option<(TrainedModel, TrainHistory)> = None;
    for run in runs {
        let (lr, m, h) = run?;
        scores.push((lr, h.best_val_loss));
        let better = match &best {
            None => true,
            Some((_, bh)) => h.best_val_loss < bh.best_val_loss,
        };
        if better {
            best = Some((m, h));
        }
    }
    let (m, h) = best.expect("grid is non-empty");
    Ok((m, h, scores))
}

/// Model outputs after consuming each record's anchor return, for every
/// record of `train`, `val` and `test` in one continuous f64 pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingOutputs {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
    pub test: Vec<f64>,
    /// FIGARCH lag windows after each test anchor (empty for other kernels).
    pub test_windows: Vec<Vec<f64>>,
}

pub fn rolling_outputs(trained: &TrainedModel, data: &SplitDataset) -> Result<RollingOutputs> {
    let p = trained.model.prepared()?;
    let mut state = p.initial_state(trained.init_variance);
    let (start, _) = contiguous(&data.train)?;
    if start != trained.stream_start {
        return Err(Error::data(format!(
            "dataset stream starts at {start}, model was trained from {}",
            trained.stream_start
        )));
    }
    let mut run = |records: &[Record], first: bool, windows: Option<&mut Vec<Vec<f64>>>| {
        let mut out = Vec::with_capacity(records.len());
        let mut windows = windows;
        for (input, _) in record_inputs(records, first) {
            let mut o = 0.0;
            for &e in input {
                o = p.step(e, &mut state);
            }
            out.push(o);
            if let Some(w) = windows.as_deref_mut() {
                w.push(state.eps_sq_window.clone());
            }
        }
        out
    };
    let train = run(&data.train.records, true, None);
    let val = run(&data.val.records, false, None);
    let mut test_windows = Vec::new();
    let test = run(&data.test.records, false, Some(&mut test_windows));
    if let Some(i) = test.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::numerical(data.test.records[i].anchor, "non-positive forecast"));
    }
    Ok(RollingOutputs {
        train,
        val,
        test,
        test_windows,
    })
}
