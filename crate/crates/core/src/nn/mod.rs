//! Neural counterparts of the GARCH family and the GARCH-LSTM hybrid.
//!
//! Every model here is written once over [`Real`], so the same code runs on
//! plain `f64` (filtering, forecasting) and on a [`Tape`](crate::autodiff::Tape)
//! (training), with bit-identical forward values.

mod kernel;
mod lstm;
mod transform;

pub use kernel::{
    cnn_counterpart_step, figarch_lambda, rnn_counterpart_step, CellState, GarchKernel,
    KernelParams,
};
pub use lstm::{garch_lstm_step, Blend, GarchLstm, GarchLstmParams, DEFAULT_BLEND, GATE_NAMES, N_GATES};
pub use transform::{
    inverse_logistic, inverse_simplex, inverse_softplus, logistic, simplex, softplus,
    ConstrainedParam, Transform,
};

use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::garch::{ModelKind, ModelParams};
use crate::kv::KvDoc;

/// A trainable model: a bare kernel counterpart or a GARCH-LSTM cell.
#[derive(Debug, Clone, PartialEq)]
pub enum NnModel {
    Counterpart(GarchKernel),
    GarchLstm(GarchLstm),
}

/// Constrained parameters of an [`NnModel`], ready to run.
#[derive(Debug, Clone)]
pub enum Prepared<T> {
    Counterpart(KernelParams<T>),
    GarchLstm(GarchLstmParams<T>),
}

impl NnModel {
    pub fn counterpart(params: &ModelParams) -> Self {
        NnModel::Counterpart(GarchKernel::from_params(params))
    }

    pub fn garch_lstm(kernel: &ModelParams) -> Self {
        NnModel::GarchLstm(GarchLstm::new(kernel))
    }

    pub fn name(&self) -> &'static str {
        match self {
            NnModel::Counterpart(_) => "counterpart",
            NnModel::GarchLstm(_) => "garch-lstm",
        }
    }

    pub fn kernel(&self) -> &GarchKernel {
        match self {
            NnModel::Counterpart(k) => k,
            NnModel::GarchLstm(c) => &c.kernel,
        }
    }

    pub fn kernel_kind(&self) -> ModelKind {
        self.kernel().kind
    }

    pub fn raw(&self) -> Vec<f64> {
        match self {
            NnModel::Counterpart(k) => k.raw.clone(),
            NnModel::GarchLstm(c) => c.raw(),
        }
    }

    pub fn set_raw(&mut self, raw: &[f64]) {
        match self {
            NnModel::Counterpart(k) => k.raw.copy_from_slice(raw),
            NnModel::GarchLstm(c) => c.set_raw(raw),
        }
    }

    pub fn prepare<T: Real>(&self, raw: &[T]) -> Result<Prepared<T>> {
        Ok(match self {
            NnModel::Counterpart(k) => {
                if raw.len() != k.raw.len() {
                    return Err(Error::params(format!(
                        "expected {} raw parameters, got {}",
                        k.raw.len(),
                        raw.len()
                    )));
                }
                Prepared::Counterpart(k.prepare(raw)?)
            }
            NnModel::GarchLstm(c) => Prepared::GarchLstm(c.prepare(raw)?),
        })
    }

    /// Prepared on `f64` at the current raw values.
    pub fn prepared(&self) -> Result<Prepared<f64>> {
        self.prepare(&self.raw())
    }

    /// Restores FIGARCH weight feasibility after an optimizer step.
    pub fn project_feasible(&mut self, prev_raw: &[f64]) {
        match self {
            NnModel::Counterpart(k) => k.project_feasible(prev_raw),
            NnModel::GarchLstm(c) => {
                let nk = c.kernel.raw.len();
                c.kernel.project_feasible(&prev_raw[..nk]);
            }
        }
    }

    /// Checkpoint document: the kernel's parameter set plus model metadata
    /// and the exact raw coordinates.
    pub fn to_kv(&self) -> Result<KvDoc> {
        let mut doc = self.kernel().params()?.to_kv();
        doc.set("nn", self.name());
        if let NnModel::GarchLstm(c) = self {
            for (name, g) in GATE_NAMES.iter().zip(c.gates) {
                doc.set(name, g);
            }
            doc.set("w", c.blend_weight());
            match c.blend {
                Blend::Learned => doc.set("blend", "learned"),
                Blend::Fixed(_) => doc.set("blend", "fixed"),
            };
        }
        let raw: Vec<String> = self.raw().iter().map(|v| v.to_string()).collect();
        doc.set("raw", raw.join(","));
        Ok(doc)
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let params = ModelParams::from_kv(doc)?;
        let mut model = match doc.get("nn").unwrap_or("counterpart") {
            "counterpart" => NnModel::counterpart(&params),
            "garch-lstm" => {
                let mut cell = GarchLstm::new(&params);
                for (i, name) in GATE_NAMES.iter().enumerate() {
                    cell.gates[i] = doc.require_f64(name)?;
                }
                if doc.get("blend") == Some("fixed") {
                    cell.blend = Blend::Fixed(doc.require_f64("w")?);
                } else {
                    cell.w_raw = inverse_logistic(doc.require_f64("w")?);
                }
                NnModel::GarchLstm(cell)
            }
            other => return Err(Error::config(format!("unknown nn model '{other}'"))),
        };
        if let Some(raw) = doc.get("raw") {
            let raw = raw
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::config("bad raw parameter list"))?;
            if raw.len() != model.raw().len() {
                return Err(Error::config("raw parameter list has the wrong length"));
            }
            model.set_raw(&raw);
        }
        Ok(model)
    }
}

impl<T: Real> Prepared<T> {
    fn kernel(&self) -> &KernelParams<T> {
        match self {
            Prepared::Counterpart(k) => k,
            Prepared::GarchLstm(p) => &p.kernel,
        }
    }

    /// State before the first shock. FIGARCH starts from its kernel output on
    /// the all-zero window (`ω`); the others from `s0`.
    pub fn initial_state(&self, s0: T) -> CellState<T> {
        let k = self.kernel();
        let mut state = CellState::new(s0, k.window_len());
        if let KernelParams::Figarch { .. } = k {
            state.sigma_prev_sq = cnn_counterpart_step(k, &state);
        }
        state
    }

    /// Consumes `ε_{t−1}` and returns `σ²_t`, advancing `state`.
    pub fn step(&self, eps_prev: f64, state: &mut CellState<T>) -> T {
        match self {
            Prepared::Counterpart(k) => {
                let s = k.step(eps_prev, state);
                state.sigma_prev_sq = s;
                s
            }
            Prepared::GarchLstm(p) => garch_lstm_step(p, eps_prev, state),
        }
    }

    /// Variance trace over `eps` in the classical convention: `trace[0]` is
    /// the initial variance and `trace[t]` follows from `ε_{t−1}`.
    pub fn filter(&self, eps: &[f64], s0: T) -> Vec<T> {
        let mut state = self.initial_state(s0);
        let mut out = Vec::with_capacity(eps.len());
        if eps.is_empty() {
            return out;
        }
        out.push(state.sigma_prev_sq);
        for &e in &eps[..eps.len() - 1] {
            out.push(self.step(e, &mut state));
        }
        out
    }
}
