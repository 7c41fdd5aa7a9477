//! GARCH-LSTM cell: an LSTM whose output gate is a GARCH kernel and whose
//! memory multiplicatively modulates the kernel output.
//!
//! ```text
//! f_t = σ(W_f ε_{t−1} + U_f σ²_{t−1} + b_f)
//! i_t = σ(W_i ε_{t−1} + U_i σ²_{t−1} + b_i)
//! c̃_t = tanh(W_c ε_{t−1} + U_c σ²_{t−1} + b_c)
//! c_t = f_t c_{t−1} + i_t c̃_t
//! o_t = K(ε_{t−1}, σ²_{t−1})
//! σ²_t = o_t (1 + w tanh(c_t))
//! ```

use super::kernel::{CellState, GarchKernel, KernelParams};
use super::transform::{inverse_logistic, logistic};
use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::garch::ModelParams;

/// Number of gate scalars `W_f, U_f, b_f, W_i, U_i, b_i, W_c, U_c, b_c`.
pub const N_GATES: usize = 9;

pub const GATE_NAMES: [&str; N_GATES] = ["w_f", "u_f", "b_f", "w_i", "u_i", "b_i", "w_c", "u_c", "b_c"];

/// Starting blend weight.
pub const DEFAULT_BLEND: f64 = 0.1;

/// How the blend weight `w` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Blend {
    /// `w = logistic(raw)`, trained with everything else.
    Learned,
    /// Held at a constant in `[0, 1)`; its raw coordinate is ignored.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarchLstm {
    pub kernel: GarchKernel,
    pub gates: [f64; N_GATES],
    pub w_raw: f64,
    pub blend: Blend,
}

/// Constrained cell parameters on `f64` or on a tape.
#[derive(Debug, Clone)]
pub struct GarchLstmParams<T> {
    pub kernel: KernelParams<T>,
    pub gates: [T; N_GATES],
    pub w: T,
}

impl GarchLstm {
    /// Gates at zero, `w ≈ 0.1`, kernel at `kernel`.
    pub fn new(kernel: &ModelParams) -> Self {
        Self {
            kernel: GarchKernel::from_params(kernel),
            gates: [0.0; N_GATES],
            w_raw: inverse_logistic(DEFAULT_BLEND),
            blend: Blend::Learned,
        }
    }

    pub fn with_blend(mut self, blend: Blend) -> Self {
        self.blend = blend;
        self
    }

    pub fn n_raw(&self) -> usize {
        self.kernel.raw.len() + N_GATES + 1
    }

    /// Kernel raw coordinates, then gates, then the blend coordinate.
    pub fn raw(&self) -> Vec<f64> {
        let mut r = self.kernel.raw.clone();
        r.extend_from_slice(&self.gates);
        r.push(self.w_raw);
        r
    }

    pub fn set_raw(&mut self, raw: &[f64]) {
        let nk = self.kernel.raw.len();
        self.kernel.raw.copy_from_slice(&raw[..nk]);
        self.gates.copy_from_slice(&raw[nk..nk + N_GATES]);
        self.w_raw = raw[nk + N_GATES];
    }

    pub fn blend_weight(&self) -> f64 {
        match self.blend {
            Blend::Learned => logistic(self.w_raw),
            Blend::Fixed(w) => w,
        }
    }

    pub fn prepare<T: Real>(&self, raw: &[T]) -> Result<GarchLstmParams<T>> {
        if raw.len() != self.n_raw() {
            return Err(Error::params(format!(
                "expected {} raw parameters, got {}",
                self.n_raw(),
                raw.len()
            )));
        }
        let nk = self.kernel.raw.len();
        let kernel = self.kernel.prepare(&raw[..nk])?;
        let mut gates = [raw[0]; N_GATES];
        gates.copy_from_slice(&raw[nk..nk + N_GATES]);
        let w = match self.blend {
            Blend::Learned => logistic(raw[nk + N_GATES]),
            Blend::Fixed(w) => {
                if !(0.0..1.0).contains(&w) {
                    return Err(Error::params(format!("blend weight {w} outside [0, 1)")));
                }
                raw[0].lift(w)
            }
        };
        Ok(GarchLstmParams { kernel, gates, w })
    }
}

/// One cell update. Updates `c_prev`, the FIGARCH lag window and
/// `sigma_prev_sq` in `state` and returns `σ²_t`.
pub fn garch_lstm_step<T: Real>(p: &GarchLstmParams<T>, eps_prev: f64, state: &mut CellState<T>) -> T {
    let g = &p.gates;
    let s = state.sigma_prev_sq;
    let f = (g[0] * eps_prev + g[1] * s + g[2]).sigmoid();
    let i = (g[3] * eps_prev + g[4] * s + g[5]).sigmoid();
    let cand = (g[6] * eps_prev + g[7] * s + g[8]).tanh();
    let c = f * state.c_prev + i * cand;
    let o = p.kernel.step(eps_prev, state);
    let sigma_sq = o * (c.tanh() * p.w + 1.0);
    state.c_prev = c;
    state.sigma_prev_sq = sigma_sq;
    sigma_sq
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::garch::{Garch11Params, GjrParams};

    fn state(s: f64) -> CellState<f64> {
        CellState::new(s, 0)
    }

    #[test]
    fn zero_blend_is_the_kernel() {
        let kp = ModelParams::Gjr(GjrParams::new(0.1, 0.1, 0.2, 0.5).unwrap());
        let mut cell = GarchLstm::new(&kp).with_blend(Blend::Fixed(0.0));
        cell.gates = [0.3, -1.2, 0.5, 2.0, 0.1, -0.4, 1.5, 0.7, 0.2];
        let p = cell.prepare(&cell.raw()).unwrap();
        let k = KernelParams::from_model(&kp).unwrap();
        let mut a = state(1.3);
        let mut b = state(1.3);
        for e in [0.5, -1.0, 2.0, -0.1] {
            let x = garch_lstm_step(&p, e, &mut a);
            let y = k.step(e, &mut b);
            b.sigma_prev_sq = y;
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn zero_candidate_keeps_memory_empty() {
        let kp = ModelParams::Garch11(Garch11Params::new(0.1, 0.2, 0.7).unwrap());
        let mut cell = GarchLstm::new(&kp);
        cell.gates = [0.3, -1.2, 0.5, 2.0, 0.1, -0.4, 0.0, 0.0, 0.0];
        let p = cell.prepare(&cell.raw()).unwrap();
        let mut s = state(1.0);
        let out = garch_lstm_step(&p, 1.0, &mut s);
        assert_eq!(s.c_prev, 0.0);
        assert!((out - 1.0).abs() < 1e-15);
    }

    #[test]
    fn output_increases_with_memory() {
        let kp = ModelParams::Garch11(Garch11Params::new(0.1, 0.2, 0.7).unwrap());
        let cell = GarchLstm::new(&kp);
        let p = cell.prepare(&cell.raw()).unwrap();
        let mut prev = 0.0;
        for c in [-3.0, -1.0, 0.0, 0.5, 2.0] {
            let mut s = state(1.0);
            s.c_prev = c;
            // zero gates give f = i = 1/2 and c̃ = 0, so c_t = c/2
            let out = garch_lstm_step(&p, 1.0, &mut s);
            assert!(out > prev);
            prev = out;
        }
    }
}
