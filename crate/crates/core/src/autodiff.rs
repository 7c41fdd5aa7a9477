//! Reverse-mode differentiation over scalar computation graphs.
//!
//! Values are computed eagerly while each primitive records its inputs and
//! local partial derivatives on a [`Tape`]. [`Var::backward`] then walks the
//! tape once in reverse, accumulating adjoints. Nodes are appended in
//! evaluation order, so every node's inputs precede it.
//!
//! ```
//! use garchnn::autodiff::Tape;
//!
//! let tape = Tape::new();
//! let x = tape.var(3.0);
//! let y = x * x;
//! let grads = y.backward();
//! assert_eq!(y.value(), 9.0);
//! assert_eq!(grads.get(&x), 6.0);
//! ```
//!
//! Model code is written once against the [`Real`] trait and runs either on
//! plain `f64` (inference) or on [`Var`] (training). Both paths evaluate the
//! same floating-point expressions, so values agree bit for bit.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Primitive operations a tape can record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    /// Input variable or constant.
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Log,
    Exp,
    Tanh,
    Sqrt,
    Sigmoid,
    Softplus,
    Abs,
    /// Integer power `x^n`.
    Powi(i32),
    /// Weighted sum `Σ wᵢ·cᵢ` of variables against constants.
    Dot,
}

#[derive(Debug, Clone, Copy)]
enum Deps {
    None,
    One(usize, f64),
    Two(usize, f64, usize, f64),
    /// Range into the tape's auxiliary parent list.
    Many(usize, usize),
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Primitive,
    deps: Deps,
    requires_grad: bool,
}

#[derive(Default)]
struct TapeInner {
    nodes: Vec<Node>,
    extra: Vec<(usize, f64)>,
}

/// Append-only record of a computation.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<TapeInner>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize) -> Self {
        Self {
            inner: RefCell::new(TapeInner {
                nodes: Vec::with_capacity(nodes),
                extra: Vec::new(),
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, op: Primitive, deps: Deps, value: f64) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let requires_grad = match deps {
            Deps::None => false,
            Deps::One(a, _) => inner.nodes[a].requires_grad,
            Deps::Two(a, _, b, _) => inner.nodes[a].requires_grad || inner.nodes[b].requires_grad,
            Deps::Many(s, l) => inner.extra[s..s + l]
                .iter()
                .any(|&(p, _)| inner.nodes[p].requires_grad),
        };
        let index = inner.nodes.len();
        inner.nodes.push(Node {
            op,
            deps,
            requires_grad,
        });
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// A differentiable input.
    pub fn var(&self, value: f64) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let index = inner.nodes.len();
        inner.nodes.push(Node {
            op: Primitive::Leaf,
            deps: Deps::None,
            requires_grad: true,
        });
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(Primitive::Leaf, Deps::None, value)
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    /// Records `primitive` applied to `inputs`. Binary primitives take two
    /// inputs, unary ones take one; `Dot` is not available here since it
    /// mixes variables with constants (see [`Tape::dot`]).
    pub fn record<'t>(&'t self, primitive: Primitive, inputs: &[Var<'t>]) -> Result<Var<'t>> {
        let arity = |n: usize| {
            if inputs.len() == n {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "{primitive:?} expects {n} input(s), got {}",
                    inputs.len()
                )))
            }
        };
        match primitive {
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div => {
                arity(2)?;
                let (x, y) = (inputs[0], inputs[1]);
                Ok(match primitive {
                    Primitive::Add => x + y,
                    Primitive::Sub => x - y,
                    Primitive::Mul => x * y,
                    _ => x / y,
                })
            }
            Primitive::Leaf | Primitive::Dot => Err(Error::config(format!(
                "{primitive:?} cannot be recorded from inputs"
            ))),
            unary => {
                arity(1)?;
                let x = inputs[0];
                match unary {
                    Primitive::Neg => Ok(-x),
                    Primitive::Log => x.ln(),
                    Primitive::Exp => Ok(x.exp()),
                    Primitive::Tanh => Ok(x.tanh()),
                    Primitive::Sqrt => x.sqrt(),
                    Primitive::Sigmoid => Ok(x.sigmoid()),
                    Primitive::Softplus => Ok(x.softplus()),
                    Primitive::Abs => Ok(x.abs()),
                    Primitive::Powi(n) => Ok(x.powi(n)),
                    _ => unreachable!(),
                }
            }
        }
    }

    /// `Σ weights[i] · values[i]`, accumulated left to right from zero.
    pub fn dot<'t>(&'t self, weights: &[Var<'t>], values: &[f64]) -> Var<'t> {
        assert_eq!(weights.len(), values.len(), "dot length mismatch");
        let mut acc = 0.0;
        for (w, &c) in weights.iter().zip(values) {
            acc += w.value * c;
        }
        let start = {
            let mut inner = self.inner.borrow_mut();
            let start = inner.extra.len();
            inner
                .extra
                .extend(weights.iter().zip(values).map(|(w, &c)| (w.index, c)));
            start
        };
        self.push(Primitive::Dot, Deps::Many(start, weights.len()), acc)
    }

    /// Primitive recorded at `index`, for inspection.
    pub fn primitive(&self, index: usize) -> Option<Primitive> {
        self.inner.borrow().nodes.get(index).map(|n| n.op)
    }

    fn backward_from(&self, output: usize) -> Gradients {
        let inner = self.inner.borrow();
        let mut adj = vec![0.0; inner.nodes.len()];
        adj[output] = 1.0;
        for i in (0..=output).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let node = &inner.nodes[i];
            if !node.requires_grad {
                continue;
            }
            match node.deps {
                Deps::None => {}
                Deps::One(a, da) => adj[a] += g * da,
                Deps::Two(a, da, b, db) => {
                    adj[a] += g * da;
                    adj[b] += g * db;
                }
                Deps::Many(s, l) => {
                    for &(p, dp) in &inner.extra[s..s + l] {
                        adj[p] += g * dp;
                    }
                }
            }
        }
        let requires: Vec<bool> = inner.nodes.iter().map(|n| n.requires_grad).collect();
        Gradients { adj, requires }
    }
}

/// Adjoints from one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    adj: Vec<f64>,
    requires: Vec<bool>,
}

impl Gradients {
    /// Gradient with respect to `v`; zero for constants and for nodes
    /// recorded after the output.
    pub fn get(&self, v: &Var<'_>) -> f64 {
        match (self.adj.get(v.index), self.requires.get(v.index)) {
            (Some(&g), Some(true)) => g,
            _ => 0.0,
        }
    }

    pub fn wrt(&self, vars: &[Var<'_>]) -> Vec<f64> {
        vars.iter().map(|v| self.get(v)).collect()
    }
}

/// Scalar living on a tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
    value: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{}, {})", self.index, self.value)
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.inner.borrow().nodes[self.index].requires_grad
    }

    pub fn backward(&self) -> Gradients {
        self.tape.backward_from(self.index)
    }

    fn same_tape(&self, other: &Var<'t>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "variables belong to different tapes"
        );
    }

    fn unary(self, op: Primitive, value: f64, partial: f64) -> Var<'t> {
        self.tape.push(op, Deps::One(self.index, partial), value)
    }

    pub fn ln(self) -> Result<Var<'t>> {
        if self.value <= 0.0 || self.value.is_nan() {
            return Err(Error::Domain {
                op: "log",
                value: self.value,
            });
        }
        Ok(self.unary(Primitive::Log, self.value.ln(), 1.0 / self.value))
    }

    pub fn sqrt(self) -> Result<Var<'t>> {
        if self.value < 0.0 || self.value.is_nan() {
            return Err(Error::Domain {
                op: "sqrt",
                value: self.value,
            });
        }
        let s = self.value.sqrt();
        // d/dx sqrt at 0 is unbounded; treat it as zero to keep adjoints finite.
        let d = if s > 0.0 { 0.5 / s } else { 0.0 };
        Ok(self.unary(Primitive::Sqrt, s, d))
    }

    pub fn exp(self) -> Var<'t> {
        let e = self.value.exp();
        self.unary(Primitive::Exp, e, e)
    }

    pub fn tanh(self) -> Var<'t> {
        let t = self.value.tanh();
        self.unary(Primitive::Tanh, t, 1.0 - t * t)
    }

    pub fn sigmoid(self) -> Var<'t> {
        let s = sigmoid(self.value);
        self.unary(Primitive::Sigmoid, s, s * (1.0 - s))
    }

    pub fn softplus(self) -> Var<'t> {
        self.unary(
            Primitive::Softplus,
            softplus(self.value),
            sigmoid(self.value),
        )
    }

    pub fn abs(self) -> Var<'t> {
        let d = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(Primitive::Abs, self.value.abs(), d)
    }

    pub fn powi(self, n: i32) -> Var<'t> {
        let d = if n == 0 {
            0.0
        } else {
            n as f64 * self.value.powi(n - 1)
        };
        self.unary(Primitive::Powi(n), self.value.powi(n), d)
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + eˣ)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(&rhs);
        self.tape.push(
            Primitive::Add,
            Deps::Two(self.index, 1.0, rhs.index, 1.0),
            self.value + rhs.value,
        )
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(&rhs);
        self.tape.push(
            Primitive::Sub,
            Deps::Two(self.index, 1.0, rhs.index, -1.0),
            self.value - rhs.value,
        )
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(&rhs);
        self.tape.push(
            Primitive::Mul,
            Deps::Two(self.index, rhs.value, rhs.index, self.value),
            self.value * rhs.value,
        )
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(&rhs);
        let q = self.value / rhs.value;
        self.tape.push(
            Primitive::Div,
            Deps::Two(self.index, 1.0 / rhs.value, rhs.index, -q / rhs.value),
            q,
        )
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(Primitive::Neg, -self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.unary(Primitive::Add, self.value + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.unary(Primitive::Sub, self.value - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.unary(Primitive::Mul, self.value * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        self.unary(Primitive::Div, self.value / rhs, 1.0 / rhs)
    }
}

/// Scalar arithmetic shared by `f64` and [`Var`].
pub trait Real:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    /// A constant in the same context as `self`.
    fn lift(&self, c: f64) -> Self;
    fn ln(self) -> Result<Self>;
    fn sqrt(self) -> Result<Self>;
    fn exp(self) -> Self;
    fn tanh(self) -> Self;
    fn sigmoid(self) -> Self;
    fn softplus(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;
    /// `Σ weights[i] · values[i]` accumulated left to right from zero.
    fn dot(weights: &[Self], values: &[f64]) -> Self;
}

impl Real for f64 {
    fn value(&self) -> f64 {
        *self
    }

    fn lift(&self, c: f64) -> f64 {
        c
    }

    fn ln(self) -> Result<f64> {
        if self <= 0.0 || self.is_nan() {
            return Err(Error::Domain {
                op: "log",
                value: self,
            });
        }
        Ok(f64::ln(self))
    }

    fn sqrt(self) -> Result<f64> {
        if self < 0.0 || self.is_nan() {
            return Err(Error::Domain {
                op: "sqrt",
                value: self,
            });
        }
        Ok(f64::sqrt(self))
    }

    fn exp(self) -> f64 {
        f64::exp(self)
    }

    fn tanh(self) -> f64 {
        f64::tanh(self)
    }

    fn sigmoid(self) -> f64 {
        sigmoid(self)
    }

    fn softplus(self) -> f64 {
        softplus(self)
    }

    fn abs(self) -> f64 {
        f64::abs(self)
    }

    fn powi(self, n: i32) -> f64 {
        f64::powi(self, n)
    }

    fn dot(weights: &[f64], values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (w, c) in weights.iter().zip(values) {
            acc += w * c;
        }
        acc
    }
}

impl<'t> Real for Var<'t> {
    fn value(&self) -> f64 {
        self.value
    }

    fn lift(&self, c: f64) -> Self {
        self.tape.constant(c)
    }

    fn ln(self) -> Result<Self> {
        Var::ln(self)
    }

    fn sqrt(self) -> Result<Self> {
        Var::sqrt(self)
    }

    fn exp(self) -> Self {
        Var::exp(self)
    }

    fn tanh(self) -> Self {
        Var::tanh(self)
    }

    fn sigmoid(self) -> Self {
        Var::sigmoid(self)
    }

    fn softplus(self) -> Self {
        Var::softplus(self)
    }

    fn abs(self) -> Self {
        Var::abs(self)
    }

    fn powi(self, n: i32) -> Self {
        Var::powi(self, n)
    }

    fn dot(weights: &[Self], values: &[f64]) -> Self {
        weights
            .first()
            .expect("dot of an empty weight vector")
            .tape
            .dot(weights, values)
    }
}
