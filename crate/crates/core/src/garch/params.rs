use std::fmt;

use super::figarch::figarch_weights;
use crate::error::{Error, Result};
use crate::kv::KvDoc;

/// Default FIGARCH truncation size.
pub const DEFAULT_TRUNCATION: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Garch11,
    Gjr,
    Figarch,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Garch11, ModelKind::Gjr, ModelKind::Figarch];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Garch11 => "garch11",
            ModelKind::Gjr => "gjr",
            ModelKind::Figarch => "figarch",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "garch11" | "garch" | "garch(1,1)" => Ok(ModelKind::Garch11),
            "gjr" | "gjr-garch" => Ok(ModelKind::Gjr),
            "figarch" | "fi-garch" => Ok(ModelKind::Figarch),
            other => Err(Error::config(format!("unknown model kind '{other}'"))),
        }
    }

    /// Parameter names in canonical order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Garch11 => &["omega", "alpha", "beta"],
            ModelKind::Gjr => &["omega", "alpha", "lambda", "beta"],
            ModelKind::Figarch => &["omega", "beta", "phi", "d"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::params(format!("{name} must be > 0, got {v}")));
    }
    Ok(())
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::params(format!("{name} must be >= 0, got {v}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Garch11Params {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Garch11Params {
    pub fn new(omega: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { omega, alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("omega", self.omega)?;
        non_negative("alpha", self.alpha)?;
        non_negative("beta", self.beta)?;
        if self.alpha + self.beta >= 1.0 {
            return Err(Error::params(format!(
                "alpha + beta must be < 1, got {}",
                self.alpha + self.beta
            )));
        }
        Ok(())
    }

    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GjrParams {
    pub omega: f64,
    pub alpha: f64,
    /// Extra response to negative shocks.
    pub lambda: f64,
    pub beta: f64,
}

impl GjrParams {
    pub fn new(omega: f64, alpha: f64, lambda: f64, beta: f64) -> Result<Self> {
        let p = Self {
            omega,
            alpha,
            lambda,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("omega", self.omega)?;
        non_negative("alpha", self.alpha)?;
        non_negative("lambda", self.lambda)?;
        non_negative("beta", self.beta)?;
        if self.persistence() >= 1.0 {
            return Err(Error::params(format!(
                "alpha + lambda/2 + beta must be < 1, got {}",
                self.persistence()
            )));
        }
        Ok(())
    }

    /// `α + λ/2 + β`, the persistence under symmetric shocks.
    pub fn persistence(&self) -> f64 {
        self.alpha + self.lambda / 2.0 + self.beta
    }
}

/// How the FIGARCH intercept enters the recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Intercept {
    /// `ω` is added as is.
    #[default]
    Raw,
    /// `ω / (1 − β)`, the textbook FIGARCH form.
    Scaled,
}

impl Intercept {
    pub fn as_str(self) -> &'static str {
        match self {
            Intercept::Raw => "raw",
            Intercept::Scaled => "scaled",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Intercept::Raw),
            "scaled" => Ok(Intercept::Scaled),
            other => Err(Error::config(format!("unknown intercept convention '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigarchParams {
    pub omega: f64,
    pub beta: f64,
    pub phi: f64,
    /// Fractional differencing order.
    pub d: f64,
    pub truncation: usize,
    pub intercept: Intercept,
}

impl FigarchParams {
    pub fn new(omega: f64, beta: f64, phi: f64, d: f64, truncation: usize) -> Result<Self> {
        let p = Self {
            omega,
            beta,
            phi,
            d,
            truncation,
            intercept: Intercept::Raw,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_intercept(mut self, intercept: Intercept) -> Self {
        self.intercept = intercept;
        self
    }

    /// Box constraints plus non-negativity of every lag weight.
    pub fn validate(&self) -> Result<()> {
        positive("omega", self.omega)?;
        self.validate_box()?;
        figarch_weights(self.beta, self.phi, self.d, self.truncation).map(|_| ())
    }

    pub(crate) fn validate_box(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::params(format!("beta must be in [0, 1), got {}", self.beta)));
        }
        if !(0.0..1.0).contains(&self.phi) {
            return Err(Error::params(format!("phi must be in [0, 1), got {}", self.phi)));
        }
        if !(self.d > 0.0 && self.d < 1.0) {
            return Err(Error::params(format!("d must be in (0, 1), got {}", self.d)));
        }
        if self.truncation < 2 {
            return Err(Error::params("truncation must be at least 2"));
        }
        Ok(())
    }

    /// Additive intercept under the configured convention.
    pub fn effective_omega(&self) -> f64 {
        match self.intercept {
            Intercept::Raw => self.omega,
            Intercept::Scaled => self.omega / (1.0 - self.beta),
        }
    }

    pub fn weights(&self) -> Result<Vec<f64>> {
        figarch_weights(self.beta, self.phi, self.d, self.truncation)
    }
}

/// A parameter set for any of the three stochastic models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelParams {
    Garch11(Garch11Params),
    Gjr(GjrParams),
    Figarch(FigarchParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Garch11(_) => ModelKind::Garch11,
            ModelParams::Gjr(_) => ModelKind::Gjr,
            ModelParams::Figarch(_) => ModelKind::Figarch,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Garch11(p) => p.validate(),
            ModelParams::Gjr(p) => p.validate(),
            ModelParams::Figarch(p) => p.validate(),
        }
    }

    /// Values in the order of [`ModelKind::param_names`].
    pub fn values(&self) -> Vec<f64> {
        match *self {
            ModelParams::Garch11(p) => vec![p.omega, p.alpha, p.beta],
            ModelParams::Gjr(p) => vec![p.omega, p.alpha, p.lambda, p.beta],
            ModelParams::Figarch(p) => vec![p.omega, p.beta, p.phi, p.d],
        }
    }

    /// Builds a validated set from canonical-order values. `template`
    /// supplies the FIGARCH truncation and intercept convention.
    pub fn from_values(kind: ModelKind, v: &[f64], template: Option<&FigarchParams>) -> Result<Self> {
        let expected = kind.param_names().len();
        if v.len() != expected {
            return Err(Error::params(format!(
                "{kind} takes {expected} parameters, got {}",
                v.len()
            )));
        }
        Ok(match kind {
            ModelKind::Garch11 => ModelParams::Garch11(Garch11Params::new(v[0], v[1], v[2])?),
            ModelKind::Gjr => ModelParams::Gjr(GjrParams::new(v[0], v[1], v[2], v[3])?),
            ModelKind::Figarch => {
                let (t, ic) = template
                    .map(|p| (p.truncation, p.intercept))
                    .unwrap_or((DEFAULT_TRUNCATION, Intercept::Raw));
                ModelParams::Figarch(FigarchParams::new(v[0], v[1], v[2], v[3], t)?.with_intercept(ic))
            }
        })
    }

    pub fn figarch(&self) -> Option<&FigarchParams> {
        match self {
            ModelParams::Figarch(p) => Some(p),
            _ => None,
        }
    }

    /// A starting point near a persistent pure-GARCH process whose long-run
    /// variance equals `sample_var` (FIGARCH: intercept `0.1·sample_var`).
    pub fn default_init(kind: ModelKind, sample_var: f64) -> Self {
        let omega = 0.1 * sample_var.max(1e-12);
        match kind {
            ModelKind::Garch11 => ModelParams::Garch11(Garch11Params {
                omega,
                alpha: 0.05,
                beta: 0.85,
            }),
            ModelKind::Gjr => ModelParams::Gjr(GjrParams {
                omega,
                alpha: 0.03,
                lambda: 0.04,
                beta: 0.85,
            }),
            ModelKind::Figarch => ModelParams::Figarch(FigarchParams {
                omega,
                beta: 0.4,
                phi: 0.2,
                d: 0.4,
                truncation: DEFAULT_TRUNCATION,
                intercept: Intercept::Raw,
            }),
        }
    }

    /// Long-run variance implied by the (truncated) recursion.
    pub fn unconditional_variance(&self) -> Result<f64> {
        let v = match self {
            ModelParams::Garch11(p) => p.omega / (1.0 - p.persistence()),
            ModelParams::Gjr(p) => p.omega / (1.0 - p.persistence()),
            ModelParams::Figarch(p) => {
                let total: f64 = p.weights()?.iter().sum();
                if total >= 1.0 {
                    return Err(Error::params("FIGARCH lag weights sum to 1 or more"));
                }
                p.effective_omega() / (1.0 - total)
            }
        };
        Ok(v)
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set("model", self.kind());
        for (name, v) in self.kind().param_names().iter().zip(self.values()) {
            doc.set(name, v);
        }
        if let ModelParams::Figarch(p) = self {
            doc.set("truncation", p.truncation);
            doc.set("intercept", p.intercept.as_str());
        }
        doc
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let kind = ModelKind::parse(doc.require("model")?)?;
        let values = kind
            .param_names()
            .iter()
            .map(|n| doc.require_f64(n))
            .collect::<Result<Vec<_>>>()?;
        let template = if kind == ModelKind::Figarch {
            let truncation = doc.parse_value("truncation")?.unwrap_or(DEFAULT_TRUNCATION);
            let intercept = match doc.get("intercept") {
                Some(s) => Intercept::parse(s)?,
                None => Intercept::Raw,
            };
            Some(FigarchParams {
                omega: 1.0,
                beta: 0.0,
                phi: 0.0,
                d: 0.5,
                truncation,
                intercept,
            })
        } else {
            None
        };
        Self::from_values(kind, &values, template.as_ref())
    }
}
