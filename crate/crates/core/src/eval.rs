//! Forecast accuracy metrics and Value-at-Risk backtests.

use std::fmt::Write as _;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::forecast::ForecastSeries;
use crate::timeseries::VolSeries;

/// One-day 5% VaR multiplier under a normal reading.
pub const VAR_MULTIPLIER: f64 = 1.65;

/// Scale on which errors are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricScale {
    /// Volatility `σ`: square roots of the variance values.
    #[default]
    Volatility,
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mae: f64,
    pub mse: f64,
    pub n: usize,
}

/// MAE and MSE between aligned forecasts and truths, both already on the
/// chosen scale.
pub fn error_metrics(forecast: &[f64], truth: &[f64]) -> Result<Metrics> {
    if forecast.len() != truth.len() {
        return Err(Error::data(format!(
            "length mismatch: {} forecasts, {} truths",
            forecast.len(),
            truth.len()
        )));
    }
    if forecast.is_empty() {
        return Err(Error::data("no aligned forecast/truth pairs"));
    }
    let n = forecast.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (f, t) in forecast.iter().zip(truth) {
        let d = f - t;
        abs += d.abs();
        sq += d * d;
    }
    Ok(Metrics {
        mae: abs / n,
        mse: sq / n,
        n: forecast.len(),
    })
}

/// Compares each forecast for `anchor + h` with the realized volatility at
/// that index.
pub fn evaluate(forecasts: &ForecastSeries, truth: &VolSeries, scale: MetricScale) -> Result<Metrics> {
    let mut f = Vec::with_capacity(forecasts.len());
    let mut t = Vec::with_capacity(forecasts.len());
    for (a, s) in forecasts.anchors.iter().zip(&forecasts.sigma_hat_sq) {
        if let Some(v) = truth.sigma_sq_at(a + forecasts.horizon) {
            match scale {
                MetricScale::Volatility => {
                    f.push(s.sqrt());
                    t.push(v.sqrt());
                }
                MetricScale::Variance => {
                    f.push(*s);
                    t.push(v);
                }
            }
        }
    }
    error_metrics(&f, &t)
}

/// One row of a metric table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub model: String,
    pub horizon: usize,
    pub metrics: Metrics,
}

/// Per-(model, horizon) table in the order rows were added.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

/// Conventional labels of the evaluated horizons.
pub fn horizon_label(h: usize) -> String {
    match h {
        1 => "1D".into(),
        3 => "3D".into(),
        5 => "1W".into(),
        10 => "2W".into(),
        21 => "1M".into(),
        _ => format!("{h}D"),
    }
}

impl MetricReport {
    pub fn push(&mut self, model: impl Into<String>, horizon: usize, metrics: Metrics) {
        self.rows.push(MetricRow {
            model: model.into(),
            horizon,
            metrics,
        });
    }

    /// `model,horizon,label,mae,mse,n` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,horizon,label,mae,mse,n\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.model,
                r.horizon,
                horizon_label(r.horizon),
                r.metrics.mae,
                r.metrics.mse,
                r.metrics.n
            );
        }
        out
    }
}

/// `(+m·σ̂, −m·σ̂)` limits for each forecast.
pub fn var_limits(sigma_hat: &[f64], multiplier: f64) -> (Vec<f64>, Vec<f64>) {
    let upper = sigma_hat.iter().map(|s| multiplier * s).collect();
    let lower = sigma_hat.iter().map(|s| -multiplier * s).collect();
    (upper, lower)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarReport {
    /// Nominal one-sided tail probability.
    pub level: f64,
    pub multiplier: f64,
    pub upper_count: usize,
    pub lower_count: usize,
    pub n: usize,
    pub upper_rate: f64,
    pub lower_rate: f64,
    pub total_rate: f64,
}

impl VarReport {
    pub fn to_csv(&self) -> String {
        format!(
            "level,multiplier,n,upper_count,lower_count,upper_rate,lower_rate,total_rate\n{},{},{},{},{},{},{},{}\n",
            self.level,
            self.multiplier,
            self.n,
            self.upper_count,
            self.lower_count,
            self.upper_rate,
            self.lower_rate,
            self.total_rate
        )
    }
}

/// Counts returns strictly above `upper` and strictly below `lower`.
pub fn var_violations(returns: &[f64], upper: &[f64], lower: &[f64], multiplier: f64) -> Result<VarReport> {
    if returns.len() != upper.len() || returns.len() != lower.len() {
        return Err(Error::data("returns and VaR limits are not aligned"));
    }
    if returns.is_empty() {
        return Err(Error::data("no returns to backtest"));
    }
    let mut up = 0;
    let mut lo = 0;
    for ((r, u), l) in returns.iter().zip(upper).zip(lower) {
        if r > u {
            up += 1;
        }
        if r < l {
            lo += 1;
        }
    }
    let n = returns.len();
    Ok(VarReport {
        level: 0.05,
        multiplier,
        upper_count: up,
        lower_count: lo,
        n,
        upper_rate: up as f64 / n as f64,
        lower_rate: lo as f64 / n as f64,
        total_rate: (up + lo) as f64 / n as f64,
    })
}

/// `date,return,upper,lower,breach` rows for plotting.
pub fn var_trace_csv(dates: &[NaiveDate], returns: &[f64], upper: &[f64], lower: &[f64]) -> String {
    let mut out = String::from("date,return,upper,lower,breach\n");
    for i in 0..returns.len() {
        let breach = if returns[i] > upper[i] {
            "upper"
        } else if returns[i] < lower[i] {
            "lower"
        } else {
            "none"
        };
        let _ = writeln!(out, "{},{},{},{},{}", dates[i], returns[i], upper[i], lower[i], breach);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{realized_volatility, ReturnSeries};

    #[test]
    fn perfect_and_offset_forecasts() {
        let t = [1.0, 2.0, 0.5];
        let m = error_metrics(&t, &t).unwrap();
        assert_eq!((m.mae, m.mse), (0.0, 0.0));
        let f: Vec<f64> = t.iter().map(|x| x + 0.3).collect();
        let m = error_metrics(&f, &t).unwrap();
        assert!((m.mae - 0.3).abs() < 1e-15);
        assert!((m.mse - 0.09).abs() < 1e-15);
    }

    #[test]
    fn three_point_hand_example() {
        // errors 0.5, −1, 0 → MAE 0.5, MSE 1.25/3
        let m = error_metrics(&[1.5, 1.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((m.mae - 0.5).abs() < 1e-15);
        assert!((m.mse - 1.25 / 3.0).abs() < 1e-15);
        assert!(error_metrics(&[], &[]).is_err());
    }

    #[test]
    fn evaluate_aligns_on_target_index() {
        let r = ReturnSeries::from_values(vec![1.0, 2.0, 2.0, 1.0, 3.0, 1.0]).unwrap();
        let vol = realized_volatility(&r, 2).unwrap();
        // anchor 2, h 1 → vol at 3 = 2² + 1² = 5
        let fc = ForecastSeries {
            horizon: 1,
            anchors: vec![2, 3],
            timestamps: r.timestamps()[2..4].to_vec(),
            sigma_hat_sq: vec![5.0, 10.0],
        };
        let m = evaluate(&fc, &vol, MetricScale::Variance).unwrap();
        assert_eq!(m.n, 2);
        assert_eq!(m.mae, 0.0);
    }

    #[test]
    fn var_limit_examples() {
        assert_eq!(var_limits(&[1.0], 1.65), (vec![1.65], vec![-1.65]));
        assert_eq!(var_limits(&[0.5], 1.65), (vec![0.825], vec![-0.825]));
        assert_eq!(var_limits(&[2.0], 0.0), (vec![0.0], vec![-0.0]));
    }

    #[test]
    fn violation_counting() {
        let r = [0.0, 0.1, -0.2, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0];
        let (u, l) = var_limits(&[1.0; 10], 1.65);
        let rep = var_violations(&r, &u, &l, 1.65).unwrap();
        assert_eq!(rep.upper_rate, 0.1);
        assert_eq!(rep.lower_rate, 0.0);
        let inside = var_violations(&[0.0; 10], &u, &l, 1.65).unwrap();
        assert_eq!((inside.upper_rate, inside.lower_rate), (0.0, 0.0));
    }
}
