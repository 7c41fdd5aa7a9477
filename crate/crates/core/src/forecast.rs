//! Out-of-sample forecasts at the test anchors of a split dataset.
//!
//! Stochastic models forecast by iteration: after consuming `ε_t` the
//! recursion gives `σ²_{t+1}` and later days substitute `E[ε²] = σ²`.
//! Neural models are direct: a model trained for horizon `h` emits its
//! forecast right after consuming `ε_t`.
//!
//! Forecasts of a daily variance can be aggregated onto the realized
//! window `Σ_{i<k} ε²_{t+h−i}`: days up to `t` use the observed `ε²`, later
//! days use forecasts. A direct model only knows day `t+h`, so every unknown
//! day in its window is filled with that one forecast.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::garch::{forecast_path, FilterState, ModelParams};
use crate::nn::{KernelParams, Prepared};
use crate::timeseries::{SplitDataset, TargetKind};
use crate::training::{rolling_outputs, TrainedModel};

/// What a forecast is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// The raw forecast: `σ̂²_{t+h}` of a daily variance, or a direct
    /// realized-variance output.
    Daily,
    /// Daily variances summed over the trailing `k`-day window at `t+h`.
    RealizedWindow(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSeries {
    pub horizon: usize,
    pub anchors: Vec<usize>,
    pub timestamps: Vec<NaiveDate>,
    pub sigma_hat_sq: Vec<f64>,
}

impl ForecastSeries {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// `anchor,date,target_index,sigma_hat_sq,sigma_hat` rows.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("anchor,date,target_index,sigma_hat_sq,sigma_hat\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.anchors[i],
                self.timestamps[i],
                self.anchors[i] + self.horizon,
                self.sigma_hat_sq[i],
                self.sigma_hat_sq[i].sqrt()
            );
        }
        out
    }
}

/// A fitted model able to forecast.
#[derive(Debug, Clone, PartialEq)]
pub enum Forecaster {
    /// Classical recursion started at `stream_start` from `init_variance`.
    Stochastic {
        params: ModelParams,
        init_variance: f64,
        stream_start: usize,
    },
    Neural(TrainedModel),
}

/// The whole return stream covered by a split, and its first index.
pub fn split_stream(data: &SplitDataset) -> Result<(usize, Vec<f64>)> {
    let (start, mut eps) = data
        .train
        .covered_returns()
        .ok_or_else(|| Error::data("training records are not contiguous"))?;
    let mut prev = data.train.last_anchor().unwrap_or(0);
    for r in data.val.records.iter().chain(&data.test.records) {
        if r.anchor != prev + 1 {
            return Err(Error::data("split partitions are not contiguous"));
        }
        eps.push(*r.window.last().expect("non-empty window"));
        prev = r.anchor;
    }
    Ok((start, eps))
}

fn aggregate(agg: Aggregation, h: usize, known_eps: &[f64], future: impl Fn(usize) -> f64) -> f64 {
    match agg {
        Aggregation::Daily => future(h),
        Aggregation::RealizedWindow(k) => {
            // days t+h−k+1 ..= t+h; offset j = day − t
            let mut total = 0.0;
            for j in (h as isize - k as isize + 1)..=(h as isize) {
                total += if j <= 0 {
                    let idx = known_eps.len() as isize - 1 + j;
                    if idx >= 0 {
                        let e = known_eps[idx as usize];
                        e * e
                    } else {
                        0.0
                    }
                } else {
                    future(j as usize)
                };
            }
            total
        }
    }
}

impl Forecaster {
    /// Target kind the raw outputs live on.
    pub fn output_kind(&self) -> TargetKind {
        match self {
            Forecaster::Stochastic { .. } => TargetKind::SquaredReturn,
            Forecaster::Neural(m) => m.target,
        }
    }

    /// Forecasts for every test anchor of `data` at horizon `h`.
    pub fn forecast(&self, data: &SplitDataset, h: usize, agg: Aggregation) -> Result<ForecastSeries> {
        if h == 0 {
            return Err(Error::data("horizon must be at least 1"));
        }
        if let (Aggregation::RealizedWindow(_), TargetKind::RealizedVariance) = (agg, self.output_kind()) {
            return Err(Error::config(
                "realized-variance outputs are already aggregated; use daily aggregation",
            ));
        }
        let (start, eps) = split_stream(data)?;
        let test = &data.test.records;
        let first_test = test[0].anchor - start;
        let mut values = Vec::with_capacity(test.len());
        match self {
            Forecaster::Stochastic {
                params,
                init_variance,
                stream_start,
            } => {
                if *stream_start != start {
                    return Err(Error::data(format!(
                        "model filtered from index {stream_start}, dataset starts at {start}"
                    )));
                }
                let p = Prepared::Counterpart(KernelParams::from_model(params)?);
                let mut state = p.initial_state(*init_variance);
                for (i, &e) in eps.iter().enumerate() {
                    let next = p.step(e, &mut state);
                    if i < first_test {
                        continue;
                    }
                    let fs = FilterState {
                        next_sigma_sq: next,
                        eps_sq_history: state.eps_sq_window.clone(),
                    };
                    let path = forecast_path(params, &fs, h)?;
                    values.push(aggregate(agg, h, &eps[..=i], |j| path[j - 1]));
                }
            }
            Forecaster::Neural(m) => {
                if m.horizon != h {
                    return Err(Error::config(format!(
                        "direct model trained for horizon {}, asked for {h}",
                        m.horizon
                    )));
                }
                let out = rolling_outputs(m, data)?;
                for (i, &o) in out.test.iter().enumerate() {
                    values.push(aggregate(agg, h, &eps[..=first_test + i], |_| o));
                }
            }
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::numerical(test[i].anchor, format!("forecast {}", values[i])));
        }
        Ok(ForecastSeries {
            horizon: h,
            anchors: test.iter().map(|r| r.anchor).collect(),
            timestamps: test.iter().map(|r| r.timestamp).collect(),
            sigma_hat_sq: values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::garch::{filter_series, simulate, Garch11Params, Innovation, ModelKind, VarianceInit};
    use crate::nn::NnModel;
    use crate::timeseries::{build_return_dataset, split};
    use crate::training::{train, TrainConfig};

    fn data(h: usize) -> (Vec<f64>, SplitDataset, ModelParams) {
        let p = ModelParams::Garch11(Garch11Params::new(0.1, 0.2, 0.7).unwrap());
        let sim = simulate(&p, 400, 11, Innovation::Normal).unwrap();
        let ds = build_return_dataset(&sim.returns, 5, h).unwrap();
        (sim.returns.values().to_vec(), split(&ds, (8, 1, 1)).unwrap(), p)
    }

    #[test]
    fn one_step_daily_matches_filter() {
        let (eps, d, p) = data(1);
        let f = Forecaster::Stochastic {
            params: p,
            init_variance: 1.3,
            stream_start: 0,
        };
        let fc = f.forecast(&d, 1, Aggregation::Daily).unwrap();
        let tr = filter_series(&p, &eps, VarianceInit::Fixed(1.3)).unwrap();
        for (a, s) in fc.anchors.iter().zip(&fc.sigma_hat_sq) {
            assert_eq!(*s, tr.sigma_sq[a + 1]);
        }
    }

    #[test]
    fn realized_window_adds_known_squares() {
        let (eps, d, p) = data(1);
        let f = Forecaster::Stochastic {
            params: p,
            init_variance: 1.0,
            stream_start: 0,
        };
        let daily = f.forecast(&d, 1, Aggregation::Daily).unwrap();
        let rv = f.forecast(&d, 1, Aggregation::RealizedWindow(5)).unwrap();
        for i in 0..daily.len() {
            let t = daily.anchors[i];
            let known: f64 = eps[t - 3..=t].iter().map(|e| e * e).sum();
            assert!((rv.sigma_hat_sq[i] - known - daily.sigma_hat_sq[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn counterpart_forecasts_equal_stochastic() {
        let (_, d, _) = data(1);
        let init = ModelParams::default_init(ModelKind::Garch11, 1.0);
        let cfg = TrainConfig {
            max_epochs: 3,
            ..TrainConfig::default()
        };
        let (m, _) = train(&NnModel::counterpart(&init), &d, &cfg).unwrap();
        let stoch = Forecaster::Stochastic {
            params: m.as_stochastic().unwrap(),
            init_variance: m.init_variance,
            stream_start: m.stream_start,
        };
        let a = Forecaster::Neural(m).forecast(&d, 1, Aggregation::Daily).unwrap();
        let b = stoch.forecast(&d, 1, Aggregation::Daily).unwrap();
        for (x, y) in a.sigma_hat_sq.iter().zip(&b.sigma_hat_sq) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_persistence_forecasts_omega() {
        let (_, d, _) = data(5);
        let p = ModelParams::Garch11(Garch11Params::new(0.4, 0.0, 0.0).unwrap());
        let f = Forecaster::Stochastic {
            params: p,
            init_variance: 1.0,
            stream_start: 0,
        };
        let fc = f.forecast(&d, 5, Aggregation::Daily).unwrap();
        assert!(fc.sigma_hat_sq.iter().all(|&s| s == 0.4));
    }
}
