//! Price ingestion and construction of the supervised volatility dataset.
//!
//! Returns are scaled log differences of daily closes. Realized volatility at
//! `t` is the root of the sum of the `k` most recent squared returns, and each
//! dataset record pairs the window `(ε_{t-k+1}, …, ε_t)` with a target at
//! `t + h`.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Weekday};

use crate::error::{Error, Result};

/// Default multiplier applied to log returns.
pub const DEFAULT_SCALE: f64 = 100.0;
/// Default realized-volatility window.
pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    timestamps: Vec<NaiveDate>,
    closes: Vec<f64>,
}

impl PriceSeries {
    /// Builds a series, sorting by date. Rejects duplicates, non-finite or
    /// non-positive closes, and series shorter than two points.
    pub fn new(timestamps: Vec<NaiveDate>, closes: Vec<f64>) -> Result<Self> {
        if timestamps.len() != closes.len() {
            return Err(Error::data(format!(
                "{} dates but {} closes",
                timestamps.len(),
                closes.len()
            )));
        }
        if closes.len() < 2 {
            return Err(Error::data("price series needs at least 2 rows"));
        }
        for (d, &c) in timestamps.iter().zip(&closes) {
            if !c.is_finite() {
                return Err(Error::data(format!("non-finite price on {d}")));
            }
            if c <= 0.0 {
                return Err(Error::data(format!("non-positive price {c} on {d}")));
            }
        }
        let mut rows: Vec<(NaiveDate, f64)> = timestamps.into_iter().zip(closes).collect();
        rows.sort_by_key(|r| r.0);
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::data(format!("duplicate date {}", w[0].0)));
        }
        let (timestamps, closes) = rows.into_iter().unzip();
        Ok(Self { timestamps, closes })
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    pub fn timestamps(&self) -> &[NaiveDate] {
        &self.timestamps
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    /// Rebuilds a price path from returns, starting at `start_price` on the
    /// day before the first return.
    pub fn from_returns(returns: &ReturnSeries, start_price: f64, scale: f64) -> Result<Self> {
        let first = returns
            .timestamps
            .first()
            .ok_or_else(|| Error::data("empty return series"))?;
        let mut timestamps = Vec::with_capacity(returns.len() + 1);
        let mut closes = Vec::with_capacity(returns.len() + 1);
        timestamps.push(previous_business_day(*first));
        closes.push(start_price);
        let mut p = start_price;
        for (&d, &r) in returns.timestamps.iter().zip(&returns.returns) {
            p *= (r / scale).exp();
            timestamps.push(d);
            closes.push(p);
        }
        Self::new(timestamps, closes)
    }
}

/// Column names used when reading a price table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub date: String,
    pub close: String,
    pub delimiter: u8,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            date: "date".to_string(),
            close: "close".to_string(),
            delimiter: b',',
        }
    }
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    let s = raw.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d);
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(dt.date_naive());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.date());
        }
    }
    None
}

/// Parses a delimiter-separated price table with a header row.
pub fn parse_prices<R: std::io::Read>(reader: R, columns: &ColumnMap) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(columns.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::data(format!("missing column '{name}'")))
    };
    let date_col = find(&columns.date)?;
    let close_col = find(&columns.close)?;

    let mut dates = Vec::new();
    let mut closes = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let raw_date = row.get(date_col).unwrap_or("");
        let raw_close = row.get(close_col).unwrap_or("");
        let d = parse_date(raw_date)
            .ok_or_else(|| Error::data(format!("line {line}: unparseable date '{raw_date}'")))?;
        let c: f64 = raw_close
            .parse()
            .map_err(|_| Error::data(format!("line {line}: unparseable price '{raw_close}'")))?;
        dates.push(d);
        closes.push(c);
    }
    PriceSeries::new(dates, closes)
}

pub fn load_prices(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_prices(file, columns)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    timestamps: Vec<NaiveDate>,
    returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(timestamps: Vec<NaiveDate>, returns: Vec<f64>) -> Result<Self> {
        if timestamps.len() != returns.len() {
            return Err(Error::data("timestamp/return length mismatch"));
        }
        if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
            return Err(Error::data(format!("non-finite return at index {i}")));
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::data("return timestamps must be strictly increasing"));
        }
        Ok(Self { timestamps, returns })
    }

    /// Wraps raw values with consecutive business-day dates starting at
    /// 2000-01-03. Used for simulated series.
    pub fn from_values(returns: Vec<f64>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
        let timestamps = business_days(start, returns.len());
        Self::new(timestamps, returns)
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn timestamps(&self) -> &[NaiveDate] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.returns
    }

    /// Sub-series over `range` of indices.
    pub fn slice(&self, range: std::ops::Range<usize>) -> ReturnSeries {
        ReturnSeries {
            timestamps: self.timestamps[range.clone()].to_vec(),
            returns: self.returns[range].to_vec(),
        }
    }
}

/// `scale · ln(p[t+1] / p[t])` for each consecutive pair of closes.
pub fn log_returns(prices: &PriceSeries, scale: f64) -> ReturnSeries {
    let returns = prices
        .closes
        .windows(2)
        .map(|w| scale * (w[1] / w[0]).ln())
        .collect();
    ReturnSeries {
        timestamps: prices.timestamps[1..].to_vec(),
        returns,
    }
}

/// Realized volatility aligned to the return series. Entry `j` belongs to
/// return index `j + k - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolSeries {
    timestamps: Vec<NaiveDate>,
    sigma: Vec<f64>,
    sigma_sq: Vec<f64>,
    k: usize,
}

impl VolSeries {
    pub fn window(&self) -> usize {
        self.k
    }

    /// First return index with a defined value (`k - 1`).
    pub fn first_index(&self) -> usize {
        self.k - 1
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sigma_sq(&self) -> &[f64] {
        &self.sigma_sq
    }

    pub fn timestamps(&self) -> &[NaiveDate] {
        &self.timestamps
    }

    /// Realized variance at return index `t`, if defined.
    pub fn sigma_sq_at(&self, t: usize) -> Option<f64> {
        t.checked_sub(self.k - 1)
            .and_then(|j| self.sigma_sq.get(j).copied())
    }

    pub fn sigma_at(&self, t: usize) -> Option<f64> {
        t.checked_sub(self.k - 1).and_then(|j| self.sigma.get(j).copied())
    }
}

pub fn realized_volatility(returns: &ReturnSeries, k: usize) -> Result<VolSeries> {
    if k == 0 {
        return Err(Error::data("window size k must be at least 1"));
    }
    let n = returns.len();
    if k > n {
        return Err(Error::data(format!(
            "window size {k} exceeds series length {n}"
        )));
    }
    // Summed directly per window rather than with a running sum so that a
    // constant series gives exactly equal values everywhere.
    let sigma_sq: Vec<f64> = returns
        .returns
        .windows(k)
        .map(|w| w.iter().map(|e| e * e).sum())
        .collect();
    let sigma = sigma_sq.iter().map(|v: &f64| v.sqrt()).collect();
    Ok(VolSeries {
        timestamps: returns.timestamps[k - 1..].to_vec(),
        sigma,
        sigma_sq,
        k,
    })
}

/// What a dataset record's scalar target measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    /// `σ²_{t+h}` from the realized-volatility series.
    RealizedVariance,
    /// `ε²_{t+h}`, the squared return itself.
    SquaredReturn,
}

impl TargetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::RealizedVariance => "realized-variance",
            TargetKind::SquaredReturn => "squared-return",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "realized-variance" | "realized" => Some(TargetKind::RealizedVariance),
            "squared-return" | "squared" => Some(TargetKind::SquaredReturn),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// `ε_{t-k+1}, …, ε_t`, oldest first.
    pub window: Vec<f64>,
    pub target: f64,
    /// Index `t` of the last window element in the return series.
    pub anchor: usize,
    pub timestamp: NaiveDate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub records: Vec<Record>,
    pub k: usize,
    pub h: usize,
    pub target: TargetKind,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first_anchor(&self) -> Option<usize> {
        self.records.first().map(|r| r.anchor)
    }

    pub fn last_anchor(&self) -> Option<usize> {
        self.records.last().map(|r| r.anchor)
    }

    /// Line-oriented text dump: `anchor date ε… target` per record.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# k={} h={} target={}\n",
            self.k,
            self.h,
            self.target.as_str()
        );
        for r in &self.records {
            let _ = write!(out, "{} {}", r.anchor, r.timestamp);
            for e in &r.window {
                let _ = write!(out, " {e}");
            }
            let _ = writeln!(out, " {}", r.target);
        }
        out
    }

    /// Reassembles the contiguous return sub-series covered by the windows,
    /// together with the index of its first element.
    pub fn covered_returns(&self) -> Option<(usize, Vec<f64>)> {
        let first = self.records.first()?;
        let start = first.anchor + 1 - self.k;
        let mut out = first.window.clone();
        let mut prev = first.anchor;
        for r in &self.records[1..] {
            if r.anchor != prev + 1 {
                return None;
            }
            out.push(*r.window.last()?);
            prev = r.anchor;
        }
        Some((start, out))
    }

    fn slice(&self, range: std::ops::Range<usize>) -> WindowedDataset {
        WindowedDataset {
            records: self.records[range].to_vec(),
            k: self.k,
            h: self.h,
            target: self.target,
        }
    }
}

fn check_window_args(k: usize, h: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::data("window size k must be at least 1"));
    }
    if h == 0 {
        return Err(Error::data("horizon h must be at least 1"));
    }
    Ok(())
}

fn windowed(
    returns: &ReturnSeries,
    k: usize,
    h: usize,
    target: TargetKind,
    target_at: impl Fn(usize) -> Option<f64>,
) -> Result<WindowedDataset> {
    check_window_args(k, h)?;
    let n = returns.len();
    let mut records = Vec::new();
    if n >= k + h {
        for t in (k - 1)..(n - h) {
            let y = target_at(t + h).ok_or_else(|| {
                Error::data(format!("no target available at index {}", t + h))
            })?;
            records.push(Record {
                window: returns.returns[t + 1 - k..=t].to_vec(),
                target: y,
                anchor: t,
                timestamp: returns.timestamps[t],
            });
        }
    }
    if records.is_empty() {
        return Err(Error::data(format!(
            "series of length {n} too short for k={k}, h={h}"
        )));
    }
    Ok(WindowedDataset {
        records,
        k,
        h,
        target,
    })
}

/// Records `[(ε_{t-k+1..t}), σ²_{t+h}]` for every anchor with both the full
/// window and the target inside the series.
pub fn build_dataset(
    returns: &ReturnSeries,
    vol: &VolSeries,
    k: usize,
    h: usize,
) -> Result<WindowedDataset> {
    if vol.window() != k {
        return Err(Error::data(format!(
            "volatility window {} does not match k={k}",
            vol.window()
        )));
    }
    if vol.len() + vol.first_index() != returns.len() {
        return Err(Error::data("volatility series not derived from these returns"));
    }
    windowed(returns, k, h, TargetKind::RealizedVariance, |i| {
        vol.sigma_sq_at(i)
    })
}

/// Same layout as [`build_dataset`] but with `ε²_{t+h}` as the target, which
/// is what the one-step likelihood objective consumes.
pub fn build_return_dataset(returns: &ReturnSeries, k: usize, h: usize) -> Result<WindowedDataset> {
    windowed(returns, k, h, TargetKind::SquaredReturn, |i| {
        returns.returns.get(i).map(|e| e * e)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: WindowedDataset,
    pub val: WindowedDataset,
    pub test: WindowedDataset,
}

impl SplitDataset {
    /// Sizes `(train, val, test)`.
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }

    /// Anchor of the first test record; nothing at or after it may be
    /// consumed while fitting.
    pub fn test_start(&self) -> usize {
        self.test.records[0].anchor
    }

    /// Verifies that the highest return index consumed while fitting lies
    /// strictly before the first test anchor.
    pub fn check_no_leakage(&self, max_consumed_index: usize) -> Result<()> {
        if max_consumed_index >= self.test_start() {
            return Err(Error::data(format!(
                "leakage: fitting consumed return index {max_consumed_index}, test starts at {}",
                self.test_start()
            )));
        }
        Ok(())
    }
}

/// Contiguous time-ordered partition with sizes `floor(n·a/s)`,
/// `floor(n·b/s)` and the remainder, where `s = a + b + c`.
pub fn split(ds: &WindowedDataset, ratios: (usize, usize, usize)) -> Result<SplitDataset> {
    let n = ds.len();
    if n == 0 {
        return Err(Error::data("cannot split an empty dataset"));
    }
    let total = ratios.0 + ratios.1 + ratios.2;
    if total == 0 {
        return Err(Error::data("split ratios sum to zero"));
    }
    let n_train = n * ratios.0 / total;
    let n_val = n * ratios.1 / total;
    let n_test = n - n_train - n_val;
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::data(format!(
            "split of {n} records leaves an empty partition ({n_train}, {n_val}, {n_test})"
        )));
    }
    Ok(SplitDataset {
        train: ds.slice(0..n_train),
        val: ds.slice(n_train..n_train + n_val),
        test: ds.slice(n_train + n_val..n),
    })
}

/// Partitions `ds` at the same anchor boundaries as `reference`: records up
/// to the reference's last training anchor train, up to its last validation
/// anchor validate, the rest test.
pub fn split_aligned(ds: &WindowedDataset, reference: &SplitDataset) -> Result<SplitDataset> {
    let train_end = reference.train.last_anchor().unwrap_or(0);
    let val_end = reference.val.last_anchor().unwrap_or(0);
    let n_train = ds.records.iter().take_while(|r| r.anchor <= train_end).count();
    let n_val = ds.records[n_train..].iter().take_while(|r| r.anchor <= val_end).count();
    let n = ds.len();
    if n_train == 0 || n_val == 0 || n_train + n_val == n {
        return Err(Error::data("aligned split leaves an empty partition"));
    }
    Ok(SplitDataset {
        train: ds.slice(0..n_train),
        val: ds.slice(n_train..n_train + n_val),
        test: ds.slice(n_train + n_val..n),
    })
}

/// Parses a `date,return` table such as the simulator writes.
pub fn parse_returns<R: std::io::Read>(reader: R, columns: &ColumnMap, return_col: &str) -> Result<ReturnSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(columns.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::data(format!("missing column '{name}'")))
    };
    let date_col = find(&columns.date)?;
    let ret_col = find(return_col)?;
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let raw_date = row.get(date_col).unwrap_or("");
        let raw = row.get(ret_col).unwrap_or("");
        dates.push(
            parse_date(raw_date)
                .ok_or_else(|| Error::data(format!("line {line}: unparseable date '{raw_date}'")))?,
        );
        values.push(
            raw.parse()
                .map_err(|_| Error::data(format!("line {line}: unparseable return '{raw}'")))?,
        );
    }
    ReturnSeries::new(dates, values)
}

/// Loads returns from a price table (`close` column, converted with
/// `scale`) or a return table (`return` column, used as is).
pub fn load_series(path: impl AsRef<Path>, columns: &ColumnMap, scale: f64) -> Result<ReturnSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header = text.lines().next().unwrap_or("");
    let has_return = header
        .split(columns.delimiter as char)
        .any(|h| h.trim().eq_ignore_ascii_case("return"));
    if has_return {
        parse_returns(text.as_bytes(), columns, "return")
    } else {
        Ok(log_returns(&parse_prices(text.as_bytes(), columns)?, scale))
    }
}

pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

fn previous_business_day(d: NaiveDate) -> NaiveDate {
    let mut p = d - Duration::days(1);
    while matches!(p.weekday(), Weekday::Sat | Weekday::Sun) {
        p -= Duration::days(1);
    }
    p
}
