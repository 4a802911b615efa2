//! Price ingestion, lookback returns and annualized moment estimation.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::fmt_f64;

/// Trading days per year used for annualization.
pub const TRADING_DAYS: f64 = 252.0;

pub const DEFAULT_TICKERS: [&str; 10] =
    ["AAPL", "MSFT", "GOOGL", "AMZN", "JPM", "V", "TSLA", "UNH", "LLY", "XOM"];

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("ticker {0} not present in price file")]
    MissingTicker(String),
    #[error("price panel has no usable rows")]
    EmptyPanel,
    #[error("non-positive price {value} for {ticker} on {date}")]
    NonPositivePrice { ticker: String, date: NaiveDate, value: f64 },
    #[error("malformed row {row}: {reason}")]
    Malformed { row: usize, reason: String },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("need {needed} rows before {asof}, panel has {available}")]
    InsufficientHistory { asof: NaiveDate, needed: usize, available: usize },
    #[error("need at least 2 observations, got {0}")]
    DegenerateInput(usize),
    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),
    #[error("invalid synthetic parameters: {0}")]
    InvalidParams(String),
}

/// Dated adjusted-close prices; rows are dates, columns are tickers.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    prices: DMatrix<f64>,
}

impl PricePanel {
    /// Validates the panel invariants: increasing dates, finite positive prices.
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        prices: DMatrix<f64>,
    ) -> Result<Self, MarketError> {
        if dates.is_empty() || tickers.is_empty() {
            return Err(MarketError::EmptyPanel);
        }
        if prices.nrows() != dates.len() || prices.ncols() != tickers.len() {
            return Err(MarketError::Malformed {
                row: 0,
                reason: format!(
                    "price matrix is {}x{}, expected {}x{}",
                    prices.nrows(),
                    prices.ncols(),
                    dates.len(),
                    tickers.len()
                ),
            });
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(MarketError::DuplicateDate(w[1]));
            }
        }
        for (r, date) in dates.iter().enumerate() {
            for (c, ticker) in tickers.iter().enumerate() {
                let value = prices[(r, c)];
                if !(value > 0.0) || !value.is_finite() {
                    return Err(MarketError::NonPositivePrice {
                        ticker: ticker.clone(),
                        date: *date,
                        value,
                    });
                }
            }
        }
        Ok(Self { dates, tickers, prices })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Number of rows dated strictly before `date`.
    pub fn rows_before(&self, date: NaiveDate) -> usize {
        self.dates.partition_point(|d| *d < date)
    }

    pub fn price(&self, row: usize, asset: usize) -> f64 {
        self.prices[(row, asset)]
    }

    /// Subset of columns, in the requested order.
    pub fn select(&self, tickers: &[String]) -> Result<PricePanel, MarketError> {
        let cols = tickers
            .iter()
            .map(|t| {
                self.tickers
                    .iter()
                    .position(|x| x == t)
                    .ok_or_else(|| MarketError::MissingTicker(t.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let prices = DMatrix::from_fn(self.n_rows(), cols.len(), |r, c| self.prices[(r, cols[c])]);
        Ok(Self { dates: self.dates.clone(), tickers: tickers.to_vec(), prices })
    }

    /// Mutable access for tests that perturb prices; invariants are the caller's problem.
    #[doc(hidden)]
    pub fn prices_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.prices
    }

    /// Writes the panel in the `date,<ticker>...` CSV layout.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), MarketError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.tickers.iter().cloned());
        w.write_record(&header)?;
        for (r, date) in self.dates.iter().enumerate() {
            let mut record = vec![date.format("%Y-%m-%d").to_string()];
            record.extend((0..self.n_assets()).map(|c| fmt_f64(self.prices[(r, c)])));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loads `tickers` from a price CSV file.
pub fn load_prices(path: impl AsRef<Path>, tickers: &[String]) -> Result<PricePanel, MarketError> {
    let file = std::fs::File::open(path)?;
    read_prices(file, tickers)
}

/// Parses a price CSV. Rows missing every requested ticker are dropped, interior
/// gaps are forward-filled and leading rows that still lack a value are dropped.
/// An empty `tickers` slice selects every column in file order.
pub fn read_prices<R: Read>(reader: R, tickers: &[String]) -> Result<PricePanel, MarketError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let date_col = header
        .iter()
        .position(|h| h.eq_ignore_ascii_case("date"))
        .ok_or_else(|| MarketError::Malformed { row: 0, reason: "no date column".into() })?;
    let tickers: Vec<String> = if tickers.is_empty() {
        header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != date_col)
            .map(|(_, h)| h.to_string())
            .collect()
    } else {
        tickers.to_vec()
    };
    let cols = tickers
        .iter()
        .map(|t| {
            header
                .iter()
                .position(|h| h == t)
                .ok_or_else(|| MarketError::MissingTicker(t.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 2;
        let raw_date = record.get(date_col).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|e| {
            MarketError::Malformed { row, reason: format!("bad date {raw_date:?}: {e}") }
        })?;
        let values = cols
            .iter()
            .map(|&c| {
                let cell = record.get(c).unwrap_or("");
                if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
                {
                    Ok(None)
                } else {
                    cell.parse::<f64>().map(Some).map_err(|e| MarketError::Malformed {
                        row,
                        reason: format!("bad price {cell:?}: {e}"),
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.iter().all(Option::is_none) {
            continue;
        }
        if rows.insert(date, values).is_some() {
            return Err(MarketError::DuplicateDate(date));
        }
    }

    let n = tickers.len();
    let mut last: Vec<Option<f64>> = vec![None; n];
    let mut dates = Vec::new();
    let mut data = Vec::new();
    for (date, values) in rows {
        for (slot, v) in last.iter_mut().zip(values) {
            if v.is_some() {
                *slot = v;
            }
        }
        if last.iter().all(Option::is_some) {
            dates.push(date);
            data.extend(last.iter().map(|v| v.unwrap()));
        }
    }
    if dates.is_empty() {
        return Err(MarketError::EmptyPanel);
    }
    let prices = DMatrix::from_row_slice(dates.len(), n, &data);
    PricePanel::new(dates, tickers, prices)
}

/// Daily simple returns over the `lookback` trading days strictly before `asof`.
pub fn window_returns(
    panel: &PricePanel,
    asof: NaiveDate,
    lookback: usize,
) -> Result<DMatrix<f64>, MarketError> {
    let end = panel.rows_before(asof);
    if end < lookback + 1 {
        return Err(MarketError::InsufficientHistory {
            asof,
            needed: lookback + 1,
            available: end,
        });
    }
    let start = end - lookback - 1;
    let p = panel.prices();
    Ok(DMatrix::from_fn(lookback, panel.n_assets(), |t, i| {
        p[(start + t + 1, i)] / p[(start + t, i)] - 1.0
    }))
}

/// Column means of a returns matrix.
pub fn column_means(returns: &DMatrix<f64>) -> DVector<f64> {
    let n = returns.nrows() as f64;
    DVector::from_iterator(returns.ncols(), returns.column_iter().map(|c| c.sum() / n))
}

/// Unbiased (n-1) sample covariance.
pub fn sample_covariance(returns: &DMatrix<f64>) -> Result<DMatrix<f64>, MarketError> {
    let n = returns.nrows();
    if n < 2 {
        return Err(MarketError::DegenerateInput(n));
    }
    let centered = center(returns);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    Ok(symmetrize(cov))
}

fn center(returns: &DMatrix<f64>) -> DMatrix<f64> {
    let means = column_means(returns);
    DMatrix::from_fn(returns.nrows(), returns.ncols(), |t, i| returns[(t, i)] - means[i])
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Ledoit-Wolf shrinkage toward the scaled identity `tr(S)/N * I`, with the
/// maximum-likelihood (1/n) sample covariance `S`.
pub fn ledoit_wolf(returns: &DMatrix<f64>) -> Result<DMatrix<f64>, MarketError> {
    ledoit_wolf_with_intensity(returns).map(|(cov, _)| cov)
}

/// Same as [`ledoit_wolf`], also returning the shrinkage intensity in `[0, 1]`.
pub fn ledoit_wolf_with_intensity(
    returns: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64), MarketError> {
    let (n, p) = returns.shape();
    if n < 2 {
        return Err(MarketError::DegenerateInput(n));
    }
    if p == 0 {
        return Err(MarketError::EmptyPanel);
    }
    let x = center(returns);
    let nf = n as f64;
    let pf = p as f64;
    let s = x.transpose() * &x / nf;
    let trace = s.trace();
    let target = trace / pf;

    let s_frob2: f64 = s.iter().map(|v| v * v).sum();
    // ||S - m I||_F^2 / p
    let dispersion = (s_frob2 - 2.0 * target * trace + pf * target * target) / pf;
    // (1 / (p n^2)) sum_t ||x_t x_t' - S||_F^2
    let fourth: f64 = x
        .row_iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|v| v * v).sum();
            sq * sq
        })
        .sum();
    let noise = ((fourth / nf - s_frob2) / (pf * nf)).max(0.0);
    let noise = noise.min(dispersion);
    let delta = if noise <= 0.0 || dispersion <= 0.0 { 0.0 } else { (noise / dispersion).clamp(0.0, 1.0) };

    let mut shrunk = s * (1.0 - delta);
    for i in 0..p {
        shrunk[(i, i)] += delta * target;
    }
    Ok((symmetrize(shrunk), delta))
}

/// Annualized moments of one lookback window.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub mu_ann: DVector<f64>,
    pub sigma_ann: DMatrix<f64>,
    pub lookback_days: usize,
    pub asof_date: NaiveDate,
}

pub fn estimate_moments(
    panel: &PricePanel,
    asof: NaiveDate,
    lookback: usize,
) -> Result<MomentEstimate, MarketError> {
    let returns = window_returns(panel, asof, lookback)?;
    moments_from_returns(&returns, asof)
}

pub fn moments_from_returns(
    returns: &DMatrix<f64>,
    asof: NaiveDate,
) -> Result<MomentEstimate, MarketError> {
    let sigma = ledoit_wolf(returns)?;
    Ok(MomentEstimate {
        mu_ann: column_means(returns) * TRADING_DAYS,
        sigma_ann: sigma * TRADING_DAYS,
        lookback_days: returns.nrows(),
        asof_date: asof,
    })
}

/// Parameters for the geometric-Brownian-motion fixture generator.
/// Drift and volatility are annualized; paths step once per weekday.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub tickers: Vec<String>,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub drift: Vec<f64>,
    pub vol: Vec<f64>,
    pub correlation: Vec<Vec<f64>>,
    #[serde(default = "default_initial_price")]
    pub initial_price: f64,
}

fn default_initial_price() -> f64 {
    100.0
}

impl Default for SynthParams {
    /// Ten large-cap-like names over 2024-2025 with sector-block correlation.
    fn default() -> Self {
        let sector = [0, 0, 0, 0, 1, 1, 0, 2, 2, 3];
        let correlation = (0..10)
            .map(|i| {
                (0..10)
                    .map(|j| match (i == j, sector[i] == sector[j]) {
                        (true, _) => 1.0,
                        (false, true) => 0.55,
                        (false, false) => 0.25,
                    })
                    .collect()
            })
            .collect();
        Self {
            tickers: DEFAULT_TICKERS.iter().map(|s| s.to_string()).collect(),
            start: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2025, 12, 31).unwrap(),
            drift: vec![0.18, 0.15, 0.20, 0.16, 0.12, 0.10, 0.25, 0.05, 0.30, 0.06],
            vol: vec![0.28, 0.25, 0.30, 0.32, 0.22, 0.20, 0.55, 0.24, 0.30, 0.26],
            correlation,
            initial_price: 100.0,
        }
    }
}

impl SynthParams {
    /// Same universe with drift and volatility multiplied by the given factors.
    pub fn scaled(mut self, drift_scale: f64, vol_scale: f64) -> Self {
        self.drift.iter_mut().for_each(|d| *d *= drift_scale);
        self.vol.iter_mut().for_each(|v| *v *= vol_scale);
        self
    }
}

/// Monday-to-Friday dates in `[start, end]`.
pub fn weekdays(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    start
        .iter_days()
        .take_while(|d| *d <= end)
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

/// Deterministic correlated GBM price panel.
pub fn synth_prices(seed: u64, params: &SynthParams) -> Result<PricePanel, MarketError> {
    let n = params.tickers.len();
    if n == 0 {
        return Err(MarketError::InvalidParams("no tickers".into()));
    }
    if params.drift.len() != n || params.vol.len() != n {
        return Err(MarketError::InvalidParams(format!(
            "drift/vol lengths {}/{} do not match {n} tickers",
            params.drift.len(),
            params.vol.len()
        )));
    }
    if params.vol.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(MarketError::InvalidParams("volatilities must be finite and >= 0".into()));
    }
    if params.drift.iter().any(|d| !d.is_finite()) || !(params.initial_price > 0.0) {
        return Err(MarketError::InvalidParams("drift and initial price must be finite, price > 0".into()));
    }
    let factor = correlation_factor(&params.correlation, n)?;
    let dates = weekdays(params.start, params.end);
    if dates.is_empty() {
        return Err(MarketError::EmptyPanel);
    }

    let dt = 1.0 / TRADING_DAYS;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prices = DMatrix::zeros(dates.len(), n);
    let mut current = vec![params.initial_price; n];
    let mut z = DVector::zeros(n);
    for r in 0..dates.len() {
        if r > 0 {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            let shock = &factor * &z;
            for i in 0..n {
                let s = params.vol[i];
                let log_ret = (params.drift[i] - 0.5 * s * s) * dt + s * dt.sqrt() * shock[i];
                current[i] *= log_ret.exp();
            }
        }
        for i in 0..n {
            prices[(r, i)] = current[i];
        }
    }
    PricePanel::new(dates, params.tickers.clone(), prices)
}

/// Symmetric square root factor `L` with `L L' = C`, via eigen-decomposition so
/// that singular (PSD but not PD) correlations are accepted.
fn correlation_factor(corr: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>, MarketError> {
    if corr.len() != n || corr.iter().any(|r| r.len() != n) {
        return Err(MarketError::InvalidCorrelation(format!("expected {n}x{n}")));
    }
    let c = DMatrix::from_fn(n, n, |i, j| corr[i][j]);
    for i in 0..n {
        if (c[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(MarketError::InvalidCorrelation(format!("diagonal entry {i} is not 1")));
        }
        for j in 0..i {
            if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 {
                return Err(MarketError::InvalidCorrelation(format!("not symmetric at ({i},{j})")));
            }
        }
    }
    let eig = SymmetricEigen::new(c);
    let min = eig.eigenvalues.min();
    if min < -1e-10 {
        return Err(MarketError::InvalidCorrelation(format!("not PSD (eigenvalue {min:e})")));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}
