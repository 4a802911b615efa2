//! Monthly walk-forward backtest of the QAOA, annealing and HRP strategies.
//!
//! At each rebalance date `t` the moments come from the lookback window
//! strictly before `t`. The QAOA and annealing strategies each select K
//! assets, using their own previous selection for the continuity bonus, and
//! are allocated by Sharpe maximization. HRP allocates over the whole
//! universe. Weights are bought at the close of `t` and held until the next
//! rebalance date; costs are `tau` per unit of turnover.

use std::collections::BTreeMap;
use std::time::Instant;

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{allocate_or_fallback, hrp_fallback, AllocationConfig, AllocationResult};
use crate::anneal::{anneal, AnnealConfig};
use crate::bits::BitString;
use crate::hrp::hrp_weights;
use crate::market_data::{estimate_moments, window_returns, MarketError, PricePanel};
use crate::problem::{classical_cost, penalty_scale, to_qubo, SelectionProblem};
use crate::qaoa::{depth_sweep, DepthDiagnostic, QaoaConfig};
use crate::report::extended_f64;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("date {0} not in price panel")]
    DateNotFound(NaiveDate),
    #[error("empty value series")]
    EmptySeries,
    #[error("need at least 2 monthly returns, got {0}")]
    TooFewReturns(usize),
    #[error("calendar error: {0}")]
    Calendar(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// The three strategies, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "qaoa_xy")]
    QaoaXy,
    #[serde(rename = "sa")]
    Sa,
    #[serde(rename = "hrp")]
    Hrp,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::QaoaXy, Strategy::Sa, Strategy::Hrp];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::QaoaXy => "qaoa_xy",
            Strategy::Sa => "sa",
            Strategy::Hrp => "hrp",
        }
    }
}

/// Annealer settings; the seed is derived per month from the backtest seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SaSettings {
    pub num_reads: usize,
    pub num_sweeps: usize,
    pub beta_hot: Option<f64>,
    pub beta_cold: Option<f64>,
}

impl Default for SaSettings {
    fn default() -> Self {
        Self { num_reads: 5000, num_sweeps: 1000, beta_hot: None, beta_cold: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestConfig {
    /// Universe; empty means every column of the price file.
    pub tickers: Vec<String>,
    pub k: usize,
    pub q: f64,
    pub lookback: usize,
    pub tau: f64,
    pub kappa: f64,
    pub initial_capital: f64,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub seed: u64,
    /// Skip transaction costs on the first month's purchase.
    pub free_initial_fill: bool,
    /// Use Ledoit-Wolf instead of the sample covariance inside HRP.
    pub hrp_shrinkage: bool,
    pub qaoa: QaoaConfig,
    pub sa: SaSettings,
    pub allocation: AllocationConfig,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            tickers: Vec::new(),
            k: 5,
            q: 0.3,
            lookback: 180,
            tau: 0.0005,
            kappa: 0.1,
            initial_capital: 1_000_000.0,
            start: NaiveDate::from_ymd_opt(2025, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2025, 12, 31).expect("valid date"),
            seed: 0,
            free_initial_fill: false,
            hrp_shrinkage: false,
            qaoa: QaoaConfig::default(),
            sa: SaSettings::default(),
            allocation: AllocationConfig::default(),
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        let bad = |msg: &str| Err(BacktestError::Config(msg.to_string()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.q) {
            return bad("q must lie in [0, 1]");
        }
        if self.lookback < 2 {
            return bad("lookback must be at least 2");
        }
        if !(self.tau >= 0.0) || !(self.kappa >= 0.0) {
            return bad("tau and kappa must be non-negative");
        }
        if !(self.initial_capital > 0.0) || !self.initial_capital.is_finite() {
            return bad("initial_capital must be positive");
        }
        if self.start > self.end {
            return bad("start is after end");
        }
        if self.sa.num_reads == 0 || self.sa.num_sweeps == 0 {
            return bad("sa reads and sweeps must be at least 1");
        }
        self.qaoa.validate().map_err(|e| BacktestError::Config(e.to_string()))?;
        let a = &self.allocation;
        if !(a.lower >= 0.0 && a.lower <= a.upper) {
            return bad("allocation bounds must satisfy 0 <= lower <= upper");
        }
        Ok(())
    }
}

/// `Σ_i |w_new_i - w_prev_i|`.
pub fn turnover(prev: &[f64], new: &[f64]) -> Result<f64, BacktestError> {
    if prev.len() != new.len() {
        return Err(BacktestError::DimensionMismatch { expected: prev.len(), got: new.len() });
    }
    Ok(prev.iter().zip(new).map(|(a, b)| (a - b).abs()).sum())
}

pub fn net_return(gross: f64, turnover: f64, tau: f64) -> f64 {
    gross - tau * turnover
}

/// Buy-and-hold return of `weights` from the close of `from` to the close of `to`.
pub fn holding_return(weights: &[f64], panel: &PricePanel, from: NaiveDate, to: NaiveDate) -> Result<f64, BacktestError> {
    if weights.len() != panel.n_assets() {
        return Err(BacktestError::DimensionMismatch { expected: panel.n_assets(), got: weights.len() });
    }
    let a = panel.date_index(from).ok_or(BacktestError::DateNotFound(from))?;
    let b = panel.date_index(to).ok_or(BacktestError::DateNotFound(to))?;
    Ok(weights.iter().enumerate().map(|(i, w)| w * (panel.price(b, i) / panel.price(a, i) - 1.0)).sum())
}

/// `min_t (V_t / max_{s<=t} V_s - 1)`.
pub fn max_drawdown(values: &[f64]) -> Result<f64, BacktestError> {
    if values.is_empty() {
        return Err(BacktestError::EmptySeries);
    }
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for &v in values {
        peak = peak.max(v);
        worst = worst.min(v / peak - 1.0);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfMetrics {
    pub total_return: f64,
    pub ann_vol: f64,
    /// `±inf` (0 for a zero mean) when returns have no volatility.
    #[serde(with = "extended_f64")]
    pub sharpe: f64,
    pub max_drawdown: f64,
    pub avg_monthly_turnover: f64,
    pub zero_vol: bool,
}

pub const PERIODS_PER_YEAR: f64 = 12.0;

/// Summary statistics of a monthly return series and its value path
/// (which starts with the initial capital).
pub fn perf_metrics(net: &[f64], values: &[f64], turnovers: &[f64]) -> Result<PerfMetrics, BacktestError> {
    if net.len() < 2 {
        return Err(BacktestError::TooFewReturns(net.len()));
    }
    let n = net.len() as f64;
    let mean = net.iter().sum::<f64>() / n;
    let var = net.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mut ann_vol = var.sqrt() * PERIODS_PER_YEAR.sqrt();
    let zero_vol = ann_vol <= 1e-12 * (1.0 + mean.abs());
    let sharpe = if zero_vol {
        ann_vol = 0.0;
        if mean == 0.0 {
            0.0
        } else {
            mean.signum() * f64::INFINITY
        }
    } else {
        mean * PERIODS_PER_YEAR / ann_vol
    };
    let first = *values.first().ok_or(BacktestError::EmptySeries)?;
    let last = *values.last().ok_or(BacktestError::EmptySeries)?;
    Ok(PerfMetrics {
        total_return: last / first - 1.0,
        ann_vol,
        sharpe,
        max_drawdown: max_drawdown(values)?,
        avg_monthly_turnover: if turnovers.is_empty() { 0.0 } else { turnovers.iter().sum::<f64>() / turnovers.len() as f64 },
        zero_vol,
    })
}

/// First trading day of every calendar month in `[start, end]`.
pub fn rebalance_dates(panel: &PricePanel, start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    let mut out: Vec<NaiveDate> = Vec::new();
    for &d in panel.dates().iter().filter(|d| **d >= start && **d <= end) {
        if out.last().is_none_or(|p| (p.year(), p.month()) != (d.year(), d.month())) {
            out.push(d);
        }
    }
    out
}

/// Deterministic per-(month, strategy) seed.
pub fn derive_seed(seed: u64, month: usize, strategy: Strategy) -> u64 {
    let mut z = seed ^ ((month as u64) << 8 | strategy as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One strategy's decision and accounting for one month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyMonth {
    pub selection: Option<BitString>,
    /// Objective value of the selection without the continuity bonus.
    pub selection_cost: Option<f64>,
    pub weights: Vec<f64>,
    pub gross_return: f64,
    pub turnover: f64,
    pub net_return: f64,
    pub value: f64,
    pub fallback_used: bool,
    pub sharpe_ex_ante: Option<f64>,
    pub note: Option<String>,
}

/// Depth-sweep row kept in the result; wall times live in the diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSummary {
    pub p: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub best_bitstring: Option<BitString>,
    pub error: Option<String>,
}

impl From<&DepthDiagnostic> for DepthSummary {
    fn from(d: &DepthDiagnostic) -> Self {
        Self {
            p: d.p,
            initial_cost: d.initial_cost,
            final_cost: d.final_cost,
            iterations: d.iterations,
            grad_norm: d.grad_norm,
            best_bitstring: d.best_bitstring,
            error: d.error.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaSummary {
    pub penalty: f64,
    pub beta_hot: f64,
    pub beta_cold: f64,
    pub feasible_fraction: f64,
    pub best_energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthResult {
    pub date: NaiveDate,
    pub hold_until: NaiveDate,
    pub strategies: BTreeMap<Strategy, StrategyMonth>,
    pub qaoa_best_depth: Option<usize>,
    pub qaoa_depths: Vec<DepthSummary>,
    pub sa: Option<SaSummary>,
}

/// Timing and full optimizer traces; not part of the deterministic result.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MonthTiming {
    pub date: Option<NaiveDate>,
    pub qaoa_ms: f64,
    pub sa_ms: f64,
    pub hrp_ms: f64,
    pub qaoa_depths: Vec<DepthDiagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub config: BacktestConfig,
    pub tickers: Vec<String>,
    pub per_month: Vec<MonthResult>,
    /// Value paths including the initial capital.
    pub values: BTreeMap<Strategy, Vec<f64>>,
    pub summary: BTreeMap<Strategy, Option<PerfMetrics>>,
    #[serde(skip)]
    pub timing: Vec<MonthTiming>,
}

struct Decision {
    selection: Option<BitString>,
    selection_cost: Option<f64>,
    alloc: AllocationResult,
    elapsed_ms: f64,
}

struct MonthInputs<'a> {
    config: &'a BacktestConfig,
    month: usize,
    mu: nalgebra::DVector<f64>,
    sigma: DMatrix<f64>,
    returns: DMatrix<f64>,
}

impl MonthInputs<'_> {
    fn problem(&self, prev: Option<BitString>) -> Result<SelectionProblem, String> {
        let prev = prev.map(|x| x.indices()).unwrap_or_default();
        SelectionProblem::new(self.mu.clone(), self.sigma.clone(), self.config.q, self.config.k, prev, self.config.kappa)
            .map_err(|e| e.to_string())
    }

    fn allocate(&self, selection: Option<&BitString>, strategy: Strategy, reason: Option<String>) -> AllocationResult {
        let c = self.config;
        let seed = derive_seed(c.seed, self.month, strategy);
        match reason {
            Some(r) => hrp_fallback(r, &self.mu, &self.sigma, &self.returns, c.hrp_shrinkage),
            None => allocate_or_fallback(selection, c.k, &self.mu, &self.sigma, &self.returns, &c.allocation, seed, c.hrp_shrinkage),
        }
    }

    fn cost_of(&self, x: &BitString) -> Option<f64> {
        let p = self.problem(None).ok()?;
        classical_cost(&p, x).ok()
    }

    fn qaoa(&self, prev: Option<BitString>) -> (Decision, Option<(usize, Vec<DepthDiagnostic>)>) {
        let start = Instant::now();
        let outcome = self.problem(prev).and_then(|p| depth_sweep(&p, self.config.qaoa.p_max, &self.config.qaoa).map_err(|e| e.to_string()));
        let (selection, sweep, reason) = match outcome {
            Ok(s) => (Some(s.best.bitstring), Some((s.best_depth, s.diagnostics)), None),
            Err(e) => (None, None, Some(format!("QAOA failed: {e}"))),
        };
        let alloc = self.allocate(selection.as_ref(), Strategy::QaoaXy, reason);
        let selection_cost = selection.as_ref().and_then(|x| self.cost_of(x));
        (Decision { selection, selection_cost, alloc, elapsed_ms: start.elapsed().as_secs_f64() * 1e3 }, sweep)
    }

    fn sa(&self, prev: Option<BitString>) -> (Decision, Option<SaSummary>) {
        let start = Instant::now();
        let c = self.config;
        let outcome = self.problem(prev).and_then(|p| {
            let penalty = penalty_scale(&p);
            let qubo = to_qubo(&p, penalty).map_err(|e| e.to_string())?;
            let cfg = AnnealConfig {
                num_reads: c.sa.num_reads,
                num_sweeps: c.sa.num_sweeps,
                beta_hot: c.sa.beta_hot,
                beta_cold: c.sa.beta_cold,
                seed: derive_seed(c.seed, self.month, Strategy::Sa),
            };
            let set = anneal(&qubo, &cfg).map_err(|e| e.to_string())?;
            let best = set.best_feasible(c.k).cloned();
            let summary = SaSummary {
                penalty,
                beta_hot: set.beta_hot,
                beta_cold: set.beta_cold,
                feasible_fraction: set.feasible_fraction(c.k),
                best_energy: best.as_ref().map(|s| s.energy),
            };
            Ok((best.map(|s| s.bitstring), summary))
        });
        let (selection, summary, reason) = match outcome {
            Ok((Some(x), s)) => (Some(x), Some(s), None),
            Ok((None, s)) => (None, Some(s), Some("annealer found no feasible sample".to_string())),
            Err(e) => (None, None, Some(format!("annealing failed: {e}"))),
        };
        let alloc = self.allocate(selection.as_ref(), Strategy::Sa, reason);
        let selection_cost = selection.as_ref().and_then(|x| self.cost_of(x));
        (Decision { selection, selection_cost, alloc, elapsed_ms: start.elapsed().as_secs_f64() * 1e3 }, summary)
    }

    fn hrp(&self) -> Decision {
        let start = Instant::now();
        let n = self.mu.len();
        let alloc = match hrp_weights(&self.returns, self.config.hrp_shrinkage) {
            Ok(w) => {
                let weights: Vec<f64> = w.iter().copied().collect();
                let sharpe = crate::allocation::sharpe(&w, &self.mu, &self.sigma).ok();
                AllocationResult { weights, success: true, fallback_used: false, sharpe, note: None }
            }
            Err(e) => AllocationResult {
                weights: vec![1.0 / n as f64; n],
                success: false,
                fallback_used: true,
                sharpe: None,
                note: Some(format!("HRP failed ({e}), equal weights used")),
            },
        };
        Decision { selection: None, selection_cost: None, alloc, elapsed_ms: start.elapsed().as_secs_f64() * 1e3 }
    }
}

/// The configured universe, validated against `k`.
pub fn universe(panel: &PricePanel, config: &BacktestConfig) -> Result<PricePanel, BacktestError> {
    config.validate()?;
    let panel = if config.tickers.is_empty() { panel.clone() } else { panel.select(&config.tickers)? };
    if config.k > panel.n_assets() {
        return Err(BacktestError::Config(format!("k = {} exceeds universe size {}", config.k, panel.n_assets())));
    }
    Ok(panel)
}

fn inputs_at<'a>(panel: &PricePanel, config: &'a BacktestConfig, date: NaiveDate, month: usize) -> Result<MonthInputs<'a>, BacktestError> {
    let calendar = |e: MarketError| BacktestError::Calendar(format!("rebalance {date}: {e}"));
    let moments = estimate_moments(panel, date, config.lookback).map_err(calendar)?;
    let returns = window_returns(panel, date, config.lookback).map_err(calendar)?;
    Ok(MonthInputs { config, month, mu: moments.mu_ann, sigma: moments.sigma_ann, returns })
}

/// Selection problem at `asof` over the configured universe, with no
/// previous holdings.
pub fn problem_at(panel: &PricePanel, config: &BacktestConfig, asof: NaiveDate) -> Result<SelectionProblem, BacktestError> {
    let panel = universe(panel, config)?;
    inputs_at(&panel, config, asof, 0)?.problem(None).map_err(BacktestError::Config)
}

/// One solver's single-date decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub bitstring: Option<BitString>,
    pub selected: Vec<String>,
    pub classical_cost: Option<f64>,
    /// Full-universe weights.
    pub weights: Vec<f64>,
    pub fallback_used: bool,
    pub sharpe: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    pub asof: NaiveDate,
    pub tickers: Vec<String>,
    pub qaoa_xy: SelectionOutcome,
    pub sa: SelectionOutcome,
}

/// Runs both selection solvers and the allocator for a single date, as the
/// first month of a backtest would.
pub fn select_at(panel: &PricePanel, config: &BacktestConfig, asof: NaiveDate) -> Result<SelectReport, BacktestError> {
    let panel = universe(panel, config)?;
    let inputs = inputs_at(&panel, config, asof, 0)?;
    let ((qaoa, _), (sa, _)) = rayon::join(|| inputs.qaoa(None), || inputs.sa(None));
    let outcome = |d: Decision| SelectionOutcome {
        bitstring: d.selection,
        selected: d.selection.map(|x| x.indices().iter().map(|&i| panel.tickers()[i].clone()).collect()).unwrap_or_default(),
        classical_cost: d.selection_cost,
        weights: d.alloc.weights,
        fallback_used: d.alloc.fallback_used,
        sharpe: d.alloc.sharpe,
        note: d.alloc.note,
    };
    Ok(SelectReport { asof, tickers: panel.tickers().to_vec(), qaoa_xy: outcome(qaoa), sa: outcome(sa) })
}

/// Runs the monthly walk-forward loop over `[config.start, config.end]`.
pub fn run_walk_forward(panel: &PricePanel, config: &BacktestConfig) -> Result<BacktestResult, BacktestError> {
    let panel = universe(panel, config)?;
    let n = panel.n_assets();
    let dates = rebalance_dates(&panel, config.start, config.end);
    if dates.is_empty() {
        return Err(BacktestError::Calendar(format!("no trading days between {} and {}", config.start, config.end)));
    }
    let last = *panel.dates().last().expect("panel is non-empty");
    let after_end = panel.dates().iter().copied().find(|d| *d > config.end);
    let mut bounds = dates.clone();
    bounds.push(after_end.unwrap_or(last));
    if bounds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BacktestError::Calendar(format!("rebalance date {} has no following trading day", dates[dates.len() - 1])));
    }

    let mut prev_weights: BTreeMap<Strategy, Vec<f64>> = Strategy::ALL.iter().map(|s| (*s, vec![0.0; n])).collect();
    let mut prev_sel: BTreeMap<Strategy, Option<BitString>> = Strategy::ALL.iter().map(|s| (*s, None)).collect();
    let mut values: BTreeMap<Strategy, Vec<f64>> =
        Strategy::ALL.iter().map(|s| (*s, vec![config.initial_capital])).collect();
    let mut nets: BTreeMap<Strategy, Vec<f64>> = BTreeMap::new();
    let mut turns: BTreeMap<Strategy, Vec<f64>> = BTreeMap::new();
    let mut per_month = Vec::with_capacity(dates.len());
    let mut timing = Vec::with_capacity(dates.len());

    for (month, (&date, &hold_until)) in dates.iter().zip(&bounds[1..]).enumerate() {
        let inputs = inputs_at(&panel, config, date, month)?;

        let (q_prev, s_prev) = (prev_sel[&Strategy::QaoaXy], prev_sel[&Strategy::Sa]);
        let ((qaoa, sweep), ((sa, sa_summary), hrp)) =
            rayon::join(|| inputs.qaoa(q_prev), || rayon::join(|| inputs.sa(s_prev), || inputs.hrp()));

        let mut strategies = BTreeMap::new();
        for (strategy, decision) in [(Strategy::QaoaXy, &qaoa), (Strategy::Sa, &sa), (Strategy::Hrp, &hrp)] {
            let w = &decision.alloc.weights;
            let gross = holding_return(w, &panel, date, hold_until)?;
            let mut to = turnover(&prev_weights[&strategy], w)?;
            if month == 0 && config.free_initial_fill {
                to = 0.0;
            }
            let net = net_return(gross, to, config.tau);
            let path = values.get_mut(&strategy).expect("all strategies present");
            let value = path.last().expect("path starts with capital") * (1.0 + net);
            path.push(value);
            nets.entry(strategy).or_default().push(net);
            turns.entry(strategy).or_default().push(to);
            prev_weights.insert(strategy, w.clone());
            prev_sel.insert(strategy, decision.selection);
            strategies.insert(
                strategy,
                StrategyMonth {
                    selection: decision.selection,
                    selection_cost: decision.selection_cost,
                    weights: w.clone(),
                    gross_return: gross,
                    turnover: to,
                    net_return: net,
                    value,
                    fallback_used: decision.alloc.fallback_used,
                    sharpe_ex_ante: decision.alloc.sharpe,
                    note: decision.alloc.note.clone(),
                },
            );
        }
        let (best_depth, depths) = sweep.map_or((None, Vec::new()), |(b, d)| (Some(b), d));
        per_month.push(MonthResult {
            date,
            hold_until,
            strategies,
            qaoa_best_depth: best_depth,
            qaoa_depths: depths.iter().map(DepthSummary::from).collect(),
            sa: sa_summary,
        });
        timing.push(MonthTiming {
            date: Some(date),
            qaoa_ms: qaoa.elapsed_ms,
            sa_ms: sa.elapsed_ms,
            hrp_ms: hrp.elapsed_ms,
            qaoa_depths: depths,
        });
    }

    let summary = Strategy::ALL
        .iter()
        .map(|s| (*s, perf_metrics(&nets[s], &values[s], &turns[s]).ok()))
        .collect();
    Ok(BacktestResult { config: config.clone(), tickers: panel.tickers().to_vec(), per_month, values, summary, timing })
}
