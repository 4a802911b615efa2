//! Python bindings: selection problems with both solvers, allocators, the
//! synthetic data generator and the backtest driver. Larger results cross
//! the boundary as JSON strings.

use std::path::PathBuf;

use chrono::NaiveDate;
use kardinal::allocation::{max_sharpe as core_max_sharpe, AllocationConfig};
use kardinal::anneal::{anneal, AnnealConfig};
use kardinal::backtest::{run_walk_forward, select_at, BacktestConfig};
use kardinal::bits::BitString;
use kardinal::hrp::hrp_weights as core_hrp_weights;
use kardinal::market_data::{load_prices, synth_prices, SynthParams};
use kardinal::problem::{brute_force_optimum, classical_cost, penalty_scale, to_ising, to_qubo};
use kardinal::qaoa::{depth_sweep, QaoaConfig};
use kardinal::report::to_json_string;
use kardinal::SelectionProblem;
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn bits(s: &str) -> PyResult<BitString> {
    s.parse().map_err(err)
}

fn config_from(json: Option<&str>) -> PyResult<BacktestConfig> {
    let config: BacktestConfig = match json {
        Some(text) => serde_json::from_str(text).map_err(err)?,
        None => BacktestConfig::default(),
    };
    config.validate().map_err(err)?;
    Ok(config)
}

/// Cardinality-constrained selection problem `min q x'Σx - (1-q) μ'x - κ prev'x`, `|x| = k`.
#[pyclass(frozen, name = "SelectionProblem")]
struct PyProblem {
    inner: SelectionProblem,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (mu, sigma, q, k, prev = Vec::new(), kappa = 0.0))]
    fn new(mu: Vec<f64>, sigma: Vec<Vec<f64>>, q: f64, k: usize, prev: Vec<usize>, kappa: f64) -> PyResult<Self> {
        let inner = SelectionProblem::new(DVector::from_vec(mu), matrix(&sigma)?, q, k, prev, kappa).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    /// Objective without the continuity bonus for a bitstring such as "10110".
    fn classical_cost(&self, bitstring: &str) -> PyResult<f64> {
        classical_cost(&self.inner, &bits(bitstring)?).map_err(err)
    }

    /// Exhaustive optimum as (bitstring, cost).
    fn brute_force(&self) -> PyResult<(String, f64)> {
        let (x, c) = brute_force_optimum(&self.inner).map_err(err)?;
        Ok((x.to_string(), c))
    }

    /// Ising fields, strict-upper couplings and constant.
    fn ising(&self) -> (Vec<f64>, Vec<Vec<f64>>, f64) {
        let m = to_ising(&self.inner);
        (m.alpha.iter().copied().collect(), rows(&m.beta), m.constant)
    }

    /// Penalized QUBO (diagonal, strict-upper couplings, constant); the
    /// penalty defaults to the automatic scale.
    #[pyo3(signature = (penalty = None))]
    fn qubo(&self, penalty: Option<f64>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, f64)> {
        let q = to_qubo(&self.inner, penalty.unwrap_or_else(|| penalty_scale(&self.inner))).map_err(err)?;
        Ok((q.diag.iter().copied().collect(), rows(&q.offdiag), q.constant))
    }

    /// QAOA-XY depth sweep; returns (bitstring, cost, best_depth, final cost per depth).
    #[pyo3(signature = (p_max = 6))]
    fn qaoa(&self, py: Python<'_>, p_max: usize) -> PyResult<(String, f64, usize, Vec<f64>)> {
        let config = QaoaConfig { p_max, ..QaoaConfig::default() };
        let sweep = py.detach(|| depth_sweep(&self.inner, p_max, &config)).map_err(err)?;
        let finals = sweep.diagnostics.iter().map(|d| d.final_cost).collect();
        Ok((sweep.best.bitstring.to_string(), sweep.best.cost, sweep.best_depth, finals))
    }

    /// Best feasible annealer sample as (bitstring, qubo energy), or None.
    #[pyo3(signature = (num_reads = 5000, num_sweeps = 1000, seed = 0))]
    fn anneal(&self, py: Python<'_>, num_reads: usize, num_sweeps: usize, seed: u64) -> PyResult<Option<(String, f64)>> {
        let qubo = to_qubo(&self.inner, penalty_scale(&self.inner)).map_err(err)?;
        let config = AnnealConfig { num_reads, num_sweeps, seed, ..AnnealConfig::default() };
        let set = py.detach(|| anneal(&qubo, &config)).map_err(err)?;
        Ok(set.best_feasible(self.inner.k()).map(|s| (s.bitstring.to_string(), s.energy)))
    }
}

/// HRP weights from a (days x assets) matrix of returns.
#[pyfunction]
#[pyo3(signature = (returns, shrinkage = false))]
fn hrp_weights(returns: Vec<Vec<f64>>, shrinkage: bool) -> PyResult<Vec<f64>> {
    Ok(core_hrp_weights(&matrix(&returns)?, shrinkage).map_err(err)?.iter().copied().collect())
}

/// Sharpe-maximizing full-universe weights on `subset` within [0.05, 0.5].
#[pyfunction]
#[pyo3(signature = (subset, mu, sigma, seed = 0))]
fn max_sharpe(subset: Vec<usize>, mu: Vec<f64>, sigma: Vec<Vec<f64>>, seed: u64) -> PyResult<Vec<f64>> {
    let r = core_max_sharpe(&subset, &DVector::from_vec(mu), &matrix(&sigma)?, &AllocationConfig::default(), seed)
        .map_err(err)?;
    Ok(r.weights)
}

/// Writes the default synthetic price panel for `seed` to `path` as CSV.
#[pyfunction]
fn write_synth(seed: u64, path: PathBuf) -> PyResult<()> {
    let panel = synth_prices(seed, &SynthParams::default()).map_err(err)?;
    let file = std::fs::File::create(&path).map_err(err)?;
    panel.write_csv(file).map_err(err)
}

/// Both selection solvers plus allocation at `asof`, as JSON.
#[pyfunction]
#[pyo3(signature = (data, asof, config = None))]
fn select(py: Python<'_>, data: PathBuf, asof: &str, config: Option<&str>) -> PyResult<String> {
    let config = config_from(config)?;
    let asof: NaiveDate = asof.parse().map_err(err)?;
    let panel = load_prices(&data, &[]).map_err(err)?;
    let report = py.detach(|| select_at(&panel, &config, asof)).map_err(err)?;
    to_json_string(&report).map_err(err)
}

/// Full walk-forward backtest; returns the result document as JSON.
#[pyfunction]
#[pyo3(signature = (data, config = None))]
fn run_backtest(py: Python<'_>, data: PathBuf, config: Option<&str>) -> PyResult<String> {
    let config = config_from(config)?;
    let panel = load_prices(&data, &[]).map_err(err)?;
    let result = py.detach(|| run_walk_forward(&panel, &config)).map_err(err)?;
    to_json_string(&result).map_err(err)
}

#[pymodule]
fn pykardinal(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(hrp_weights, m)?)?;
    m.add_function(wrap_pyfunction!(max_sharpe, m)?)?;
    m.add_function(wrap_pyfunction!(write_synth, m)?)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(run_backtest, m)?)?;
    Ok(())
}
