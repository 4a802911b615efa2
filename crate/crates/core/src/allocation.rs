//! Long-only Sharpe-maximizing weights on a selected subset.
//!
//! Projected gradient ascent over `{w : Σw = 1, lower ≤ w ≤ upper}` with
//! Barzilai-Borwein steps and backtracking, restarted from equal weights,
//! inverse-variance weights and a few seeded random feasible points.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::hrp::hrp_weights;

#[derive(Debug, Error, PartialEq)]
pub enum AllocationError {
    #[error("box [{lower}, {upper}] cannot hold {k} weights summing to 1")]
    InfeasibleBox { k: usize, lower: f64, upper: f64 },
    #[error("portfolio has zero risk")]
    ZeroRisk,
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("invalid subset: {0}")]
    InvalidSubset(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AllocationConfig {
    pub lower: f64,
    pub upper: f64,
    pub random_starts: usize,
    pub max_iterations: usize,
    /// Stop when the projected-gradient step is shorter than this.
    pub tolerance: f64,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        Self { lower: 0.05, upper: 0.5, random_starts: 8, max_iterations: 500, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    /// Full-universe weights; zero off the selected subset.
    pub weights: Vec<f64>,
    pub success: bool,
    pub fallback_used: bool,
    /// Annualized Sharpe ratio of `weights` at zero risk-free rate, when defined.
    pub sharpe: Option<f64>,
    /// Why the fallback path was taken.
    pub note: Option<String>,
}

/// `μᵀw / sqrt(wᵀΣw)`.
pub fn sharpe(w: &DVector<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64, AllocationError> {
    let var = w.dot(&(sigma * w));
    if !(var > 0.0) {
        return Err(AllocationError::ZeroRisk);
    }
    Ok(mu.dot(w) / var.sqrt())
}

/// Euclidean projection onto `{Σw = 1, lower ≤ w ≤ upper}`.
///
/// The projection is `clip(v - τ, lower, upper)` for the unique shift `τ`
/// that restores the budget; `τ` is found by bisection.
pub fn project_box_simplex(v: &DVector<f64>, lower: f64, upper: f64) -> DVector<f64> {
    let k = v.len();
    let total = |tau: f64| v.iter().map(|x| (x - tau).clamp(lower, upper)).sum::<f64>();
    let mut lo = v.min() - upper;
    let mut hi = v.max() - lower;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut w = v.map(|x| (x - 0.5 * (lo + hi)).clamp(lower, upper));
    // spread the rounding residue over coordinates strictly inside the box
    let free: Vec<usize> = (0..k).filter(|&i| w[i] > lower && w[i] < upper).collect();
    if !free.is_empty() {
        let r = (1.0 - w.sum()) / free.len() as f64;
        for i in free {
            w[i] = (w[i] + r).clamp(lower, upper);
        }
    }
    w
}

fn sharpe_gradient(w: &DVector<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Option<(f64, DVector<f64>)> {
    let sw = sigma * w;
    let var = w.dot(&sw);
    if !(var > 0.0) {
        return None;
    }
    let s = var.sqrt();
    let m = mu.dot(w);
    let grad = mu / s - sw * (m / (s * var));
    Some((m / s, grad))
}

fn ascend(
    start: DVector<f64>,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    config: &AllocationConfig,
) -> Option<(f64, DVector<f64>)> {
    let (lower, upper) = (config.lower, config.upper);
    let mut w = project_box_simplex(&start, lower, upper);
    let (mut f, mut g) = sharpe_gradient(&w, mu, sigma)?;
    let mut step = 1.0;
    for _ in 0..config.max_iterations {
        let pg = project_box_simplex(&(&w + &g), lower, upper) - &w;
        if pg.norm() < config.tolerance {
            break;
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = project_box_simplex(&(&w + &g * t), lower, upper);
            if let Some((fc, gc)) = sharpe_gradient(&cand, mu, sigma) {
                if fc >= f + 1e-4 * g.dot(&(&cand - &w)) {
                    accepted = Some((cand, fc, gc));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((wn, fn_, gn)) = accepted else { break };
        let dw = &wn - &w;
        let curvature = -dw.dot(&(&gn - &g));
        step = if curvature > 0.0 { (dw.dot(&dw) / curvature).clamp(1e-8, 1e6) } else { (2.0 * t).min(1e6) };
        if dw.norm() == 0.0 {
            break;
        }
        w = wn;
        f = fn_;
        g = gn;
    }
    f.is_finite().then_some((f, w))
}

fn check_box(k: usize, lower: f64, upper: f64) -> Result<(), AllocationError> {
    let tol = 1e-12;
    if k == 0 || lower < 0.0 || lower > upper || k as f64 * lower > 1.0 + tol || (k as f64) * upper < 1.0 - tol {
        return Err(AllocationError::InfeasibleBox { k, lower, upper });
    }
    Ok(())
}

/// Sharpe-max weights on `subset`, embedded in a full-universe vector.
pub fn max_sharpe(
    subset: &[usize],
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    config: &AllocationConfig,
    seed: u64,
) -> Result<AllocationResult, AllocationError> {
    let n = mu.len();
    if sigma.shape() != (n, n) {
        return Err(AllocationError::InvalidSubset(format!("sigma shape {:?} for {n} assets", sigma.shape())));
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != subset.len() || sorted.iter().any(|&i| i >= n) {
        return Err(AllocationError::InvalidSubset(format!("{subset:?} over {n} assets")));
    }
    let k = subset.len();
    check_box(k, config.lower, config.upper)?;
    let mu_s = DVector::from_iterator(k, subset.iter().map(|&i| mu[i]));
    let sigma_s = DMatrix::from_fn(k, k, |a, b| sigma[(subset[a], subset[b])]);
    if mu_s.iter().chain(sigma_s.iter()).any(|v| !v.is_finite()) {
        return Err(AllocationError::NumericFailure("non-finite moments".into()));
    }
    if sigma_s.iter().all(|v| *v == 0.0) {
        return Err(AllocationError::ZeroRisk);
    }

    let mut starts = vec![DVector::from_element(k, 1.0 / k as f64)];
    let inv: Vec<f64> = (0..k).map(|i| 1.0 / sigma_s[(i, i)]).collect();
    if inv.iter().all(|v| v.is_finite() && *v > 0.0) {
        let total: f64 = inv.iter().sum();
        starts.push(DVector::from_iterator(k, inv.iter().map(|v| v / total)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..config.random_starts {
        let e: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = e.iter().sum();
        let slack = 1.0 - k as f64 * config.lower;
        starts.push(DVector::from_iterator(k, e.iter().map(|x| config.lower + slack * x / total)));
    }

    let mut best: Option<(f64, DVector<f64>)> = None;
    for start in starts {
        if let Some((f, w)) = ascend(start, &mu_s, &sigma_s, config) {
            if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
                best = Some((f, w));
            }
        }
    }
    let (f, w) = best.ok_or(AllocationError::ZeroRisk)?;
    let mut weights = vec![0.0; n];
    for (a, &i) in subset.iter().enumerate() {
        weights[i] = w[a];
    }
    Ok(AllocationResult { weights, success: true, fallback_used: false, sharpe: Some(f), note: None })
}

fn full_sharpe(weights: &[f64], mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Option<f64> {
    sharpe(&DVector::from_column_slice(weights), mu, sigma).ok()
}

/// Full-universe HRP weights flagged as a fallback; equal weights if HRP
/// itself cannot run.
pub fn hrp_fallback(
    reason: String,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    returns: &DMatrix<f64>,
    hrp_shrinkage: bool,
) -> AllocationResult {
    let n = mu.len();
    let (weights, note) = match hrp_weights(returns, hrp_shrinkage) {
        Ok(w) => (w.iter().copied().collect::<Vec<_>>(), reason),
        Err(e) => (vec![1.0 / n as f64; n], format!("{reason}; HRP failed ({e}), equal weights used")),
    };
    let sharpe = full_sharpe(&weights, mu, sigma);
    AllocationResult { weights, success: false, fallback_used: true, sharpe, note: Some(note) }
}

/// Sharpe-max on a valid selection, otherwise full-universe HRP.
#[allow(clippy::too_many_arguments)]
pub fn allocate_or_fallback(
    selection: Option<&BitString>,
    k: usize,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    returns: &DMatrix<f64>,
    config: &AllocationConfig,
    seed: u64,
    hrp_shrinkage: bool,
) -> AllocationResult {
    let reason = match selection {
        None => "no selection".to_string(),
        Some(x) if x.len() != mu.len() => format!("selection length {} for {} assets", x.len(), mu.len()),
        Some(x) if x.count_ones() != k || k == 0 => format!("selection {x} does not have weight {k}"),
        Some(x) => match max_sharpe(&x.indices(), mu, sigma, config, seed) {
            Ok(r) => return r,
            Err(e) => format!("Sharpe maximization failed: {e}"),
        },
    };
    hrp_fallback(reason, mu, sigma, returns, hrp_shrinkage)
}
