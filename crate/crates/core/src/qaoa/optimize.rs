use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::{SubspaceBasis, SubspaceState};
use super::mixer::{spectrum_for, MixerSpectrum};
use super::sim::{cost_diagonal, qaoa_state, value_and_gradient};
use super::QaoaError;
use crate::bits::BitString;
use crate::problem::{to_ising, SelectionProblem};

/// Per-layer cost angles `γ` and mixer angles `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    gammas: Vec<f64>,
    betas: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self, QaoaError> {
        if gammas.is_empty() || gammas.len() != betas.len() {
            return Err(QaoaError::InvalidParams(format!(
                "need equal non-zero layer counts, got {} gammas and {} betas",
                gammas.len(),
                betas.len()
            )));
        }
        if gammas.iter().chain(&betas).any(|v| !v.is_finite()) {
            return Err(QaoaError::InvalidParams("non-finite angle".into()));
        }
        Ok(Self { gammas, betas })
    }

    pub fn depth(&self) -> usize {
        self.gammas.len()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Flattened `[γ_1..γ_p, β_1..β_p]`, the layout used by gradients.
    pub fn to_flat(&self) -> Vec<f64> {
        self.gammas.iter().chain(&self.betas).copied().collect()
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self, QaoaError> {
        if !flat.len().is_multiple_of(2) {
            return Err(QaoaError::InvalidParams(format!("odd parameter count {}", flat.len())));
        }
        let p = flat.len() / 2;
        Self::new(flat[..p].to_vec(), flat[p..].to_vec())
    }
}

/// Linear ramp over layers `l = 1..p`, endpoints inclusive; `p = 1` takes the midpoint.
pub fn trotter_init(p: usize) -> Result<QaoaParams, QaoaError> {
    ramp(p, DEFAULT_GAMMA_RAMP, DEFAULT_BETA_RAMP)
}

const DEFAULT_GAMMA_RAMP: [f64; 2] = [0.1, 0.5];
const DEFAULT_BETA_RAMP: [f64; 2] = [0.5, 0.1];

fn ramp(p: usize, gamma: [f64; 2], beta: [f64; 2]) -> Result<QaoaParams, QaoaError> {
    if p == 0 {
        return Err(QaoaError::InvalidParams("depth must be at least 1".into()));
    }
    let at = |ends: [f64; 2], l: usize| {
        let t = if p == 1 { 0.5 } else { l as f64 / (p - 1) as f64 };
        ends[0] * (1.0 - t) + ends[1] * t
    };
    QaoaParams::new((0..p).map(|l| at(gamma, l)).collect(), (0..p).map(|l| at(beta, l)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QaoaConfig {
    pub p_max: usize,
    pub stepsize: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Minimum improvement of the best cost that resets the stall counter.
    pub tolerance: f64,
    /// Consecutive stalled iterations before stopping.
    pub patience: usize,
    pub readout_threshold: f64,
    pub gamma_ramp: [f64; 2],
    pub beta_ramp: [f64; 2],
    /// Optimize the depths of a sweep concurrently.
    pub parallel: bool,
}

impl Default for QaoaConfig {
    fn default() -> Self {
        Self {
            p_max: 6,
            stepsize: 0.02,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-10,
            max_iterations: 100,
            tolerance: 1e-6,
            patience: 10,
            readout_threshold: 0.01,
            gamma_ramp: DEFAULT_GAMMA_RAMP,
            beta_ramp: DEFAULT_BETA_RAMP,
            parallel: true,
        }
    }
}

impl QaoaConfig {
    pub fn validate(&self) -> Result<(), QaoaError> {
        let ok = self.p_max >= 1
            && self.stepsize > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.max_iterations >= 1
            && self.tolerance >= 0.0
            && self.readout_threshold >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(QaoaError::InvalidParams(format!("invalid QAOA configuration {self:?}")))
        }
    }

    pub fn initial_params(&self, p: usize) -> Result<QaoaParams, QaoaError> {
        ramp(p, self.gamma_ramp, self.beta_ramp)
    }
}

/// Per-iteration record of an optimization run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub costs: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub wall_ms: Vec<f64>,
}

impl OptimizerTrace {
    pub fn iterations(&self) -> usize {
        self.costs.len()
    }

    pub fn best_cost(&self) -> f64 {
        self.costs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean_grad_norm(&self) -> f64 {
        if self.grad_norms.is_empty() {
            return 0.0;
        }
        self.grad_norms.iter().sum::<f64>() / self.grad_norms.len() as f64
    }
}

/// Everything a QAOA run needs that depends only on the problem.
#[derive(Debug, Clone)]
pub struct QaoaContext {
    pub problem: SelectionProblem,
    pub basis: Arc<SubspaceBasis>,
    pub spectrum: Arc<MixerSpectrum>,
    pub diag: Vec<f64>,
}

impl QaoaContext {
    pub fn new(problem: &SelectionProblem) -> Result<Self, QaoaError> {
        let (basis, spectrum) = spectrum_for(problem.n(), problem.k())?;
        let diag = cost_diagonal(&to_ising(problem), &basis)?;
        Ok(Self { problem: problem.clone(), basis, spectrum, diag })
    }

    pub fn state(&self, params: &QaoaParams) -> Result<SubspaceState, QaoaError> {
        qaoa_state(params, &self.diag, &self.spectrum, self.basis.clone())
    }

    pub fn value_and_gradient(&self, params: &QaoaParams) -> Result<(f64, Vec<f64>), QaoaError> {
        value_and_gradient(params, &self.diag, &self.spectrum, self.basis.clone())
    }
}

/// Adam from the Trotter ramp; returns the best parameters seen, not the last.
pub fn adam_optimize(
    ctx: &QaoaContext,
    p: usize,
    config: &QaoaConfig,
) -> Result<(QaoaParams, OptimizerTrace), QaoaError> {
    config.validate()?;
    let mut theta = config.initial_params(p)?.to_flat();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut best = (f64::INFINITY, theta.clone());
    let mut anchor = f64::INFINITY;
    let mut stalled = 0;
    let mut trace = OptimizerTrace::default();
    for t in 1..=config.max_iterations {
        let start = Instant::now();
        let params = QaoaParams::from_flat(&theta)?;
        let (cost, grad) = ctx.value_and_gradient(&params)?;
        if cost < best.0 {
            best = (cost, theta.clone());
        }
        if cost < anchor - config.tolerance {
            anchor = cost;
            stalled = 0;
        } else {
            stalled += 1;
        }
        let b1t = 1.0 - config.beta1.powi(t as i32);
        let b2t = 1.0 - config.beta2.powi(t as i32);
        for i in 0..theta.len() {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
            theta[i] -= config.stepsize * (m[i] / b1t) / ((v[i] / b2t).sqrt() + config.epsilon);
        }
        trace.costs.push(cost);
        trace.grad_norms.push(grad.iter().map(|g| g * g).sum::<f64>().sqrt());
        trace.wall_ms.push(start.elapsed().as_secs_f64() * 1e3);
        if stalled >= config.patience {
            break;
        }
    }
    Ok((QaoaParams::from_flat(&best.1)?, trace))
}

/// A measured selection with its probability and continuity-adjusted cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub bitstring: BitString,
    pub probability: f64,
    pub cost: f64,
}

/// Strings with probability at least `threshold`, ascending by (cost, bitstring).
pub fn readout(
    state: &SubspaceState,
    problem: &SelectionProblem,
    threshold: f64,
) -> Result<Vec<Candidate>, QaoaError> {
    let basis = state.basis();
    if basis.n() != problem.n() {
        return Err(QaoaError::DimensionMismatch { expected: problem.n(), got: basis.n() });
    }
    let mut out = Vec::new();
    for (j, prob) in state.probabilities().into_iter().enumerate() {
        if prob >= threshold {
            let x = basis.state(j);
            assert_eq!(x.count_ones(), problem.k(), "subspace state left the feasible block");
            let cost = problem.selection_cost(&x).expect("basis matches problem size");
            out.push(Candidate { bitstring: x, probability: prob, cost });
        }
    }
    if out.is_empty() {
        return Err(QaoaError::EmptyReadout { threshold });
    }
    out.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.bitstring.cmp(&b.bitstring)));
    Ok(out)
}

/// [`readout`], falling back to the single most probable string. The flag
/// reports whether the fallback was taken.
pub fn readout_or_argmax(state: &SubspaceState, problem: &SelectionProblem, threshold: f64) -> (Vec<Candidate>, bool) {
    match readout(state, problem, threshold) {
        Ok(c) => (c, false),
        Err(_) => {
            let probs = state.probabilities();
            // first maximum, i.e. the smallest string among ties
            let j = (0..probs.len()).fold(0, |best, j| if probs[j] > probs[best] { j } else { best });
            let x = state.basis().state(j);
            let cost = problem.selection_cost(&x).expect("basis matches problem size");
            (vec![Candidate { bitstring: x, probability: probs[j], cost }], true)
        }
    }
}

/// Diagnostics for one depth of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthDiagnostic {
    pub p: usize,
    /// Expectation of the cost diagonal at the initial ramp parameters.
    pub initial_cost: f64,
    /// Best expectation reached by the optimizer.
    pub final_cost: f64,
    pub iterations: usize,
    /// Mean gradient L2 norm over the optimizer trace.
    pub grad_norm: f64,
    pub wall_ms: f64,
    pub best_bitstring: Option<BitString>,
    pub best_candidate_cost: Option<f64>,
    pub readout_fallback: bool,
    pub params: Option<QaoaParams>,
    pub trace: OptimizerTrace,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub best: Candidate,
    pub best_depth: usize,
    pub diagnostics: Vec<DepthDiagnostic>,
}

fn run_depth(ctx: &QaoaContext, p: usize, config: &QaoaConfig) -> (DepthDiagnostic, Option<Candidate>) {
    let start = Instant::now();
    let attempt = || -> Result<_, QaoaError> {
        let (params, trace) = adam_optimize(ctx, p, config)?;
        let state = ctx.state(&params)?;
        let (cands, fallback) = readout_or_argmax(&state, &ctx.problem, config.readout_threshold);
        Ok((params, trace, cands.into_iter().next(), fallback))
    };
    match attempt() {
        Ok((params, trace, best, fallback)) => {
            let diag = DepthDiagnostic {
                p,
                initial_cost: trace.costs[0],
                final_cost: trace.best_cost(),
                iterations: trace.iterations(),
                grad_norm: trace.mean_grad_norm(),
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                best_bitstring: best.as_ref().map(|c| c.bitstring),
                best_candidate_cost: best.as_ref().map(|c| c.cost),
                readout_fallback: fallback,
                params: Some(params),
                trace,
                error: None,
            };
            (diag, best)
        }
        Err(e) => {
            let diag = DepthDiagnostic {
                p,
                initial_cost: f64::NAN,
                final_cost: f64::NAN,
                iterations: 0,
                grad_norm: f64::NAN,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                best_bitstring: None,
                best_candidate_cost: None,
                readout_fallback: false,
                params: None,
                trace: OptimizerTrace::default(),
                error: Some(e.to_string()),
            };
            (diag, None)
        }
    }
}

/// Optimizes and reads out every depth `1..=p_max`, each from a fresh ramp,
/// and returns the cheapest candidate across depths. A failed depth is
/// recorded in the diagnostics and skipped.
pub fn depth_sweep(problem: &SelectionProblem, p_max: usize, config: &QaoaConfig) -> Result<SweepResult, QaoaError> {
    if p_max == 0 {
        return Err(QaoaError::InvalidParams("p_max must be at least 1".into()));
    }
    config.validate()?;
    let ctx = QaoaContext::new(problem)?;
    let runs: Vec<_> = if config.parallel {
        (1..=p_max).into_par_iter().map(|p| run_depth(&ctx, p, config)).collect()
    } else {
        (1..=p_max).map(|p| run_depth(&ctx, p, config)).collect()
    };
    let mut best: Option<(Candidate, usize)> = None;
    let mut diagnostics = Vec::with_capacity(p_max);
    for (diag, cand) in runs {
        if let Some(c) = cand {
            let better = match &best {
                None => true,
                Some((b, _)) => c.cost.total_cmp(&b.cost).then(c.bitstring.cmp(&b.bitstring)).is_lt(),
            };
            if better {
                best = Some((c, diag.p));
            }
        }
        diagnostics.push(diag);
    }
    match best {
        Some((best, best_depth)) => Ok(SweepResult { best, best_depth, diagnostics }),
        None => Err(QaoaError::Numeric(
            diagnostics.iter().filter_map(|d| d.error.clone()).collect::<Vec<_>>().join("; "),
        )),
    }
}
