//! The K-of-N selection objective and its Ising and QUBO encodings.
//!
//! The objective for a selection `x` is
//!
//! ```text
//! cost(x) = q x'Σx - (1-q) μ'x
//! ```
//!
//! on annualized inputs. Assets held in the previous period receive a
//! continuity bonus `κ` subtracted from their linear term in every encoding.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{binomial, fixed_weight, BitString, MAX_BITS};

/// Largest feasible-set size the exhaustive oracle will scan.
pub const BRUTE_FORCE_LIMIT: u64 = 2_000_000;

/// Penalty scale multiplier applied to `max_coeff * N`.
pub const PENALTY_FACTOR: f64 = 2.5;

/// Floor for the penalty when every objective coefficient vanishes.
pub const PENALTY_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("penalty must be positive, got {0}")]
    NonPositivePenalty(f64),
    #[error("C({n},{k}) = {count} exceeds the enumeration limit")]
    TooLarge { n: usize, k: usize, count: u64 },
}

/// Annualized moments plus the selection constraints shared by every solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionProblem {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    q: f64,
    k: usize,
    prev: Vec<usize>,
    kappa: f64,
}

impl SelectionProblem {
    pub fn new(
        mu: DVector<f64>,
        sigma: DMatrix<f64>,
        q: f64,
        k: usize,
        prev: Vec<usize>,
        kappa: f64,
    ) -> Result<Self, ProblemError> {
        let n = mu.len();
        if n == 0 || n > MAX_BITS {
            return Err(ProblemError::Invalid(format!("universe size {n} not in 1..={MAX_BITS}")));
        }
        if sigma.shape() != (n, n) {
            return Err(ProblemError::DimensionMismatch { expected: n, got: sigma.nrows() });
        }
        if !(1..=n).contains(&k) {
            return Err(ProblemError::Invalid(format!("K = {k} not in 1..={n}")));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(ProblemError::Invalid(format!("q = {q} not in [0, 1]")));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(ProblemError::Invalid(format!("kappa = {kappa} must be finite and >= 0")));
        }
        if mu.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(ProblemError::Invalid("non-finite moment".into()));
        }
        let scale = sigma.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-10 * scale {
                    return Err(ProblemError::Invalid(format!("sigma not symmetric at ({i},{j})")));
                }
            }
        }
        let mut prev = prev;
        prev.sort_unstable();
        prev.dedup();
        if let Some(&bad) = prev.iter().find(|&&i| i >= n) {
            return Err(ProblemError::Invalid(format!("previous holding {bad} out of range")));
        }
        Ok(Self { mu, sigma, q, k, prev, kappa })
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn prev(&self) -> &[usize] {
        &self.prev
    }

    /// Copy of this problem with different previous holdings.
    pub fn with_prev(&self, prev: Vec<usize>) -> Result<Self, ProblemError> {
        Self::new(self.mu.clone(), self.sigma.clone(), self.q, self.k, prev, self.kappa)
    }

    /// Continuity bonus per asset: `κ` for previous holdings, else 0.
    pub fn bonus(&self) -> DVector<f64> {
        let mut b = DVector::zeros(self.n());
        for &i in &self.prev {
            b[i] = self.kappa;
        }
        b
    }

    fn check_len(&self, x: &BitString) -> Result<(), ProblemError> {
        if x.len() != self.n() {
            return Err(ProblemError::DimensionMismatch { expected: self.n(), got: x.len() });
        }
        Ok(())
    }

    fn raw_cost(&self, selected: &[usize]) -> f64 {
        let mut risk = 0.0;
        for (a, &i) in selected.iter().enumerate() {
            risk += self.sigma[(i, i)];
            for &j in &selected[a + 1..] {
                risk += 2.0 * self.sigma[(i, j)];
            }
        }
        let ret: f64 = selected.iter().map(|&i| self.mu[i]).sum();
        self.q * risk - (1.0 - self.q) * ret
    }

    fn bonus_of(&self, selected: &[usize]) -> f64 {
        selected.iter().filter(|i| self.prev.binary_search(i).is_ok()).count() as f64 * self.kappa
    }

    /// `cost(x)` minus the continuity bonus of every previously held asset in `x`.
    /// This is the quantity both solvers minimize.
    pub fn selection_cost(&self, x: &BitString) -> Result<f64, ProblemError> {
        self.check_len(x)?;
        let selected = x.indices();
        Ok(self.raw_cost(&selected) - self.bonus_of(&selected))
    }
}

/// `q x'Σx - (1-q) μ'x`; feasibility is not checked.
pub fn classical_cost(problem: &SelectionProblem, x: &BitString) -> Result<f64, ProblemError> {
    problem.check_len(x)?;
    Ok(problem.raw_cost(&x.indices()))
}

/// JSON layout of a [`SelectionProblem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub q: f64,
    pub k: usize,
    #[serde(default)]
    pub prev: Vec<usize>,
    #[serde(default)]
    pub kappa: f64,
}

impl From<&SelectionProblem> for ProblemDoc {
    fn from(p: &SelectionProblem) -> Self {
        Self {
            mu: p.mu.iter().copied().collect(),
            sigma: p.sigma.row_iter().map(|r| r.iter().copied().collect()).collect(),
            q: p.q,
            k: p.k,
            prev: p.prev.clone(),
            kappa: p.kappa,
        }
    }
}

impl TryFrom<ProblemDoc> for SelectionProblem {
    type Error = ProblemError;

    fn try_from(doc: ProblemDoc) -> Result<Self, Self::Error> {
        let n = doc.mu.len();
        if doc.sigma.len() != n || doc.sigma.iter().any(|r| r.len() != n) {
            return Err(ProblemError::DimensionMismatch { expected: n, got: doc.sigma.len() });
        }
        let sigma = DMatrix::from_fn(n, n, |i, j| doc.sigma[i][j]);
        Self::new(DVector::from_vec(doc.mu), sigma, doc.q, doc.k, doc.prev, doc.kappa)
    }
}

impl Serialize for SelectionProblem {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ProblemDoc::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SelectionProblem {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = ProblemDoc::deserialize(deserializer)?;
        SelectionProblem::try_from(doc).map_err(serde::de::Error::custom)
    }
}

/// `H = constant + Σ_i α_i z_i + Σ_{i<j} β_ij z_i z_j` with `z_i = 1 - 2 x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    pub alpha: DVector<f64>,
    /// Strictly upper-triangular couplings; entries with `i >= j` are zero.
    pub beta: DMatrix<f64>,
    pub constant: f64,
}

impl IsingModel {
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// Energy without the constant offset, for spins in `{-1, +1}`.
    pub fn field_energy(&self, z: &[f64]) -> f64 {
        let n = self.n();
        let mut e = 0.0;
        for i in 0..n {
            e += self.alpha[i] * z[i];
            for j in i + 1..n {
                e += self.beta[(i, j)] * z[i] * z[j];
            }
        }
        e
    }

    /// Full energy (including the constant) of a selection bitstring.
    pub fn energy(&self, x: &BitString) -> f64 {
        let z: Vec<f64> = (0..x.len()).map(|i| if x.get(i) { -1.0 } else { 1.0 }).collect();
        self.constant + self.field_energy(&z)
    }
}

/// Ising form of the continuity-adjusted objective under `x_i = (1 - z_i)/2`.
///
/// The substitution is exact: `energy(x) == selection_cost(x)` for every `x`,
/// so rankings over any subset of strings agree. Diagonal risk `qΣ_ii` lands
/// in the linear terms and the constant because `x_i^2 = x_i`.
pub fn to_ising(problem: &SelectionProblem) -> IsingModel {
    let n = problem.n();
    let q = problem.q;
    let bonus = problem.bonus();
    let mut alpha = DVector::zeros(n);
    let mut beta = DMatrix::zeros(n, n);
    let mut constant = 0.0;
    for i in 0..n {
        // linear coefficient of x_i in the objective
        let lin = q * problem.sigma[(i, i)] - (1.0 - q) * problem.mu[i] - bonus[i];
        alpha[i] -= 0.5 * lin;
        constant += 0.5 * lin;
        for j in i + 1..n {
            // 2qΣ_ij x_i x_j = (qΣ_ij / 2)(1 - z_i - z_j + z_i z_j)
            let c = 0.5 * q * problem.sigma[(i, j)];
            beta[(i, j)] = c;
            alpha[i] -= c;
            alpha[j] -= c;
            constant += c;
        }
    }
    IsingModel { alpha, beta, constant }
}

/// `E(x) = Σ_i Q_ii x_i + Σ_{i<j} Q_ij x_i x_j + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel {
    pub diag: DVector<f64>,
    /// Strictly upper-triangular couplings; entries with `i >= j` are zero.
    pub offdiag: DMatrix<f64>,
    pub penalty: f64,
    pub constant: f64,
}

impl QuboModel {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        if i < j {
            self.offdiag[(i, j)]
        } else {
            self.offdiag[(j, i)]
        }
    }

    pub fn energy(&self, x: &BitString) -> f64 {
        let on = x.indices();
        let mut e = self.constant;
        for (a, &i) in on.iter().enumerate() {
            e += self.diag[i];
            for &j in &on[a + 1..] {
                e += self.offdiag[(i, j)];
            }
        }
        e
    }
}

/// Objective plus the budget penalty `P (Σ x_i - K)^2`, expanded into QUBO form.
pub fn to_qubo(problem: &SelectionProblem, penalty: f64) -> Result<QuboModel, ProblemError> {
    if !(penalty > 0.0) || !penalty.is_finite() {
        return Err(ProblemError::NonPositivePenalty(penalty));
    }
    let n = problem.n();
    let q = problem.q;
    let k = problem.k as f64;
    let bonus = problem.bonus();
    let diag = DVector::from_fn(n, |i, _| {
        q * problem.sigma[(i, i)] - (1.0 - q) * problem.mu[i] + penalty * (1.0 - 2.0 * k) - bonus[i]
    });
    let mut offdiag = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            offdiag[(i, j)] = 2.0 * q * problem.sigma[(i, j)] + 2.0 * penalty;
        }
    }
    Ok(QuboModel { diag, offdiag, penalty, constant: penalty * k * k })
}

/// Largest objective coefficient magnitude entering the QUBO:
/// `|(1-q)μ_i|`, `|qΣ_ii|` and `|2qΣ_ij|`.
pub fn max_coefficient(problem: &SelectionProblem) -> f64 {
    let n = problem.n();
    let q = problem.q;
    let mut m = 0.0f64;
    for i in 0..n {
        m = m.max(((1.0 - q) * problem.mu[i]).abs());
        m = m.max((q * problem.sigma[(i, i)]).abs());
        for j in i + 1..n {
            m = m.max((2.0 * q * problem.sigma[(i, j)]).abs());
        }
    }
    m
}

/// `P = 2.5 * N * max_coeff`, floored at [`PENALTY_FLOOR`].
pub fn penalty_scale(problem: &SelectionProblem) -> f64 {
    (PENALTY_FACTOR * problem.n() as f64 * max_coefficient(problem)).max(PENALTY_FLOOR)
}

/// Exhaustive minimum of [`SelectionProblem::selection_cost`] over weight-K
/// strings. With `κ = 0` or no previous holdings this is the minimum of
/// [`classical_cost`]. Ties resolve to the lexicographically smallest string.
pub fn brute_force_optimum(problem: &SelectionProblem) -> Result<(BitString, f64), ProblemError> {
    let (n, k) = (problem.n(), problem.k);
    let count = binomial(n, k);
    if count > BRUTE_FORCE_LIMIT {
        return Err(ProblemError::TooLarge { n, k, count });
    }
    let mut best: Option<(BitString, f64)> = None;
    let mut selected = Vec::with_capacity(k);
    for x in fixed_weight(n, k) {
        selected.clear();
        selected.extend((0..n).filter(|&i| x.get(i)));
        let c = problem.raw_cost(&selected) - problem.bonus_of(&selected);
        if best.as_ref().is_none_or(|(_, b)| c < *b) {
            best = Some((x, c));
        }
    }
    best.ok_or_else(|| ProblemError::Invalid("empty feasible set".into()))
}
