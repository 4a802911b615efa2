//! Metropolis simulated annealing over QUBO models.
//!
//! Each read starts from a uniformly random bitstring and performs
//! `num_sweeps` sweeps; a sweep proposes one flip per variable in a fresh
//! random order. Inverse temperature follows a geometric schedule from
//! `beta_hot` to `beta_cold`. Read `r` draws from its own ChaCha stream keyed
//! by `(seed, r)`, so results do not depend on how reads are scheduled.

use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::problem::QuboModel;
use crate::report::fmt_f64;

#[derive(Debug, Error, PartialEq)]
pub enum AnnealError {
    #[error("invalid anneal configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealConfig {
    pub num_reads: usize,
    pub num_sweeps: usize,
    /// Initial inverse temperature; derived from the model when absent.
    pub beta_hot: Option<f64>,
    /// Final inverse temperature; derived from the model when absent.
    pub beta_cold: Option<f64>,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self { num_reads: 5000, num_sweeps: 1000, beta_hot: None, beta_cold: None, seed: 0 }
    }
}

impl AnnealConfig {
    /// The `(beta_hot, beta_cold)` pair used for `qubo`.
    pub fn resolved_betas(&self, qubo: &QuboModel) -> Result<(f64, f64), AnnealError> {
        let (auto_hot, auto_cold) = default_beta_range(qubo);
        let hot = self.beta_hot.unwrap_or(auto_hot);
        let cold = self.beta_cold.unwrap_or(auto_cold);
        if !(hot > 0.0 && hot < cold && cold.is_finite()) {
            return Err(AnnealError::InvalidConfig(format!("need 0 < beta_hot < beta_cold, got {hot} and {cold}")));
        }
        Ok((hot, cold))
    }
}

/// `beta_hot = ln 2 / ΔE_max` and `beta_cold = ln 100 / ΔE_min`, where
/// `ΔE_max` bounds any single-flip energy change and `ΔE_min` is the smallest
/// nonzero coefficient magnitude. Hot moves are then accepted with
/// probability at least 1/2 and the smallest cold uphill move with at most 1/100.
pub fn default_beta_range(qubo: &QuboModel) -> (f64, f64) {
    let n = qubo.n();
    let mut max_flip = 0.0f64;
    let mut min_coef = f64::INFINITY;
    for i in 0..n {
        let mut bound = qubo.diag[i].abs();
        for j in 0..n {
            if j != i {
                bound += qubo.coupling(i, j).abs();
            }
        }
        max_flip = max_flip.max(bound);
        for c in std::iter::once(qubo.diag[i]).chain((i + 1..n).map(|j| qubo.offdiag[(i, j)])) {
            if c != 0.0 {
                min_coef = min_coef.min(c.abs());
            }
        }
    }
    if max_flip == 0.0 || !min_coef.is_finite() {
        return (2f64.ln(), 100f64.ln());
    }
    (2f64.ln() / max_flip, 100f64.ln() / min_coef)
}

/// `Σ_i Q_ii x_i + Σ_{i<j} Q_ij x_i x_j + constant`.
pub fn qubo_energy(qubo: &QuboModel, x: &BitString) -> Result<f64, AnnealError> {
    if x.len() != qubo.n() {
        return Err(AnnealError::DimensionMismatch { expected: qubo.n(), got: x.len() });
    }
    Ok(qubo.energy(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub read: usize,
    pub bitstring: BitString,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    /// Final state of every read, in read order.
    pub samples: Vec<Sample>,
    pub beta_hot: f64,
    pub beta_cold: f64,
}

impl SampleSet {
    pub fn best_feasible(&self, k: usize) -> Option<&Sample> {
        best_feasible(&self.samples, k)
    }

    pub fn feasible_fraction(&self, k: usize) -> f64 {
        let hits = self.samples.iter().filter(|s| s.bitstring.count_ones() == k).count();
        hits as f64 / self.samples.len().max(1) as f64
    }

    /// Writes `read,energy,bitstring,feasible` rows.
    pub fn write_csv<W: Write>(&self, out: W, k: usize) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["read", "energy", "bitstring", "feasible"])?;
        for s in &self.samples {
            w.write_record([
                s.read.to_string(),
                fmt_f64(s.energy),
                s.bitstring.to_string(),
                (s.bitstring.count_ones() == k).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lowest-energy sample of weight `k`; ties go to the smaller bitstring.
pub fn best_feasible(samples: &[Sample], k: usize) -> Option<&Sample> {
    samples
        .iter()
        .filter(|s| s.bitstring.count_ones() == k)
        .min_by(|a, b| a.energy.total_cmp(&b.energy).then(a.bitstring.cmp(&b.bitstring)))
}

/// Dense symmetric couplings plus incrementally maintained local fields.
struct FlipState<'a> {
    qubo: &'a QuboModel,
    couplings: &'a DMatrix<f64>,
    x: Vec<bool>,
    field: Vec<f64>,
}

impl<'a> FlipState<'a> {
    fn new(qubo: &'a QuboModel, couplings: &'a DMatrix<f64>, x: Vec<bool>) -> Self {
        let n = x.len();
        let field = (0..n)
            .map(|i| (0..n).filter(|&j| x[j]).map(|j| couplings[(i, j)]).sum())
            .collect();
        Self { qubo, couplings, x, field }
    }

    #[inline]
    fn delta(&self, i: usize) -> f64 {
        let d = self.qubo.diag[i] + self.field[i];
        if self.x[i] {
            -d
        } else {
            d
        }
    }

    #[inline]
    fn flip(&mut self, i: usize) {
        let s = if self.x[i] { -1.0 } else { 1.0 };
        self.x[i] = !self.x[i];
        for (f, c) in self.field.iter_mut().zip(self.couplings.column(i).iter()) {
            *f += s * c;
        }
    }

    #[inline]
    fn sweep(&mut self, beta: f64, order: &mut [usize], rng: &mut ChaCha8Rng) {
        order.shuffle(rng);
        for &i in order.iter() {
            let de = self.delta(i);
            if de <= 0.0 || rng.random::<f64>() < (-beta * de).exp() {
                self.flip(i);
            }
        }
    }

    fn bitstring(&self) -> BitString {
        BitString::from_bools(&self.x).expect("model size checked")
    }
}

fn symmetric_couplings(qubo: &QuboModel) -> DMatrix<f64> {
    let n = qubo.n();
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { qubo.coupling(i, j) })
}

fn read_rng(seed: u64, read: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(read as u64);
    rng
}

fn geometric_schedule(hot: f64, cold: f64, sweeps: usize) -> Vec<f64> {
    if sweeps == 1 {
        return vec![cold];
    }
    let ratio = cold / hot;
    (0..sweeps).map(|s| hot * ratio.powf(s as f64 / (sweeps - 1) as f64)).collect()
}

pub fn anneal(qubo: &QuboModel, config: &AnnealConfig) -> Result<SampleSet, AnnealError> {
    if config.num_reads == 0 || config.num_sweeps == 0 {
        return Err(AnnealError::InvalidConfig("reads and sweeps must be at least 1".into()));
    }
    let (beta_hot, beta_cold) = config.resolved_betas(qubo)?;
    let schedule = geometric_schedule(beta_hot, beta_cold, config.num_sweeps);
    let couplings = symmetric_couplings(qubo);
    let n = qubo.n();
    let samples = (0..config.num_reads)
        .into_par_iter()
        .map(|read| {
            let mut rng = read_rng(config.seed, read);
            let x = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let mut state = FlipState::new(qubo, &couplings, x);
            let mut order: Vec<usize> = (0..n).collect();
            for &beta in &schedule {
                state.sweep(beta, &mut order, &mut rng);
            }
            let bitstring = state.bitstring();
            Sample { read, bitstring, energy: qubo.energy(&bitstring) }
        })
        .collect();
    Ok(SampleSet { samples, beta_hot, beta_cold })
}

/// Fixed-temperature Metropolis chain: `sweeps` random-order sweeps at
/// inverse temperature `beta`, calling `visit` with the state after each.
pub fn metropolis_chain<F: FnMut(&BitString)>(
    qubo: &QuboModel,
    beta: f64,
    sweeps: usize,
    seed: u64,
    mut visit: F,
) -> Result<(), AnnealError> {
    if !(beta >= 0.0) {
        return Err(AnnealError::InvalidConfig(format!("beta must be >= 0, got {beta}")));
    }
    let couplings = symmetric_couplings(qubo);
    let n = qubo.n();
    let mut rng = read_rng(seed, 0);
    let x = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let mut state = FlipState::new(qubo, &couplings, x);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..sweeps {
        state.sweep(beta, &mut order, &mut rng);
        visit(&state.bitstring());
    }
    Ok(())
}
