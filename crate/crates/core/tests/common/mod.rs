//! Shared helpers for the integration tests: fixture access, seeded random
//! problems and a dense full-Hilbert-space reference simulator.

#![allow(dead_code)]

use std::path::PathBuf;

use chrono::NaiveDate;
use kardinal::backtest::{BacktestConfig, SaSettings};
use kardinal::market_data::{load_prices, PricePanel};
use kardinal::qaoa::QaoaConfig;
use kardinal::SelectionProblem;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/prices_2024_2025.csv")
}

pub fn fixture() -> PricePanel {
    load_prices(fixture_path(), &[]).expect("bundled fixture loads")
}

pub fn date(s: &str) -> NaiveDate {
    s.parse().expect("valid ISO date")
}

/// Random annualized moments resembling an equity universe.
pub fn random_moments(seed: u64, n: usize) -> (DVector<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vol = DVector::from_fn(n, |_, _| rng.random_range(0.15..0.45));
    let loadings = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-0.6..0.8));
    let specific = DVector::from_fn(n, |_, _| rng.random_range(0.2..1.0));
    let factor: DMatrix<f64> = &loadings * loadings.transpose() + DMatrix::from_diagonal(&specific);
    let corr = DMatrix::from_fn(n, n, |i, j| factor[(i, j)] / (factor[(i, i)] * factor[(j, j)]).sqrt());
    let sigma = DMatrix::from_fn(n, n, |i, j| corr[(i, j)] * vol[i] * vol[j]);
    let mu = DVector::from_fn(n, |_, _| rng.random_range(0.02..0.35));
    (mu, sigma)
}

pub fn random_problem(seed: u64, n: usize, k: usize) -> SelectionProblem {
    let (mu, sigma) = random_moments(seed, n);
    SelectionProblem::new(mu, sigma, 0.3, k, vec![], 0.0).expect("valid problem")
}

/// Bit of asset `i` inside an `n`-bit basis index (asset 0 is the most significant bit).
pub fn bit(index: usize, i: usize, n: usize) -> bool {
    index >> (n - 1 - i) & 1 == 1
}

pub fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn pauli_x() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// `I ⊗ .. ⊗ P_i ⊗ .. ⊗ I` with qubit 0 leftmost.
pub fn on_qubit(p: &DMatrix<Complex64>, i: usize, n: usize) -> DMatrix<Complex64> {
    let id = DMatrix::<Complex64>::identity(2, 2);
    (0..n).fold(DMatrix::from_element(1, 1, c(1., 0.)), |acc, q| kron(&acc, if q == i { p } else { &id }))
}

/// Dense `Σ_{i<j} (X_i X_j + Y_i Y_j)` built from Kronecker products.
pub fn dense_xy(n: usize) -> DMatrix<Complex64> {
    let (x, y) = (pauli_x(), pauli_y());
    let dim = 1 << n;
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..n {
        for j in i + 1..n {
            h += on_qubit(&x, i, n) * on_qubit(&x, j, n) + on_qubit(&y, i, n) * on_qubit(&y, j, n);
        }
    }
    h
}

pub fn dense_total_z(n: usize) -> DMatrix<Complex64> {
    let z = pauli_z();
    (0..n).fold(DMatrix::zeros(1 << n, 1 << n), |acc, i| acc + on_qubit(&z, i, n))
}

/// `exp(A)` by scaling and squaring with a truncated Taylor series.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let norm = a.iter().map(|v| v.norm()).sum::<f64>();
    let squarings = if norm > 0.25 { (norm / 0.25).log2().ceil() as u32 } else { 0 };
    let scaled = a / c(2f64.powi(squarings as i32), 0.0);
    let dim = a.nrows();
    let mut term = DMatrix::<Complex64>::identity(dim, dim);
    let mut sum = term.clone();
    for m in 1..=24 {
        term = &term * &scaled / c(m as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(-i t H)`.
pub fn evolution(h: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    expm(&(h * c(0.0, -t)))
}

/// Uniform superposition over all `n`-bit indices of weight `k`.
pub fn dense_dicke(n: usize, k: usize) -> DVector<Complex64> {
    let members: Vec<usize> = (0..1usize << n).filter(|x| x.count_ones() as usize == k).collect();
    let amp = c(1.0 / (members.len() as f64).sqrt(), 0.0);
    let mut v = DVector::zeros(1 << n);
    for x in members {
        v[x] = amp;
    }
    v
}

/// QAOA state on the full `2^n` space: Dicke start, then cost phase and
/// dense mixer exponential per layer.
pub fn dense_qaoa(diag: &[f64], n: usize, k: usize, gammas: &[f64], betas: &[f64]) -> DVector<Complex64> {
    let h = dense_xy(n);
    let mut v = dense_dicke(n, k);
    for (&g, &b) in gammas.iter().zip(betas) {
        for (x, a) in v.iter_mut().enumerate() {
            *a *= Complex64::from_polar(1.0, -g * diag[x]);
        }
        v = evolution(&h, b) * v;
    }
    v
}

/// HRP weights on the fixture window before 2025-01-01 (180 days, sample
/// covariance) from python/reference_values.py.
pub const REFERENCE_HRP_WEIGHTS: [f64; 10] = [0.08443963032911617, 0.06826885030195483, 0.073689619800531, 0.041350260664118454, 0.18631259304414097, 0.22375586797153652, 0.023591329547313425, 0.0992638710374999, 0.06119657798399403, 0.1381313993197947];

/// Two assets over two months with prices simple enough to account by hand.
pub fn micro_panel() -> PricePanel {
    let dates = [
        "2024-12-24", "2024-12-26", "2024-12-27", "2024-12-30", "2024-12-31", "2025-01-02", "2025-01-15",
        "2025-02-03", "2025-02-14", "2025-03-03",
    ]
    .iter()
    .map(|d| date(d))
    .collect();
    let a = [100.0, 102.0, 100.0, 103.0, 101.0, 105.0, 110.0, 121.0, 120.0, 133.1];
    let b = [50.0, 49.0, 50.0, 51.0, 50.0, 50.5, 52.0, 52.0, 53.0, 52.0];
    let prices = DMatrix::from_fn(10, 2, |t, i| if i == 0 { a[t] } else { b[t] });
    PricePanel::new(dates, vec!["A".into(), "B".into()], prices).unwrap()
}

pub fn micro_config() -> BacktestConfig {
    BacktestConfig {
        k: 2,
        lookback: 4,
        tau: 0.001,
        initial_capital: 1000.0,
        start: date("2025-01-01"),
        end: date("2025-02-28"),
        seed: 3,
        qaoa: QaoaConfig { p_max: 1, ..QaoaConfig::default() },
        sa: SaSettings { num_reads: 20, num_sweeps: 20, ..SaSettings::default() },
        ..BacktestConfig::default()
    }
}

