//! Sharpe maximization against random feasible search.

mod common;

use common::*;
use kardinal::allocation::{max_sharpe, project_box_simplex, sharpe, AllocationConfig};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

/// Uniform points of the simplex, rejected until they satisfy the box.
pub fn random_feasible(rng: &mut ChaCha8Rng, k: usize, lower: f64, upper: f64) -> DVector<f64> {
    loop {
        let e: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = e.iter().sum();
        let w = DVector::from_iterator(k, e.iter().map(|v| v / s));
        if w.iter().all(|v| *v >= lower && *v <= upper) {
            return w;
        }
    }
}

#[test]
fn beats_random_search() {
    let config = AllocationConfig::default();
    for seed in 0..10 {
        let (mu, sigma) = random_moments(400 + seed, 10);
        let subset = [0, 2, 3, 6, 9];
        let r = max_sharpe(&subset, &mu, &sigma, &config, seed).unwrap();
        let w = DVector::from_vec(r.weights.clone());
        let got = sharpe(&w, &mu, &sigma).unwrap();
        let sub_mu = DVector::from_iterator(5, subset.iter().map(|&i| mu[i]));
        let sub_sigma = sigma.select_rows(&subset).select_columns(&subset);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let best = (0..2000)
            .map(|_| sharpe(&random_feasible(&mut rng, 5, 0.05, 0.5), &sub_mu, &sub_sigma).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(got >= best - 1e-6, "seed {seed}: {got} < {best}");
        assert!((w.sum() - 1.0).abs() < 1e-8);
        for (i, v) in w.iter().enumerate() {
            if subset.contains(&i) {
                assert!(*v >= 0.05 - 1e-8 && *v <= 0.5 + 1e-8);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }
}

#[test]
fn projection_is_nearest_feasible_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let v = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let p = project_box_simplex(&v, 0.05, 0.5);
        let d = (&p - &v).norm();
        for _ in 0..200 {
            let q = random_feasible(&mut rng, 5, 0.05, 0.5);
            assert!((&q - &v).norm() >= d - 1e-9);
        }
    }
}
