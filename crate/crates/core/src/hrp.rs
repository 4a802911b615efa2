//! Hierarchical Risk Parity.
//!
//! Correlation distances feed a single-linkage clustering; the dendrogram's
//! leaf order quasi-diagonalizes the covariance, and recursive bisection
//! splits capital between contiguous halves in inverse proportion to their
//! inverse-variance cluster risk.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{ledoit_wolf, sample_covariance, MarketError};

#[derive(Debug, Error)]
pub enum HrpError {
    #[error("asset {0} has zero variance")]
    ZeroVariance(usize),
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("order is not a permutation of 0..{0}")]
    BadOrder(usize),
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// `D_ij = sqrt(0.5 (1 - ρ_ij))`.
pub fn corr_distance(cov: &DMatrix<f64>) -> Result<DMatrix<f64>, HrpError> {
    let n = check_square(cov)?;
    let sd: Vec<f64> = (0..n).map(|i| cov[(i, i)].sqrt()).collect();
    if let Some(i) = sd.iter().position(|s| !(*s > 0.0)) {
        return Err(HrpError::ZeroVariance(i));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let rho = (cov[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0);
            (0.5 * (1.0 - rho)).sqrt()
        }
    }))
}

fn check_square(m: &DMatrix<f64>) -> Result<usize, HrpError> {
    if !m.is_square() {
        return Err(HrpError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

/// One agglomeration step. Leaves are clusters `0..n`; the cluster formed by
/// merge `m` has id `n + m`. `left < right` always.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
}

/// Single-linkage agglomeration. Among equally distant pairs the one with the
/// smallest `(min id, max id)` merges first.
pub fn single_linkage(dist: &DMatrix<f64>) -> Result<Dendrogram, HrpError> {
    let n = check_square(dist)?;
    let mut d = dist.clone();
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for m in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in (0..n).filter(|&a| active[a]) {
            for b in (a + 1..n).filter(|&b| active[b]) {
                let key = (d[(a, b)], id[a].min(id[b]), id[a].max(id[b]));
                let better = match best {
                    None => true,
                    Some((bd, lo, hi, _, _)) => key.0.total_cmp(&bd).then((key.1, key.2).cmp(&(lo, hi))).is_lt(),
                };
                if better {
                    best = Some((key.0, key.1, key.2, a, b));
                }
            }
        }
        let (distance, left, right, a, b) = best.expect("at least two active clusters");
        for t in 0..n {
            let v = d[(a, t)].min(d[(b, t)]);
            d[(a, t)] = v;
            d[(t, a)] = v;
        }
        active[b] = false;
        size[a] += size[b];
        id[a] = n + m;
        merges.push(Merge { left, right, distance, size: size[a] });
    }
    Ok(Dendrogram { n_leaves: n, merges })
}

/// Leaves in pre-order, left subtree first.
pub fn quasi_diagonalize(tree: &Dendrogram) -> Vec<usize> {
    let n = tree.n_leaves;
    if n == 0 {
        return Vec::new();
    }
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![if n == 1 { 0 } else { n + tree.merges.len() - 1 }];
    while let Some(c) = stack.pop() {
        if c < n {
            order.push(c);
        } else {
            let m = &tree.merges[c - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    order
}

/// Variance of the inverse-variance portfolio on `members`.
fn cluster_variance(cov: &DMatrix<f64>, members: &[usize]) -> f64 {
    let inv: Vec<f64> = members.iter().map(|&i| 1.0 / cov[(i, i)]).collect();
    let total: f64 = inv.iter().sum();
    let w: Vec<f64> = inv.iter().map(|v| v / total).collect();
    let mut var = 0.0;
    for (a, &i) in members.iter().enumerate() {
        for (b, &j) in members.iter().enumerate() {
            var += w[a] * w[b] * cov[(i, j)];
        }
    }
    var
}

/// Top-down allocation along `order`. Each cluster splits into its first
/// `len / 2` members and the rest.
pub fn recursive_bisection(cov: &DMatrix<f64>, order: &[usize]) -> Result<DVector<f64>, HrpError> {
    let n = check_square(cov)?;
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
        return Err(HrpError::BadOrder(n));
    }
    let mut w = DVector::from_element(n, 1.0);
    let mut clusters: Vec<&[usize]> = vec![order];
    while !clusters.is_empty() {
        let mut next = Vec::new();
        for c in clusters.into_iter().filter(|c| c.len() > 1) {
            let (left, right) = c.split_at(c.len() / 2);
            let (vl, vr) = (cluster_variance(cov, left), cluster_variance(cov, right));
            let alpha = if vl + vr > 0.0 && (vl + vr).is_finite() { 1.0 - vl / (vl + vr) } else { 0.5 };
            for &i in left {
                w[i] *= alpha;
            }
            for &i in right {
                w[i] *= 1.0 - alpha;
            }
            next.push(left);
            next.push(right);
        }
        clusters = next;
    }
    Ok(w)
}

/// HRP weights from a covariance matrix.
pub fn hrp_from_covariance(cov: &DMatrix<f64>) -> Result<DVector<f64>, HrpError> {
    let dist = corr_distance(cov)?;
    let order = quasi_diagonalize(&single_linkage(&dist)?);
    recursive_bisection(cov, &order)
}

/// HRP weights from daily returns, using the sample covariance or, with
/// `shrinkage`, the Ledoit-Wolf estimate.
pub fn hrp_weights(returns: &DMatrix<f64>, shrinkage: bool) -> Result<DVector<f64>, HrpError> {
    let cov = if shrinkage { ledoit_wolf(returns)? } else { sample_covariance(returns)? };
    hrp_from_covariance(&cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cov2(a: f64, b: f64, c: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, c, c, b])
    }

    #[test]
    fn distances_for_extreme_correlations() {
        assert!(corr_distance(&cov2(1.0, 4.0, 2.0)).unwrap()[(0, 1)].abs() < 1e-12);
        assert!((corr_distance(&cov2(1.0, 4.0, -2.0)).unwrap()[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((corr_distance(&cov2(1.0, 4.0, 0.0)).unwrap()[(0, 1)] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(corr_distance(&cov2(1.0, 0.0, 0.0)), Err(HrpError::ZeroVariance(1))));
    }

    #[test]
    fn small_linkages() {
        let t = single_linkage(&DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.3, 0.0])).unwrap();
        assert_eq!(t.merges, vec![Merge { left: 0, right: 1, distance: 0.3, size: 2 }]);
        assert_eq!(quasi_diagonalize(&t), vec![0, 1]);

        let d = DMatrix::from_row_slice(3, 3, &[0.0, 0.9, 0.9, 0.9, 0.0, 0.1, 0.9, 0.1, 0.0]);
        let t = single_linkage(&d).unwrap();
        assert_eq!((t.merges[0].left, t.merges[0].right), (1, 2));
        assert_eq!((t.merges[1].left, t.merges[1].right), (0, 3));
        assert_eq!(quasi_diagonalize(&t), vec![0, 1, 2]);
    }

    #[test]
    fn chain_merge_order() {
        // 3-1 first, then 2 joins, then 0 joins: tree ((3,1),2),0 with ids (1,3),(2,4),(0,5)
        let mut d = DMatrix::from_element(4, 4, 0.9);
        d.fill_diagonal(0.0);
        let mut set = |i: usize, j: usize, v: f64| {
            d[(i, j)] = v;
            d[(j, i)] = v;
        };
        set(3, 1, 0.1);
        set(2, 1, 0.2);
        set(0, 2, 0.3);
        let t = single_linkage(&d).unwrap();
        let pairs: Vec<_> = t.merges.iter().map(|m| (m.left, m.right)).collect();
        assert_eq!(pairs, vec![(1, 3), (2, 4), (0, 5)]);
        assert_eq!(quasi_diagonalize(&t), vec![0, 2, 1, 3]);
    }

    #[test]
    fn two_asset_closed_form() {
        let w = hrp_from_covariance(&cov2(1.0, 4.0, 0.0)).unwrap();
        assert!((w[0] - 0.8).abs() < 1e-12 && (w[1] - 0.2).abs() < 1e-12);
        assert_eq!(hrp_from_covariance(&DMatrix::from_element(1, 1, 0.3)).unwrap()[0], 1.0);
    }

    #[test]
    fn identical_assets_get_equal_weight() {
        for n in [3, 5, 7] {
            let cov = DMatrix::identity(n, n) * 0.04;
            let w = hrp_from_covariance(&cov).unwrap();
            assert!(w.iter().all(|v| (v - 1.0 / n as f64).abs() < 1e-12));
        }
    }

    #[test]
    fn bad_order_rejected() {
        let cov = DMatrix::identity(3, 3);
        assert!(recursive_bisection(&cov, &[0, 0, 1]).is_err());
        assert!(recursive_bisection(&cov, &[0, 1]).is_err());
    }

    fn random_returns(seed: u64, rows: usize, n: usize) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mix = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        DMatrix::from_fn(rows, n, |_, _| rng.random_range(-0.02..0.02)) * mix
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn weights_form_a_simplex_point(seed in any::<u64>(), n in 1usize..12) {
            let w = hrp_weights(&random_returns(seed, 60, n), false).unwrap();
            prop_assert!((w.sum() - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|v| *v >= 0.0));
        }

        // Leaf order follows cluster ids, so weights themselves are not
        // label-invariant; the hierarchy is.
        #[test]
        fn permutation_equivariant_hierarchy(seed in any::<u64>(), n in 2usize..9, rot in 1usize..8) {
            let r = random_returns(seed, 80, n);
            let perm: Vec<usize> = (0..n).map(|j| (j + rot) % n).collect();
            let permuted = DMatrix::from_fn(r.nrows(), n, |t, j| r[(t, perm[j])]);
            let clusters = |m: &DMatrix<f64>, relabel: &dyn Fn(usize) -> usize| {
                let tree = single_linkage(&corr_distance(&sample_covariance(m).unwrap()).unwrap()).unwrap();
                let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![relabel(i)]).collect();
                let mut out = Vec::new();
                for m in &tree.merges {
                    let mut joined = [members[m.left].clone(), members[m.right].clone()].concat();
                    joined.sort_unstable();
                    out.push((joined.clone(), m.distance));
                    members.push(joined);
                }
                out
            };
            let a = clusters(&r, &|i| i);
            let b = clusters(&permuted, &|i| perm[i]);
            prop_assert_eq!(a.len(), b.len());
            for ((sa, da), (sb, db)) in a.iter().zip(&b) {
                prop_assert_eq!(sa, sb);
                prop_assert!((da - db).abs() < 1e-12);
            }
        }

        #[test]
        fn two_asset_weights_are_label_free(seed in any::<u64>()) {
            let r = random_returns(seed, 50, 2);
            let swapped = DMatrix::from_fn(r.nrows(), 2, |t, j| r[(t, 1 - j)]);
            let w = hrp_weights(&r, false).unwrap();
            let ws = hrp_weights(&swapped, false).unwrap();
            prop_assert!((w[0] - ws[1]).abs() < 1e-12);
        }

        #[test]
        fn clustering_ignores_return_scale(seed in any::<u64>(), n in 2usize..10, scale in 0.01f64..100.0) {
            let r = random_returns(seed, 60, n);
            let order = |m: &DMatrix<f64>| {
                let cov = sample_covariance(m).unwrap();
                quasi_diagonalize(&single_linkage(&corr_distance(&cov).unwrap()).unwrap())
            };
            prop_assert_eq!(order(&r), order(&(&r * scale)));
        }
    }
}
