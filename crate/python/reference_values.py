"""Reference values for the Rust oracle tests, from scikit-learn and scipy.

Usage: python3 python/reference_values.py fixtures/prices_2024_2025.csv
"""

import sys

import numpy as np
import pandas as pd
import scipy.cluster.hierarchy as sch
from scipy.spatial.distance import squareform
from sklearn.covariance import LedoitWolf

ASOF = "2025-01-01"
LOOKBACK = 180


def window(path):
    prices = pd.read_csv(path, index_col="date", parse_dates=True)
    before = prices[prices.index < ASOF].iloc[-(LOOKBACK + 1):]
    return before.pct_change().iloc[1:].to_numpy()


def hrp(cov):
    # Same recipe as PyPortfolioOpt's HRPOpt: single linkage on the
    # correlation distance, pre-order leaves, halving bisection.
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    dist = np.sqrt(np.clip((1.0 - corr) / 2.0, 0.0, 1.0))
    np.fill_diagonal(dist, 0.0)
    link = sch.linkage(squareform(dist, checks=False), "single")
    order = sch.to_tree(link, rd=False).pre_order()
    w = np.ones(len(cov))
    clusters = [order]
    while clusters:
        clusters = [c[j:k] for c in clusters for j, k in ((0, len(c) // 2), (len(c) // 2, len(c))) if len(c) > 1]
        for i in range(0, len(clusters), 2):
            a, b = clusters[i], clusters[i + 1]
            va, vb = ivp_var(cov, a), ivp_var(cov, b)
            alpha = 1 - va / (va + vb)
            w[a] *= alpha
            w[b] *= 1 - alpha
    return link, order, w


def ivp_var(cov, items):
    sub = cov[np.ix_(items, items)]
    ivp = 1 / np.diag(sub)
    ivp /= ivp.sum()
    return ivp @ sub @ ivp


def rust_array(name, values):
    body = ", ".join(repr(float(v)) for v in values)
    return f"const {name}: [f64; {len(values)}] = [{body}];"


def main():
    r = window(sys.argv[1])
    lw = LedoitWolf().fit(r)
    print(f"const LW_SHRINKAGE: f64 = {lw.shrinkage_!r};")
    print(rust_array("LW_COV", lw.covariance_.flatten()))
    cov = np.cov(r, rowvar=False, ddof=1)
    link, order, w = hrp(cov)
    print(rust_array("LINK_HEIGHTS", link[:, 2]))
    print(f"const LINK_PAIRS: [(usize, usize); {len(link)}] = [{', '.join(f'({int(a)}, {int(b)})' for a, b in link[:, :2])}];")
    print(f"const HRP_ORDER: [usize; {len(order)}] = {list(order)};")
    print(rust_array("HRP_WEIGHTS", w))


if __name__ == "__main__":
    main()
