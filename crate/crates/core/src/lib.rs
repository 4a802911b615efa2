//! Cardinality-constrained portfolio selection.
//!
//! A K-of-N asset selection is solved two ways: by a QAOA ansatz with an XY
//! mixer simulated exactly inside the Hamming-weight-K subspace, and by
//! simulated annealing on a penalized QUBO. Selected subsets receive
//! Sharpe-maximizing weights; Hierarchical Risk Parity serves as a baseline
//! and as the fallback allocator. A monthly walk-forward backtest ties the
//! pieces together.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod anneal;
pub mod backtest;
pub mod bits;
pub mod hrp;
pub mod market_data;
pub mod problem;
pub mod qaoa;
pub mod report;

pub use bits::BitString;
pub use market_data::{MomentEstimate, PricePanel};
pub use problem::{IsingModel, QuboModel, SelectionProblem};
