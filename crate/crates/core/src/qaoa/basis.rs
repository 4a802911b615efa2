use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use super::QaoaError;
use crate::bits::{binomial, fixed_weight, BitString};

/// Largest qubit count accepted by [`enumerate_basis`].
pub const MAX_QUBITS: usize = 24;

/// The weight-`k` computational basis states of `n` qubits, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceBasis {
    n: usize,
    k: usize,
    states: Vec<BitString>,
    index: HashMap<u64, usize>,
}

impl SubspaceBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[BitString] {
        &self.states
    }

    pub fn state(&self, j: usize) -> BitString {
        self.states[j]
    }

    pub fn position(&self, x: &BitString) -> Option<usize> {
        if x.len() != self.n {
            return None;
        }
        self.index.get(&x.raw()).copied()
    }
}

pub fn enumerate_basis(n: usize, k: usize) -> Result<SubspaceBasis, QaoaError> {
    if k == 0 || k > n || n > MAX_QUBITS {
        return Err(QaoaError::TooLarge { n, k });
    }
    let states: Vec<BitString> = fixed_weight(n, k).collect();
    debug_assert_eq!(states.len() as u64, binomial(n, k));
    let index = states.iter().enumerate().map(|(j, s)| (s.raw(), j)).collect();
    Ok(SubspaceBasis { n, k, states, index })
}

/// Complex amplitudes over a [`SubspaceBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceState {
    basis: Arc<SubspaceBasis>,
    amplitudes: Vec<Complex64>,
}

impl SubspaceState {
    pub fn new(basis: Arc<SubspaceBasis>, amplitudes: Vec<Complex64>) -> Result<Self, QaoaError> {
        if amplitudes.len() != basis.dim() {
            return Err(QaoaError::DimensionMismatch { expected: basis.dim(), got: amplitudes.len() });
        }
        Ok(Self { basis, amplitudes })
    }

    /// The computational basis state at position `j`.
    pub fn basis_state(basis: Arc<SubspaceBasis>, j: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amplitudes[j] = Complex64::new(1.0, 0.0);
        Self { basis, amplitudes }
    }

    pub fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Equal superposition of every weight-`k` string.
pub fn dicke_state(basis: Arc<SubspaceBasis>) -> SubspaceState {
    let a = Complex64::new(1.0 / (basis.dim() as f64).sqrt(), 0.0);
    let amplitudes = vec![a; basis.dim()];
    SubspaceState { basis, amplitudes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_bases() {
        let b = enumerate_basis(2, 1).unwrap();
        assert_eq!(b.states().iter().map(|s| s.raw()).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(enumerate_basis(4, 2).unwrap().dim(), 6);
        let b = enumerate_basis(10, 5).unwrap();
        assert_eq!(b.dim(), 252);
        assert!(b.states().windows(2).all(|w| w[0] < w[1]));
        assert!(b.states().iter().all(|s| s.count_ones() == 5));
        for (j, s) in b.states().iter().enumerate() {
            assert_eq!(b.position(s), Some(j));
        }
    }

    #[test]
    fn size_guard() {
        assert_eq!(enumerate_basis(25, 3), Err(QaoaError::TooLarge { n: 25, k: 3 }));
        assert!(enumerate_basis(3, 0).is_err());
        assert!(enumerate_basis(3, 4).is_err());
    }

    #[test]
    fn dicke_amplitudes() {
        let s = dicke_state(Arc::new(enumerate_basis(4, 2).unwrap()));
        for a in s.amplitudes() {
            assert!((a.re - 0.408248290463863).abs() < 1e-12);
            assert_eq!(a.im, 0.0);
        }
        let s = dicke_state(Arc::new(enumerate_basis(3, 3).unwrap()));
        assert_eq!(s.amplitudes(), &[Complex64::new(1.0, 0.0)]);
        let s = dicke_state(Arc::new(enumerate_basis(10, 5).unwrap()));
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert!((s.amplitudes()[0].re - 1.0 / 252f64.sqrt()).abs() < 1e-15);
    }
}
