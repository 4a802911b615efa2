use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::basis::{enumerate_basis, SubspaceBasis};
use super::QaoaError;

/// Eigendecomposition `H = V diag(λ) Vᵀ` of the restricted XY mixer.
///
/// Every matrix element of the mixer is real, so `V` is real orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MixerSpectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl MixerSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        v * DMatrix::from_diagonal(&self.eigenvalues) * v.transpose()
    }
}

/// `Σ_{i<j} (X_i X_j + Y_i Y_j)` restricted to the basis.
///
/// `X_i X_j + Y_i Y_j` maps `|..1_i..0_j..⟩` to `2|..0_i..1_j..⟩` and vice
/// versa, and annihilates strings where bits `i` and `j` agree.
pub fn mixer_matrix(basis: &SubspaceBasis) -> DMatrix<f64> {
    let n = basis.n();
    let dim = basis.dim();
    let mut h = DMatrix::zeros(dim, dim);
    for (row, x) in basis.states().iter().enumerate() {
        for i in 0..n {
            for j in i + 1..n {
                if x.get(i) != x.get(j) {
                    let mut y = *x;
                    y.flip(i);
                    y.flip(j);
                    let col = basis.position(&y).expect("swap preserves weight");
                    h[(row, col)] += 2.0;
                }
            }
        }
    }
    h
}

/// Diagonalizes a real symmetric mixer, eigenvalues ascending.
pub fn mixer_spectrum(matrix: &DMatrix<f64>) -> Result<MixerSpectrum, QaoaError> {
    if !matrix.is_square() {
        return Err(QaoaError::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
    }
    let dim = matrix.nrows();
    let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, 0)
        .ok_or_else(|| QaoaError::EigenFailure(format!("no convergence for dimension {dim}")))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(dim, order.iter().map(|&j| eig.eigenvalues[j]));
    let eigenvectors = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    if eigenvalues.iter().chain(eigenvectors.iter()).any(|v| !v.is_finite()) {
        return Err(QaoaError::EigenFailure("non-finite decomposition".into()));
    }
    Ok(MixerSpectrum { eigenvalues, eigenvectors })
}

type Entry = (Arc<SubspaceBasis>, Arc<MixerSpectrum>);

fn cache() -> &'static Mutex<HashMap<(usize, usize), Entry>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Entry>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Basis and mixer spectrum for `(n, k)`, computed once per process.
pub fn spectrum_for(n: usize, k: usize) -> Result<Entry, QaoaError> {
    if let Some(entry) = cache().lock().expect("spectrum cache poisoned").get(&(n, k)) {
        return Ok(entry.clone());
    }
    let basis = enumerate_basis(n, k)?;
    let spectrum = mixer_spectrum(&mixer_matrix(&basis))?;
    let mut guard = cache().lock().expect("spectrum cache poisoned");
    // a concurrent caller may have won the race; keep the first entry
    let entry = guard.entry((n, k)).or_insert_with(|| (Arc::new(basis), Arc::new(spectrum)));
    Ok(entry.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_and_three_qubit_blocks() {
        let h = mixer_matrix(&enumerate_basis(2, 1).unwrap());
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]));
        let h3 = mixer_matrix(&enumerate_basis(3, 1).unwrap());
        assert_eq!(h3, DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 2.0 }));

        let s = mixer_spectrum(&h).unwrap();
        assert!((s.eigenvalues[0] + 2.0).abs() < 1e-12 && (s.eigenvalues[1] - 2.0).abs() < 1e-12);
        let s3 = mixer_spectrum(&h3).unwrap();
        for (got, want) in s3.eigenvalues.iter().zip([-2.0, -2.0, 4.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn ten_five_reconstruction() {
        let basis = enumerate_basis(10, 5).unwrap();
        let h = mixer_matrix(&basis);
        let s = mixer_spectrum(&h).unwrap();
        assert!((s.reconstruct() - &h).amax() < 1e-9);
        let v = &s.eigenvectors;
        assert!((v.transpose() * v - DMatrix::identity(252, 252)).amax() < 1e-9);
        assert!(s.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn cache_returns_shared_entry() {
        let (b1, s1) = spectrum_for(6, 3).unwrap();
        let (b2, s2) = spectrum_for(6, 3).unwrap();
        assert!(Arc::ptr_eq(&b1, &b2) && Arc::ptr_eq(&s1, &s2));
    }
}
