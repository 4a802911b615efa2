use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::basis::{dicke_state, SubspaceBasis, SubspaceState};
use super::mixer::MixerSpectrum;
use super::optimize::QaoaParams;
use super::QaoaError;
use crate::problem::IsingModel;

/// Ising energy without its constant for every basis string, using
/// `z_i = 1 - 2 x_i` so that `|0⟩` has eigenvalue `+1`.
pub fn cost_diagonal(ising: &IsingModel, basis: &SubspaceBasis) -> Result<Vec<f64>, QaoaError> {
    if ising.n() != basis.n() {
        return Err(QaoaError::DimensionMismatch { expected: basis.n(), got: ising.n() });
    }
    let mut z = vec![0.0; basis.n()];
    Ok(basis
        .states()
        .iter()
        .map(|x| {
            for (i, zi) in z.iter_mut().enumerate() {
                *zi = if x.get(i) { -1.0 } else { 1.0 };
            }
            ising.field_energy(&z)
        })
        .collect())
}

fn check(expected: usize, got: usize) -> Result<(), QaoaError> {
    if expected != got {
        return Err(QaoaError::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn phase(amps: &mut [Complex64], gamma: f64, diag: &[f64]) {
    for (a, d) in amps.iter_mut().zip(diag) {
        *a *= Complex64::cis(-gamma * d);
    }
}

/// Coordinates in the mixer eigenbasis: `Vᵀ ψ`.
fn to_eigen(v: &DMatrix<f64>, amps: &[Complex64]) -> Vec<Complex64> {
    let re = DVector::from_iterator(amps.len(), amps.iter().map(|a| a.re));
    let im = DVector::from_iterator(amps.len(), amps.iter().map(|a| a.im));
    let re = v.tr_mul(&re);
    let im = v.tr_mul(&im);
    re.iter().zip(im.iter()).map(|(&r, &i)| Complex64::new(r, i)).collect()
}

fn from_eigen(v: &DMatrix<f64>, coords: &[Complex64], out: &mut [Complex64]) {
    let re = DVector::from_iterator(coords.len(), coords.iter().map(|a| a.re));
    let im = DVector::from_iterator(coords.len(), coords.iter().map(|a| a.im));
    let re = v * re;
    let im = v * im;
    for (o, (&r, &i)) in out.iter_mut().zip(re.iter().zip(im.iter())) {
        *o = Complex64::new(r, i);
    }
}

fn mix(amps: &mut [Complex64], beta: f64, spectrum: &MixerSpectrum) {
    let mut c = to_eigen(&spectrum.eigenvectors, amps);
    for (cj, &lam) in c.iter_mut().zip(spectrum.eigenvalues.iter()) {
        *cj *= Complex64::cis(-beta * lam);
    }
    from_eigen(&spectrum.eigenvectors, &c, amps);
}

/// `ψ_j ← e^{-iγ d_j} ψ_j`.
pub fn apply_cost_phase(mut state: SubspaceState, gamma: f64, diag: &[f64]) -> Result<SubspaceState, QaoaError> {
    check(state.amplitudes().len(), diag.len())?;
    phase(state.amplitudes_mut(), gamma, diag);
    Ok(state)
}

/// `ψ ← V e^{-iβΛ} Vᵀ ψ`, the exact mixer propagator.
pub fn apply_mixer(mut state: SubspaceState, beta: f64, spectrum: &MixerSpectrum) -> Result<SubspaceState, QaoaError> {
    check(state.amplitudes().len(), spectrum.dim())?;
    mix(state.amplitudes_mut(), beta, spectrum);
    Ok(state)
}

/// Dicke state followed by `p` layers of cost phase then mixer.
pub fn qaoa_state(
    params: &QaoaParams,
    diag: &[f64],
    spectrum: &MixerSpectrum,
    basis: Arc<SubspaceBasis>,
) -> Result<SubspaceState, QaoaError> {
    check(basis.dim(), diag.len())?;
    check(basis.dim(), spectrum.dim())?;
    let mut state = dicke_state(basis);
    for (&g, &b) in params.gammas().iter().zip(params.betas()) {
        let amps = state.amplitudes_mut();
        phase(amps, g, diag);
        mix(amps, b, spectrum);
    }
    Ok(state)
}

/// `Σ_j |ψ_j|² d_j`.
pub fn expectation(state: &SubspaceState, diag: &[f64]) -> Result<f64, QaoaError> {
    check(state.amplitudes().len(), diag.len())?;
    Ok(state.amplitudes().iter().zip(diag).map(|(a, d)| a.norm_sqr() * d).sum())
}

/// Expectation and its gradient `[∂/∂γ_1..∂/∂γ_p, ∂/∂β_1..∂/∂β_p]`.
///
/// Reverse sweep: with `λ = D ψ_p` propagated backwards alongside `φ = ψ_l`,
/// each angle contributes `2 Re⟨λ| -iG |φ⟩ = 2 Im⟨λ|G|φ⟩` for its generator `G`.
pub fn value_and_gradient(
    params: &QaoaParams,
    diag: &[f64],
    spectrum: &MixerSpectrum,
    basis: Arc<SubspaceBasis>,
) -> Result<(f64, Vec<f64>), QaoaError> {
    let p = params.depth();
    let state = qaoa_state(params, diag, spectrum, basis)?;
    let value = expectation(&state, diag)?;
    let mut phi = state.amplitudes().to_vec();
    let mut lam: Vec<Complex64> = phi.iter().zip(diag).map(|(a, d)| a * d).collect();
    let v = &spectrum.eigenvectors;
    let mut grad = vec![0.0; 2 * p];
    for l in (0..p).rev() {
        let (g, b) = (params.gammas()[l], params.betas()[l]);
        let mut phi_e = to_eigen(v, &phi);
        let mut lam_e = to_eigen(v, &lam);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..phi_e.len() {
            let eig = spectrum.eigenvalues[j];
            acc += lam_e[j].conj() * phi_e[j] * eig;
            let undo = Complex64::cis(b * eig);
            phi_e[j] *= undo;
            lam_e[j] *= undo;
        }
        grad[p + l] = 2.0 * acc.im;
        from_eigen(v, &phi_e, &mut phi);
        from_eigen(v, &lam_e, &mut lam);

        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..phi.len() {
            acc += lam[j].conj() * phi[j] * diag[j];
            let undo = Complex64::cis(g * diag[j]);
            phi[j] *= undo;
            lam[j] *= undo;
        }
        grad[l] = 2.0 * acc.im;
    }
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(QaoaError::Numeric("non-finite expectation or gradient".into()));
    }
    Ok((value, grad))
}

/// Exact gradient of the expectation, see [`value_and_gradient`].
pub fn gradient(
    params: &QaoaParams,
    diag: &[f64],
    spectrum: &MixerSpectrum,
    basis: Arc<SubspaceBasis>,
) -> Result<Vec<f64>, QaoaError> {
    value_and_gradient(params, diag, spectrum, basis).map(|(_, g)| g)
}
