//! Concurrence of two-qubit states.

use nalgebra::SymmetricEigen;

use crate::linalg::{hermiticity_deviation, spin_flip, Op4, StateVector, C64, POSITIVITY_TOL};
use crate::{Error, Result};

/// Tolerance used to recognise X states in [`concurrence_x`].
pub const X_STATE_TOL: f64 = 1e-10;

/// `⟨Tφ|M φ⟩ = φᵀ M φ`, the T-conjugate "expectation" of `M`.
pub fn t_form(phi: &StateVector, m: &Op4) -> C64 {
    phi.0.dot(&(m * phi.0))
}

/// `χ_φ = ⟨Tφ|σy⊗σy φ⟩ = 2(φ10 φ01 − φ11 φ00)`; works on unnormalized vectors.
pub fn chi(phi: &StateVector) -> C64 {
    let v = &phi.0;
    (v[1] * v[2] - v[0] * v[3]) * 2.0
}

/// `|χ_φ| / ‖φ‖²`
pub fn concurrence_pure(phi: &StateVector) -> Result<f64> {
    let n = phi.norm_sqr();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(chi(phi).norm() / n)
}

pub fn is_x_state(rho: &Op4, tol: f64) -> bool {
    off_x_modulus(rho) <= tol
}

fn off_x_modulus(rho: &Op4) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            if i != j && i + j != 3 {
                worst = worst.max(rho[(i, j)].norm());
            }
        }
    }
    worst
}

/// Closed form for X states:
/// `2·max{0, |ρ23| − √(ρ11ρ44), |ρ14| − √(ρ22ρ33)}`.
pub fn concurrence_x(rho: &Op4) -> Result<f64> {
    let off = off_x_modulus(rho);
    if off > X_STATE_TOL {
        return Err(Error::NotXState { offending: off });
    }
    Ok(2.0 * x_branches(rho).into_iter().fold(0.0, f64::max))
}

/// The two branches `C1 = |ρ23| − √(ρ11ρ44)` and `C2 = |ρ14| − √(ρ22ρ33)`.
pub fn x_branches(rho: &Op4) -> [f64; 2] {
    let d = |i: usize| rho[(i, i)].re.max(0.0);
    [
        rho[(1, 2)].norm() - (d(0) * d(3)).sqrt(),
        rho[(0, 3)].norm() - (d(1) * d(2)).sqrt(),
    ]
}

/// Square roots `μ1 ≥ μ2 ≥ μ3 ≥ μ4` of the eigenvalues of `ρ (σy⊗σy) ρ̄ (σy⊗σy)`.
///
/// With `ρ = W W†` these are the singular values of the complex symmetric
/// matrix `Wᵀ (σy⊗σy) W`, which avoids taking square roots of eigenvalues
/// that are only known to round-off.
pub fn spin_flip_roots(rho: &Op4) -> Result<[f64; 4]> {
    let dev = hermiticity_deviation(rho);
    if dev > POSITIVITY_TOL {
        return Err(Error::NotHermitian { what: "density operator".into(), deviation: dev });
    }
    let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -POSITIVITY_TOL {
        return Err(Error::NotPositive { min_eigenvalue: min });
    }
    let mut w = eig.eigenvectors;
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = C64::new(lam.max(0.0).sqrt(), 0.0);
        for i in 0..4 {
            w[(i, j)] *= s;
        }
    }
    let m = w.transpose() * spin_flip() * w;
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok([s[0], s[1], s[2], s[3]])
}

/// `μ1 − μ2 − μ3 − μ4`, the concurrence before clamping at zero; changes
/// sign when entanglement appears or dies.
pub fn concurrence_margin(rho: &Op4) -> Result<f64> {
    let mu = spin_flip_roots(rho)?;
    Ok(mu[0] - mu[1] - mu[2] - mu[3])
}

/// Concurrence of a general two-qubit state, `max{0, μ1 − μ2 − μ3 − μ4}`.
pub fn concurrence_mixed(rho: &Op4) -> Result<f64> {
    Ok(concurrence_margin(rho)?.max(0.0))
}
