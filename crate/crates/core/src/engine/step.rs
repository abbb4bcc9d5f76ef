//! Single Euler–Maruyama steps of the linear equations, written literally.
//!
//! The trajectory kernel places counts at their exact times and integrates
//! the continuous part separately; these one-step forms are the textbook
//! updates it is tested against.

use crate::linalg::{re, Op4, StateVector, C64};
use crate::model::DerivedOperators;
use crate::{Error, Result};

fn check_lengths(ops: &DerivedOperators, noise: &[f64], jumps: &[bool]) -> Result<()> {
    if noise.len() != ops.diffusive.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} noise increments", ops.diffusive.len()),
            got: noise.len().to_string(),
        });
    }
    if jumps.len() != ops.jumps.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} jump indicators", ops.jumps.len()),
            got: jumps.len().to_string(),
        });
    }
    Ok(())
}

/// `φ + Kφ dt + Σ_j R_jφ ΔW_j + Σ_k [(J_k/√λ_k − 1)φ ΔN_k + (λ_k/2)φ dt]`,
/// with the jump acting on the pre-jump `φ`. Needs single-Kraus channels.
pub fn step_linear_sse(
    phi: &StateVector,
    ops: &DerivedOperators,
    dt: f64,
    noise: &[f64],
    jumps: &[bool],
) -> Result<StateVector> {
    check_lengths(ops, noise, jumps)?;
    let v = &phi.0;
    let mut out = v + ops.drift * v * re(dt);
    for (r, dw) in ops.diffusive.iter().zip(noise) {
        out += r * v * re(*dw);
    }
    for (ch, &jumped) in ops.jumps.iter().zip(jumps) {
        let j = ch.operator().ok_or_else(|| {
            Error::Unsupported("the linear SSE needs single-Kraus jump channels".into())
        })?;
        let lam = ch.rate();
        out += v * re(lam / 2.0 * dt);
        if jumped {
            out += j * v * re(1.0 / lam.sqrt()) - v;
        }
    }
    Ok(StateVector(out))
}

/// `σ + ℒ[σ]dt + Σ_j (R_jσ + σR_j†)ΔW_j + Σ_k (𝒥_k(σ)/λ_k − σ)(ΔN_k − λ_k dt)`.
pub fn step_linear_sme(
    sigma: &Op4,
    ops: &DerivedOperators,
    dt: f64,
    noise: &[f64],
    jumps: &[bool],
) -> Result<Op4> {
    check_lengths(ops, noise, jumps)?;
    let mut out = sigma + ops.liouvillian(sigma) * re(dt);
    for (r, dw) in ops.diffusive.iter().zip(noise) {
        out += (r * sigma + sigma * r.adjoint()) * re(*dw);
    }
    for (ch, &jumped) in ops.jumps.iter().zip(jumps) {
        let lam = ch.rate();
        let dn = if jumped { 1.0 } else { 0.0 };
        out += (ch.apply(sigma) / C64::new(lam, 0.0) - sigma) * re(dn - lam * dt);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::*;
    use crate::model::JumpChannel;

    #[test]
    fn free_case_is_identity() {
        let ops = DerivedOperators::new(Op4::zeros(), vec![Op4::zeros()], vec![]);
        let phi = bell_basis()[2];
        let out = step_linear_sse(&phi, &ops, 1e-2, &[0.0], &[]).unwrap();
        assert_eq!(out, phi);
    }

    #[test]
    fn jump_only_sme_matches_sse_projector_to_second_order() {
        let j1 = on_first(&sigma_x()) * re(0.7);
        let j2 = on_second(&(sigma_minus() * c(0.2, 0.5) + identity2() * re(0.3)));
        let h = on_first(&sigma_z()) * re(0.4);
        let ops = DerivedOperators::new(
            h,
            vec![],
            vec![JumpChannel::single(j1, 0.8).unwrap(), JumpChannel::single(j2, 1.3).unwrap()],
        );
        let phi = StateVector::new(c(0.3, 0.1), c(-0.5, 0.2), c(0.6, 0.0), c(0.1, -0.4)).normalized().unwrap();
        for jumps in [[false, false], [true, false], [false, true]] {
            let mut prev = f64::INFINITY;
            for dt in [1e-2, 5e-3, 2.5e-3] {
                let next = step_linear_sse(&phi, &ops, dt, &[], &jumps).unwrap();
                let sme = step_linear_sme(&phi.projector(), &ops, dt, &[], &jumps).unwrap();
                let err = max_abs(&(next.projector() - sme));
                if jumps.contains(&true) {
                    // A step containing a count has probability O(dt), so a
                    // first-order mismatch there is still second order weakly.
                    assert!(err < 5.0 * dt, "{err} at dt = {dt}");
                } else {
                    assert!(err < 5.0 * dt * dt, "{err} at dt = {dt}");
                    // Quadratic: the error must drop by ≈4 per halving.
                    assert!(err < prev / 3.5);
                }
                prev = err;
            }
        }
    }

    #[test]
    fn diffusive_difference_is_the_ito_correction() {
        // With diffusion the two one-step forms differ by Σ R σ R† (ΔW² − dt)
        // plus O(dt^{3/2}) terms.
        let r = on_first(&sigma_x()) * re(0.6) + on_second(&sigma_z()) * c(0.0, 0.3);
        let ops = DerivedOperators::new(Op4::zeros(), vec![r], vec![]);
        let phi = bell_basis()[0];
        let sigma = phi.projector();
        let dt = 1e-4;
        for dw in [0.0, 0.01, -0.02] {
            let sse = step_linear_sse(&phi, &ops, dt, &[dw], &[]).unwrap().projector();
            let sme = step_linear_sme(&sigma, &ops, dt, &[dw], &[]).unwrap();
            let correction = r * sigma * r.adjoint() * re(dw * dw - dt);
            assert!(max_abs(&(sse - sme - correction)) < 1e-6, "dw = {dw}");
        }
    }

    #[test]
    fn replacement_jump_maps_to_bell_projector() {
        let (nu, lam) = (1.0, 0.6);
        let bell = bell_basis();
        let xp = 2;
        let kraus: Vec<Op4> = (0..4)
            .map(|i| bell[xp].0 * StateVector::basis(i).0.adjoint() * re((nu / 4.0f64).sqrt()))
            .collect();
        // Four such channels share the reference rate: λ/4 each.
        let ops = DerivedOperators::new(Op4::zeros(), vec![], vec![JumpChannel::new(kraus, lam / 4.0).unwrap()]);
        let sigma = Op4::from_fn(|i, j| c((i + j) as f64 * 0.1, i as f64 - j as f64)) + identity4();
        let jumped = ops.jumps[0].apply(&sigma) / re(ops.jumps[0].rate());
        let expected = bell[xp].projector() * (sigma.trace() * (nu / lam));
        assert!(max_abs(&(jumped - expected)) < 1e-14);
    }

    #[test]
    fn deterministic_limit_is_master_euler_step() {
        let l = on_first(&sigma_x()) * re(0.5);
        let ops = DerivedOperators::new(on_second(&sigma_y()), vec![l], vec![]);
        let rho = bell_basis()[1].projector();
        let dt = 1e-3;
        let out = step_linear_sme(&rho, &ops, dt, &[0.0], &[]).unwrap();
        assert!(max_abs(&(out - rho - ops.liouvillian(&rho) * re(dt))) < 1e-15);
    }

    #[test]
    fn wrong_lengths_are_rejected() {
        let ops = DerivedOperators::new(Op4::zeros(), vec![Op4::zeros()], vec![]);
        assert!(step_linear_sse(&bell_basis()[0], &ops, 1e-3, &[], &[]).is_err());
    }
}
