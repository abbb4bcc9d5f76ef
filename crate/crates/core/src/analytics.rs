//! Concurrence along trajectories and closed-form reference curves.

use crate::engine::{rk4_step, SimConfig, TrajState, TrajectoryRecord};
use crate::entanglement::{chi, concurrence_margin, concurrence_mixed, is_x_state, t_form, x_branches, X_STATE_TOL};
use crate::linalg::{on_first, on_second, pauli, re, sigma_z, tensor, Op4, StateVector, C64};
use crate::model::{local_coefficients, segment_index, ChannelKind, Dynamics, MonitoredModel};
use crate::presets::{psi_esd, OracleId, Preset, PresetId};
use crate::{Error, Result};

/// Concurrence of the normalized a posteriori state at every recorded point.
/// The series stops at the first zero-weight point.
pub fn aposteriori_concurrence(rec: &TrajectoryRecord) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rec.states.len());
    for (s, w) in rec.states.iter().zip(&rec.weights) {
        if *w == 0.0 {
            break;
        }
        out.push(s.concurrence()?);
    }
    Ok(out)
}

/// `𝔼_P[C] = 1 − (1 − C_η(0)) e^{−νt}`
pub fn oracle_bell_collapse_mean_concurrence(nu: f64, c0: f64, t: f64) -> f64 {
    1.0 - (1.0 - c0) * (-nu * t).exp()
}

/// `η(t) = ρ0 e^{−νt} + (1 − e^{−νt})·1/4`
pub fn bell_collapse_apriori_state(nu: f64, rho0: &Op4, t: f64) -> Op4 {
    let e = (-nu * t).exp();
    rho0 * re(e) + Op4::identity() * re((1.0 - e) / 4.0)
}

/// `χ(t) = ½e^{−γ₋t}(χ0 + 𝒟0) + ½e^{−γ₊t}(χ0 − 𝒟0)`, `γ± = γ(1 ± e^{2iθ})`,
/// for the non-local detection at `ω0 = 0`.
///
/// This solves `χ̇ = −γχ + γe^{2iθ}𝒟`, `𝒟̇ = γe^{2iθ}χ − γ𝒟`: the sum
/// `χ + 𝒟` decays at `γ₋` and the difference at `γ₊`.
pub fn oracle_nonlocal_chi(gamma: f64, theta: f64, chi0: C64, d0: C64, t: f64) -> C64 {
    let e2 = C64::from_polar(1.0, 2.0 * theta);
    let gp = (C64::new(1.0, 0.0) + e2) * gamma;
    let gm = (C64::new(1.0, 0.0) - e2) * gamma;
    ((-gm * t).exp() * (chi0 + d0) + (-gp * t).exp() * (chi0 - d0)) * 0.5
}

/// A priori state of the local model at `ω0 = 0`: the `σ_y` and `σ_z`
/// components of each qubit decay at rate `γ`, `1` and `σ_x` are kept.
pub fn local_apriori_state(gamma: f64, rho0: &Op4, t: f64) -> Op4 {
    let f = |a: usize| if a >= 2 { (-gamma * t).exp() } else { 1.0 };
    let mut out = Op4::zeros();
    for a in 0..4 {
        for b in 0..4 {
            let p = tensor(&pauli(a), &pauli(b));
            let coef = (p * rho0).trace() / 4.0;
            out += p * (coef * f(a) * f(b));
        }
    }
    out
}

/// `½(1 + e^{−γt})² − 1`, the a priori concurrence from `(|10⟩ + i|01⟩)/√2`
/// before its death.
pub fn psi_esd_apriori_concurrence(gamma: f64, t: f64) -> f64 {
    0.5 * (1.0 + (-gamma * t).exp()).powi(2) - 1.0
}

/// `−ln(√2 − 1)/γ`
pub fn psi_esd_death_time(gamma: f64) -> f64 {
    -(2f64.sqrt() - 1.0).ln() / gamma
}

/// Closed-form time series used as ground truth.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleCurve {
    /// `C0 exp(−∫_0^t c)` with `c` piecewise constant (`rates[i]` from
    /// `starts[i]` on).
    MeanConcurrence { c0: f64, starts: Vec<f64>, rates: Vec<f64> },
    /// `|χ(t)|` of the non-local detection at `ω0 = 0`.
    NonlocalChi { gamma: f64, theta: f64, chi0: C64, d0: C64 },
    /// Concurrence of the analytic a priori state of the local model at `ω0 = 0`.
    AprioriLocal { gamma: f64, rho0: Op4 },
    BellCollapseMean { nu: f64, c0: f64 },
    /// Concurrence of the analytic a priori state of the swap model.
    BellCollapseApriori { nu: f64, rho0: Op4 },
}

impl OracleCurve {
    pub fn value(&self, t: f64) -> Result<f64> {
        Ok(match self {
            OracleCurve::MeanConcurrence { c0, starts, rates } => {
                let mut integral = 0.0;
                for (i, (&s, &c)) in starts.iter().zip(rates).enumerate() {
                    if s >= t {
                        break;
                    }
                    let end = starts.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t);
                    integral += c * (end - s);
                }
                c0 * (-integral).exp()
            }
            OracleCurve::NonlocalChi { gamma, theta, chi0, d0 } => oracle_nonlocal_chi(*gamma, *theta, *chi0, *d0, t).norm(),
            OracleCurve::BellCollapseMean { nu, c0 } => oracle_bell_collapse_mean_concurrence(*nu, *c0, t),
            OracleCurve::AprioriLocal { .. } | OracleCurve::BellCollapseApriori { .. } => {
                concurrence_mixed(&self.state(t).expect("a priori curve has a state"))?
            }
        })
    }

    /// The a priori state, for curves that have one.
    pub fn state(&self, t: f64) -> Option<Op4> {
        match self {
            OracleCurve::AprioriLocal { gamma, rho0 } => Some(local_apriori_state(*gamma, rho0, t)),
            OracleCurve::BellCollapseApriori { nu, rho0 } => Some(bell_collapse_apriori_state(*nu, rho0, t)),
            _ => None,
        }
    }

    pub fn sample(&self, times: &[f64]) -> Result<Vec<f64>> {
        times.iter().map(|&t| self.value(t)).collect()
    }
}

/// `C_ρ0 exp(−∫c)` with `c(t) = Σ_j c_j(t)` from the local coefficients.
pub fn oracle_mean_concurrence_local(m: &MonitoredModel, c_rho0: f64) -> Result<OracleCurve> {
    let mut starts = vec![0.0];
    starts.extend(m.breakpoints());
    let rates = starts
        .iter()
        .map(|&t| Ok(local_coefficients(m, t)?.total_decay()))
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleCurve::MeanConcurrence { c0: c_rho0, starts, rates })
}

/// Named oracle curves of a preset for a given initial state.
pub fn preset_oracles(preset: &Preset, initial: &TrajState) -> Result<Vec<(String, OracleCurve)>> {
    let rho0 = initial.normalized_density()?;
    let c0 = concurrence_mixed(&rho0)?;
    let param = |k: &str| preset.param(k).ok_or_else(|| Error::InvalidParameter(format!("missing parameter {k}")));
    let mut out = Vec::new();
    for o in &preset.oracles {
        let curve = match o {
            OracleId::MeanConcurrenceLocal => {
                let m = preset.monitored().ok_or_else(|| Error::Unsupported("needs a monitored model".into()))?;
                oracle_mean_concurrence_local(m, c0)?
            }
            OracleId::NonlocalChi => {
                let TrajState::Pure(phi) = initial else {
                    return Err(Error::Unsupported("the χ oracle needs a pure initial state".into()));
                };
                let psi = phi.normalized()?;
                OracleCurve::NonlocalChi {
                    gamma: param("gamma")?,
                    theta: param("theta")?,
                    chi0: chi(&psi),
                    d0: t_form(&psi, &tensor(&sigma_z(), &sigma_z())),
                }
            }
            OracleId::AprioriLocal => OracleCurve::AprioriLocal { gamma: param("gamma")?, rho0 },
            OracleId::BellCollapseMeanConcurrence => OracleCurve::BellCollapseMean { nu: param("nu")?, c0 },
            OracleId::BellCollapseApriori => OracleCurve::BellCollapseApriori { nu: param("nu")?, rho0 },
        };
        out.push((o.name().to_string(), curve));
    }
    Ok(out)
}

/// First zero of `f` on `(0, horizon]` found by scanning with step `h` and
/// bisecting to `tol`; `None` if `f(0) ≤ 0` or no sign change is met.
fn first_zero(f: impl Fn(f64) -> Result<f64>, h: f64, horizon: f64, tol: f64) -> Result<Option<f64>> {
    if f(0.0)? <= 0.0 {
        return Ok(None);
    }
    let mut a = 0.0;
    while a < horizon {
        let b = a + h;
        if f(b)? <= 0.0 {
            let (mut lo, mut hi) = (a, b);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if f(mid)? > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(Some(0.5 * (lo + hi)));
        }
        a = b;
    }
    Ok(None)
}

/// Signed concurrence of an X state, `2 max(C1, C2)`.
fn x_margin(rho: &Op4) -> f64 {
    let [c1, c2] = x_branches(rho);
    2.0 * c1.max(c2)
}

/// A priori entanglement death time from closed forms.
///
/// Supported: the local presets at `ω0 = 0` (closed form for
/// `(|10⟩ + i|01⟩)/√2`, bisection on the analytic `η(t)` otherwise) and the
/// swap model (bisection on the X-state branches of `η(t)`). Returns `None`
/// when the initial state is separable or entanglement never dies.
pub fn oracle_esd_time(preset: &Preset, rho0: &Op4) -> Result<Option<f64>> {
    const TOL: f64 = 1e-10;
    match preset.id {
        PresetId::LocalDiffusive | PresetId::LocalJump | PresetId::NonlocalDiffusive => {
            if preset.param("omega0") != Some(0.0) {
                return Err(Error::Unsupported("a priori death times need ω0 = 0".into()));
            }
            let gamma = preset.param("gamma").unwrap_or(1.0);
            if (rho0 - psi_esd().projector()).norm() < 1e-12 {
                return Ok(Some(psi_esd_death_time(gamma)));
            }
            first_zero(|t| concurrence_margin(&local_apriori_state(gamma, rho0, t)), 1e-3 / gamma, 60.0 / gamma, TOL)
        }
        PresetId::SwapWitness | PresetId::SwapWitnessRefined => {
            let nu = preset.param("nu").unwrap_or(1.0);
            let h = 1e-3 / nu;
            if is_x_state(rho0, X_STATE_TOL) {
                first_zero(|t| Ok(x_margin(&bell_collapse_apriori_state(nu, rho0, t))), h, 60.0 / nu, TOL)
            } else {
                first_zero(|t| concurrence_margin(&bell_collapse_apriori_state(nu, rho0, t)), h, 60.0 / nu, TOL)
            }
        }
        PresetId::GammaDelta => Err(Error::Unsupported(format!(
            "no closed-form death time for preset {}",
            preset.id.name()
        ))),
    }
}

/// First zero of the a priori concurrence along the RK4 solution of the
/// master equation: sign change of `μ1 − μ2 − μ3 − μ4` on the grid, then
/// bisection with RK4 sub-steps to 1e-10 in `t`.
pub fn find_esd(dynamics: &dyn Dynamics, rho0: &Op4, cfg: &SimConfig) -> Result<Option<f64>> {
    let n = cfg.n_steps()?;
    if concurrence_margin(rho0)? <= 0.0 {
        return Ok(None);
    }
    let mut eta = *rho0;
    for step in 0..n {
        let t = step as f64 * cfg.dt;
        let next = rk4_step(dynamics, &eta, t, cfg.dt);
        if concurrence_margin(&next)? <= 0.0 {
            let (mut lo, mut hi) = (0.0, cfg.dt);
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                if concurrence_margin(&rk4_step(dynamics, &eta, t, mid))? > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(Some(t + 0.5 * (lo + hi)));
        }
        eta = next;
    }
    Ok(None)
}

/// `⟨Tφ|M φ⟩` along a pure-state record (unnormalized states as recorded).
pub fn t_form_series(rec: &TrajectoryRecord, m: &Op4) -> Result<Vec<C64>> {
    rec.states
        .iter()
        .map(|s| match s {
            TrajState::Pure(phi) => Ok(t_form(phi, m)),
            TrajState::Mixed(_) => Err(Error::Unsupported("T-forms need pure-state records".into())),
        })
        .collect()
}

/// `χ_φ(t)` along a pure-state record.
pub fn chi_series(rec: &TrajectoryRecord) -> Result<Vec<C64>> {
    t_form_series(rec, &tensor(&pauli(2), &pauli(2)))
}

/// `𝒟(t) = ⟨Tφ|σ_z⊗σ_z φ⟩`
pub fn d_series(rec: &TrajectoryRecord) -> Result<Vec<C64>> {
    t_form_series(rec, &tensor(&sigma_z(), &sigma_z()))
}

/// `ℰ(t) = ⟨Tφ|(σ_z⊗1 + 1⊗σ_z) φ⟩`
pub fn e_series(rec: &TrajectoryRecord) -> Result<Vec<C64>> {
    t_form_series(rec, &(on_first(&sigma_z()) + on_second(&sigma_z())))
}

/// Largest deviations of `χ ± 𝒟` from
/// `e^{−γ∓t}(χ0 ± 𝒟0) ∓ iω0 ∫_0^t e^{−γ∓(t−s)} ℰ(s) ds` along a record of the
/// non-local detection, the integral by the trapezoidal rule on the record grid.
pub fn cpmd_residuals(rec: &TrajectoryRecord, gamma: f64, theta: f64, omega0: f64) -> Result<[f64; 2]> {
    let chi = chi_series(rec)?;
    let d = d_series(rec)?;
    let e = e_series(rec)?;
    let e2 = C64::from_polar(1.0, 2.0 * theta);
    let one = C64::new(1.0, 0.0);
    let mut worst = [0.0f64; 2];
    for (slot, sign) in [(0usize, 1.0), (1, -1.0)] {
        let g = (one - e2 * sign) * gamma;
        let start = chi[0] + d[0] * sign;
        // I(t) = ∫_0^t e^{−g(t−s)} ℰ(s) ds, advanced interval by interval.
        let mut integral = C64::new(0.0, 0.0);
        for i in 0..rec.times.len() {
            if i > 0 {
                let h = rec.times[i] - rec.times[i - 1];
                let decay = (-g * h).exp();
                integral = integral * decay + (e[i - 1] * decay + e[i]) * (h / 2.0);
            }
            let predicted = (-g * rec.times[i]).exp() * start - C64::new(0.0, sign * omega0) * integral;
            worst[slot] = worst[slot].max((chi[i] + d[i] * sign - predicted).norm());
        }
    }
    Ok(worst)
}

/// Per-path concurrence from the stochastic-exponential formula, using the
/// record's output increments and counts. Needs local detection operators,
/// a pure-state record and every grid point recorded.
///
/// On each step `[t_n, t_{n+1})` the coefficients are frozen at `t_n` and
/// `ΔŴ_j = ΔW_j − m_j Δt`; count factors `|d_k|/μ_k` use the state at `t_n`.
pub fn aposteriori_concurrence_reconstruction(rec: &TrajectoryRecord, m: &MonitoredModel) -> Result<Vec<f64>> {
    if rec.record_every != 1 {
        return Err(Error::Unsupported("reconstruction needs every grid point recorded".into()));
    }
    let psi0 = match rec.states.first() {
        Some(TrajState::Pure(phi)) => phi.normalized()?,
        _ => return Err(Error::Unsupported("reconstruction needs a pure-state record".into())),
    };
    let breakpoints = m.breakpoints();
    let coefficients = |t: f64| local_coefficients(m, t);
    let mut seg = usize::MAX;
    let mut lc = coefficients(0.0)?;

    let dt = rec.dt;
    let mut log_c = concurrence_of(&psi0).ln();
    let mut zeroed = false;
    let mut out = vec![log_c.exp()];
    let mut next_count = 0;
    for n in 0..rec.wiener_increments.len() {
        let t0 = rec.times[n];
        let t1 = rec.times[n + 1];
        let idx = segment_index(&breakpoints, t0);
        if idx != seg {
            seg = idx;
            lc = coefficients(t0)?;
        }
        let TrajState::Pure(phi) = rec.states[n] else {
            return Err(Error::Unsupported("reconstruction needs a pure-state record".into()));
        };
        let w = phi.norm_sqr();
        if w == 0.0 {
            break;
        }
        let psi = phi.scale(re(1.0 / w.sqrt()));
        let mut j_diff = 0;
        let mut k_jump = 0;
        let mut count_factor = Vec::new();
        for ch in &lc.channels {
            let r = ch.embedded();
            let expect = |a: &Op4| psi.0.dotc(&(a * psi.0));
            match ch.kind {
                ChannelKind::Diffusive => {
                    let mj = 2.0 * expect(&r).re;
                    let nj = ch.ell.re - mj;
                    let dw_hat = rec.wiener_increments[n][j_diff] - mj * dt;
                    log_c += nj * dw_hat - (ch.decay + nj * nj / 2.0) * dt;
                    j_diff += 1;
                }
                ChannelKind::Counting => {
                    let mu = expect(&(r.adjoint() * r)).re;
                    log_c -= (ch.decay + ch.det.norm() - mu) * dt;
                    count_factor.push(if mu > 0.0 { ch.det.norm() / mu } else { 0.0 });
                    k_jump += 1;
                }
            }
        }
        debug_assert_eq!(k_jump, count_factor.len());
        while next_count < rec.counts.len() && rec.counts[next_count].time <= t1 {
            let f = count_factor[rec.counts[next_count].channel];
            if f == 0.0 {
                zeroed = true;
            } else {
                log_c += f.ln();
            }
            next_count += 1;
        }
        out.push(if zeroed { 0.0 } else { log_c.exp() });
    }
    Ok(out)
}

fn concurrence_of(psi: &StateVector) -> f64 {
    chi(psi).norm() / psi.norm_sqr()
}
