use crate::linalg::{hermitian_eigenvalues, re, Op4};
use crate::model::Dynamics;
use crate::{Error, Result};

use super::SimConfig;

/// Largest tolerated `|Tr η(t) − Tr η(0)|` before the step is declared too large.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-8;

/// A priori states on the recorded grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterSeries {
    pub times: Vec<f64>,
    pub states: Vec<Op4>,
    /// Smallest eigenvalue met at the recorded points.
    pub min_eigenvalue: f64,
}

/// One classical RK4 step of `dη/dt = ℒ(t)[η]`. The generator is evaluated
/// at `t` for all stages: it is constant on each grid cell.
pub fn rk4_step(dynamics: &dyn Dynamics, eta: &Op4, t: f64, h: f64) -> Op4 {
    let l = |x: &Op4| dynamics.apply_liouvillian(x, t);
    let k1 = l(eta);
    let k2 = l(&(eta + k1 * re(h / 2.0)));
    let k3 = l(&(eta + k2 * re(h / 2.0)));
    let k4 = l(&(eta + k3 * re(h)));
    let out = eta + (k1 + k2 * re(2.0) + k3 * re(2.0) + k4) * re(h / 6.0);
    (out + out.adjoint()) * re(0.5)
}

/// Solves the master equation from `rho0` with RK4 on the grid of `cfg`.
pub fn evolve_master(dynamics: &dyn Dynamics, rho0: &Op4, cfg: &SimConfig) -> Result<MasterSeries> {
    let n = cfg.n_steps()?;
    let tr0 = rho0.trace().re;
    let mut eta = *rho0;
    let mut series = MasterSeries {
        times: vec![0.0],
        states: vec![eta],
        min_eigenvalue: hermitian_eigenvalues(&eta)[0],
    };
    for step in 0..n {
        let t = step as f64 * cfg.dt;
        eta = rk4_step(dynamics, &eta, t, cfg.dt);
        let drift = (eta.trace().re - tr0).abs();
        if !(drift <= TRACE_DRIFT_LIMIT) {
            return Err(Error::TraceDrift { t: t + cfg.dt, drift });
        }
        let done = step + 1;
        if done % cfg.record_every == 0 || done == n {
            series.times.push(done as f64 * cfg.dt);
            series.states.push(eta);
            series.min_eigenvalue = series.min_eigenvalue.min(hermitian_eigenvalues(&eta)[0]);
        }
    }
    Ok(series)
}
