//! Trajectory integration, master-equation evolution and ensembles.
//!
//! Trajectories are integrated under either measure:
//!
//! - [`Measure::Reference`] (`Q`): the outputs are standard Wiener processes
//!   and Poisson processes of rates `λ_k`; the state is the non-normalized
//!   `φ(t)` or `σ(t)` and its squared norm / trace is the likelihood weight
//!   `p_t`.
//! - [`Measure::Physical`] (`P`): the outputs follow their physical law and
//!   the state is the normalized a posteriori state. Counts are drawn by
//!   thinning against the state-dependent intensity.
//!
//! Both share one kernel; between counts the state follows the continuous
//! part of the linear equation, at counts the jump map is applied.

mod ensemble;
mod master;
mod step;
mod trajectory;

pub use ensemble::{ensemble_run, EnsembleEstimate, EnsembleSpec, Observable};
pub use master::{evolve_master, rk4_step, MasterSeries, TRACE_DRIFT_LIMIT};
pub use step::{step_linear_sme, step_linear_sse};
pub use trajectory::{run_trajectory, simulate, simulate_physical, simulate_stream, trajectory_rng, Observer};

use crate::entanglement::{chi, concurrence_mixed};
use crate::linalg::{hermiticity_deviation, Op4, StateVector, C64};
use crate::{Error, Result};
use crate::model::Dynamics;

/// Q-mode weights below this end the trajectory with weight 0.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// Largest allowed `λ_k·dt`.
pub const MAX_RATE_DT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    /// `Q`, fixed-rate reference noise with likelihood weights.
    Reference,
    /// `P`, the physical output law.
    Physical,
}

impl Measure {
    pub fn tag(self) -> &'static str {
        match self {
            Measure::Reference => "Q",
            Measure::Physical => "P",
        }
    }
}

/// Time discretization of the continuous part between counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Plain Euler–Maruyama on the Itô form.
    EulerMaruyama,
    /// `φ ← exp(Σ_j R_j ΔW_j) · exp(G h) φ` with the Stratonovich drift
    /// `G = K + Σ_k λ_k/2 − ½ Σ_j R_j²`. Weak order 1 like Euler, but it
    /// keeps states positive and preserves `χ` exactly whenever the noise
    /// generator leaves it invariant.
    #[default]
    ExponentialSplit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub t_final: f64,
    pub dt: f64,
    /// Record every n-th grid point (the final point is always recorded).
    pub record_every: usize,
    pub scheme: Scheme,
}

impl SimConfig {
    pub fn new(t_final: f64, dt: f64) -> Self {
        SimConfig { t_final, dt, record_every: 1, scheme: Scheme::default() }
    }

    pub fn record_every(mut self, n: usize) -> Self {
        self.record_every = n;
        self
    }

    pub fn scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Number of integration steps; `t_final` must be a multiple of `dt`.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("T must be positive, got {}", self.t_final)));
        }
        if !(self.dt > 0.0 && self.dt <= self.t_final) {
            return Err(Error::InvalidParameter(format!("dt must lie in (0, T], got {}", self.dt)));
        }
        let n = (self.t_final / self.dt).round();
        if (n * self.dt - self.t_final).abs() > 1e-9 * self.t_final {
            return Err(Error::InvalidParameter(format!(
                "T = {} is not a multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be at least 1".into()));
        }
        Ok(n as usize)
    }

    /// Grid indices that get recorded.
    pub fn recorded_steps(&self) -> Result<Vec<usize>> {
        let n = self.n_steps()?;
        let mut idx: Vec<usize> = (0..=n).step_by(self.record_every).collect();
        if *idx.last().unwrap() != n {
            idx.push(n);
        }
        Ok(idx)
    }

    /// Checks the grid and `λ_k·dt < 0.1` for every counting channel.
    pub fn validate(&self, dynamics: &dyn Dynamics) -> Result<()> {
        self.n_steps()?;
        let mut times = vec![0.0];
        times.extend(dynamics.breakpoints());
        for t in times {
            for ch in dynamics.operators(t).jumps {
                if ch.rate() * self.dt >= MAX_RATE_DT {
                    return Err(Error::InvalidParameter(format!(
                        "λ·dt = {} must stay below {MAX_RATE_DT}",
                        ch.rate() * self.dt
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A trajectory state: pure `φ` or a density matrix `σ`, normalized or not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajState {
    Pure(StateVector),
    Mixed(Op4),
}

impl TrajState {
    /// `‖φ‖²` or `Tr σ`.
    pub fn weight(&self) -> f64 {
        match self {
            TrajState::Pure(phi) => phi.norm_sqr(),
            TrajState::Mixed(s) => s.trace().re,
        }
    }

    /// `|φ⟩⟨φ|` or `σ`, without normalization.
    pub fn density(&self) -> Op4 {
        match self {
            TrajState::Pure(phi) => phi.projector(),
            TrajState::Mixed(s) => *s,
        }
    }

    /// Density matrix divided by its weight.
    pub fn normalized_density(&self) -> Result<Op4> {
        let w = self.weight();
        if !(w > 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(self.density() / C64::new(w, 0.0))
    }

    /// Concurrence of the normalized state.
    pub fn concurrence(&self) -> Result<f64> {
        match self {
            TrajState::Pure(phi) => crate::entanglement::concurrence_pure(phi),
            TrajState::Mixed(_) => concurrence_mixed(&self.normalized_density()?),
        }
    }

    /// `p · C(σ/p)`: the Q-mode integrand for the mean concurrence.
    pub fn weighted_concurrence(&self) -> Result<f64> {
        match self {
            TrajState::Pure(phi) => Ok(chi(phi).norm()),
            TrajState::Mixed(_) => {
                let w = self.weight();
                if w == 0.0 {
                    return Ok(0.0);
                }
                Ok(w * self.concurrence()?)
            }
        }
    }

    pub(crate) fn check_normalized(&self) -> Result<()> {
        let w = self.weight();
        if (w - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { trace: w });
        }
        if let TrajState::Mixed(s) = self {
            let dev = hermiticity_deviation(s);
            if dev > crate::linalg::HERMITIAN_TOL {
                return Err(Error::NotHermitian { what: "initial state".into(), deviation: dev });
            }
        }
        Ok(())
    }
}

impl From<StateVector> for TrajState {
    fn from(phi: StateVector) -> Self {
        TrajState::Pure(phi)
    }
}

impl From<crate::linalg::DensityOperator> for TrajState {
    fn from(rho: crate::linalg::DensityOperator) -> Self {
        TrajState::Mixed(*rho.matrix())
    }
}

/// One count of the output process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountEvent {
    pub time: f64,
    pub channel: usize,
    /// Kraus index drawn when a multi-Kraus channel acts on a pure state.
    pub mark: Option<usize>,
}

/// One monitored realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<TrajState>,
    /// `p_t` in Q-mode, 1 in P-mode.
    pub weights: Vec<f64>,
    /// Output increments `ΔW_j` per integration step (`[step][channel]`);
    /// under P these are the observed `ΔŴ_j + m_j Δt`.
    pub wiener_increments: Vec<Vec<f64>>,
    pub counts: Vec<CountEvent>,
    pub measure: Measure,
    pub dt: f64,
    /// Grid spacing between recorded points, in steps.
    pub record_every: usize,
    pub n_jump_channels: usize,
}

impl TrajectoryRecord {
    /// Counts of channel `k` up to and including time `t`.
    pub fn count_until(&self, k: usize, t: f64) -> usize {
        self.counts.iter().filter(|c| c.channel == k && c.time <= t).count()
    }

    pub fn count_times(&self, k: usize) -> Vec<f64> {
        self.counts.iter().filter(|c| c.channel == k).map(|c| c.time).collect()
    }
}
