use rayon::prelude::*;

use super::trajectory::{run_trajectory, trajectory_rng, Observer};
use super::{CountEvent, Measure, SimConfig, TrajState};
use crate::linalg::{Op4, C64};
use crate::model::Dynamics;
use crate::{Error, Result};

/// Trajectories per work unit. Partial sums are combined in chunk order, so
/// results do not depend on scheduling.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    /// The 16 entries of the a posteriori state (re/im columns).
    State,
    Concurrence,
    /// `p_t` (identically 1 under P).
    Weight,
    /// Cumulative counts per channel.
    Counts,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::State => "state",
            Observable::Concurrence => "concurrence",
            Observable::Weight => "weight",
            Observable::Counts => "counts",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "state" => Ok(Observable::State),
            "concurrence" => Ok(Observable::Concurrence),
            "weight" => Ok(Observable::Weight),
            "counts" => Ok(Observable::Counts),
            other => Err(Error::InvalidParameter(format!(
                "unknown observable '{other}' (expected state, concurrence, weight or counts)"
            ))),
        }
    }

    fn columns(self, n_jump: usize) -> Vec<String> {
        match self {
            Observable::State => (0..16)
                .flat_map(|i| {
                    let (r, c) = (i / 4 + 1, i % 4 + 1);
                    [format!("rho{r}{c}_re"), format!("rho{r}{c}_im")]
                })
                .collect(),
            Observable::Concurrence => vec!["concurrence".into()],
            Observable::Weight => vec!["weight".into()],
            Observable::Counts => (1..=n_jump).map(|k| format!("count{k}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub n_traj: usize,
    pub seed: u64,
    pub measure: Measure,
    pub observables: Vec<Observable>,
}

/// Per-time means and standard errors of the requested observables under
/// the physical law. Under Q each path contributes `p_t·f(σ/p_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleEstimate {
    pub times: Vec<f64>,
    pub columns: Vec<String>,
    /// `[time][column]`
    pub mean: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
    pub n_traj: usize,
    pub measure: Measure,
}

impl EnsembleEstimate {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// `(mean, std_error)` series of one column.
    pub fn series(&self, name: &str) -> Option<(Vec<f64>, Vec<f64>)> {
        let c = self.column(name)?;
        Some((self.mean.iter().map(|r| r[c]).collect(), self.std_error.iter().map(|r| r[c]).collect()))
    }

    /// Mean state at recorded point `i`.
    pub fn state_mean(&self, i: usize) -> Option<Op4> {
        let c0 = self.column("rho11_re")?;
        let row = &self.mean[i];
        Some(Op4::from_fn(|r, c| {
            let k = c0 + 2 * (4 * r + c);
            C64::new(row[k], row[k + 1])
        }))
    }

    /// Frobenius norm of the entrywise standard errors of the state at `i`.
    pub fn state_std_error(&self, i: usize) -> Option<f64> {
        let c0 = self.column("rho11_re")?;
        Some(self.std_error[i][c0..c0 + 32].iter().map(|s| s * s).sum::<f64>().sqrt())
    }
}

#[derive(Clone)]
struct Sums {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    final_weight: f64,
}

impl Sums {
    fn zeros(n: usize) -> Self {
        Sums { sum: vec![0.0; n], sum_sq: vec![0.0; n], final_weight: 0.0 }
    }

    fn absorb(&mut self, other: &Sums) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.final_weight += other.final_weight;
    }
}

struct PathObserver<'a> {
    observables: &'a [Observable],
    measure: Measure,
    width: usize,
    counts: Vec<f64>,
    values: Vec<f64>,
    last_weight: f64,
}

impl Observer for PathObserver<'_> {
    fn record(&mut self, index: usize, _t: f64, state: &TrajState, weight: f64) -> Result<()> {
        let row = &mut self.values[index * self.width..(index + 1) * self.width];
        let mut col = 0;
        let q = self.measure == Measure::Reference;
        for obs in self.observables {
            match obs {
                Observable::State => {
                    let d = if weight == 0.0 { Op4::zeros() } else { state.density() };
                    for i in 0..16 {
                        let z = d[(i / 4, i % 4)];
                        row[col] = z.re;
                        row[col + 1] = z.im;
                        col += 2;
                    }
                }
                Observable::Concurrence => {
                    row[col] = if weight == 0.0 {
                        0.0
                    } else if q {
                        state.weighted_concurrence()?
                    } else {
                        state.concurrence()?
                    };
                    col += 1;
                }
                Observable::Weight => {
                    row[col] = weight;
                    col += 1;
                }
                Observable::Counts => {
                    for n in &self.counts {
                        row[col] = if q { weight * n } else { *n };
                        col += 1;
                    }
                }
            }
        }
        self.last_weight = weight;
        Ok(())
    }

    fn count(&mut self, event: CountEvent) {
        self.counts[event.channel] += 1.0;
    }
}

/// Runs `spec.n_traj` trajectories (stream `i` of `spec.seed` for path `i`)
/// and estimates the requested observables on the recorded grid.
pub fn ensemble_run(
    dynamics: &dyn Dynamics,
    initial: &TrajState,
    cfg: &SimConfig,
    spec: &EnsembleSpec,
) -> Result<EnsembleEstimate> {
    if spec.n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be at least 1".into()));
    }
    if spec.observables.is_empty() {
        return Err(Error::InvalidParameter("no observables requested".into()));
    }
    cfg.validate(dynamics)?;
    if spec.measure == Measure::Physical {
        initial.check_normalized()?;
    }
    let rec_steps = cfg.recorded_steps()?;
    let n_rec = rec_steps.len();
    let n_jump = dynamics.n_jump();
    let columns: Vec<String> = spec.observables.iter().flat_map(|o| o.columns(n_jump)).collect();
    let width = columns.len();

    let n_chunks = spec.n_traj.div_ceil(CHUNK);
    let partials: Vec<Sums> = (0..n_chunks)
        .into_par_iter()
        .map(|c| -> Result<Sums> {
            let mut sums = Sums::zeros(n_rec * width);
            let mut obs = PathObserver {
                observables: &spec.observables,
                measure: spec.measure,
                width,
                counts: vec![0.0; n_jump],
                values: vec![0.0; n_rec * width],
                last_weight: 0.0,
            };
            for i in c * CHUNK..((c + 1) * CHUNK).min(spec.n_traj) {
                obs.counts.iter_mut().for_each(|n| *n = 0.0);
                let mut rng = trajectory_rng(spec.seed, i as u64);
                run_trajectory(dynamics, initial, cfg, spec.measure, &mut rng, &mut obs)?;
                for (k, v) in obs.values.iter().enumerate() {
                    sums.sum[k] += v;
                    sums.sum_sq[k] += v * v;
                }
                sums.final_weight += obs.last_weight;
            }
            Ok(sums)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total = Sums::zeros(n_rec * width);
    for p in &partials {
        total.absorb(p);
    }
    if spec.measure == Measure::Reference && total.final_weight == 0.0 {
        return Err(Error::WeightsUnderflow);
    }

    let n = spec.n_traj as f64;
    let mut mean = Vec::with_capacity(n_rec);
    let mut std_error = Vec::with_capacity(n_rec);
    for r in 0..n_rec {
        let mut m_row = Vec::with_capacity(width);
        let mut s_row = Vec::with_capacity(width);
        for c in 0..width {
            let k = r * width + c;
            let m = total.sum[k] / n;
            let se = if spec.n_traj > 1 {
                let var = ((total.sum_sq[k] - n * m * m) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            m_row.push(m);
            s_row.push(se);
        }
        mean.push(m_row);
        std_error.push(s_row);
    }
    Ok(EnsembleEstimate {
        times: rec_steps.iter().map(|&s| s as f64 * cfg.dt).collect(),
        columns,
        mean,
        std_error,
        n_traj: spec.n_traj,
        measure: spec.measure,
    })
}
