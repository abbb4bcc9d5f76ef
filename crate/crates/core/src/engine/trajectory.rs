use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::{CountEvent, Measure, Scheme, SimConfig, TrajState, TrajectoryRecord, WEIGHT_FLOOR};
use crate::linalg::{expm, expm_apply, re, Ket, Op4, StateVector, C64};
use crate::model::{segment_index, DerivedOperators, Dynamics, JumpChannel};
use crate::Result;

/// Thinning bound factor: proposals are drawn at `1.5·μ_k(t−)`.
const THINNING_FACTOR: f64 = 1.5;

/// Stream `index` of the root `seed`; streams are independent, so
/// trajectories can run in any order.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Receives what a trajectory produces as it is integrated.
pub trait Observer {
    /// Called at every recorded grid point; `index` counts recorded points.
    fn record(&mut self, index: usize, t: f64, state: &TrajState, weight: f64) -> Result<()>;

    /// Output increments of one full integration step.
    fn increment(&mut self, _dw: &[f64]) {}

    fn count(&mut self, _event: CountEvent) {}
}

struct Segment {
    ops: DerivedOperators,
    /// Continuous generator acting on vectors between counts.
    generator: Op4,
    /// `exp(generator·dt)` for the splitting scheme.
    full_step: Op4,
    effects: Vec<Op4>,
}

impl Segment {
    fn new(ops: DerivedOperators, dt: f64, scheme: Scheme) -> Self {
        let mut generator = ops.drift + Op4::identity() * re(ops.total_rate() / 2.0);
        if scheme == Scheme::ExponentialSplit {
            for r in &ops.diffusive {
                generator -= r * r * re(0.5);
            }
        }
        let full_step = match scheme {
            Scheme::ExponentialSplit => expm(&(generator * re(dt))),
            Scheme::EulerMaruyama => Op4::identity(),
        };
        let effects = ops.jumps.iter().map(JumpChannel::effect).collect();
        Segment { ops, generator, full_step, effects }
    }

    /// Evolves the continuous part over `h` with output increments `dw`.
    fn advance(&self, scheme: Scheme, state: &mut TrajState, h: f64, dw: &[f64], is_full: bool) {
        let noise = || -> Op4 {
            self.ops.diffusive.iter().zip(dw).map(|(r, w)| r * re(*w)).sum()
        };
        let has_noise = !self.ops.diffusive.is_empty();
        match (scheme, state) {
            (Scheme::ExponentialSplit, TrajState::Pure(phi)) => {
                let mut v = if is_full {
                    self.full_step * phi.0
                } else {
                    expm_apply(&(self.generator * re(h)), &phi.0)
                };
                if has_noise {
                    v = expm_apply(&noise(), &v);
                }
                phi.0 = v;
            }
            (Scheme::ExponentialSplit, TrajState::Mixed(s)) => {
                let e = if is_full { self.full_step } else { expm(&(self.generator * re(h))) };
                let mut out = e * *s * e.adjoint();
                if has_noise {
                    let n = expm(&noise());
                    out = n * out * n.adjoint();
                }
                *s = hermitize(&out);
            }
            (Scheme::EulerMaruyama, TrajState::Pure(phi)) => {
                let v = phi.0;
                phi.0 = v + self.generator * v * re(h) + noise() * v;
            }
            (Scheme::EulerMaruyama, TrajState::Mixed(s)) => {
                let g = &self.generator;
                let mut out = *s + (g * *s + *s * g.adjoint()) * re(h);
                for (r, w) in self.ops.diffusive.iter().zip(dw) {
                    out += r * *s * r.adjoint() * re(h) + (r * *s + *s * r.adjoint()) * re(*w);
                }
                *s = hermitize(&out);
            }
        }
    }

    /// Output drifts `m_j = 2 Re Tr(R_j ρ)` of a normalized state.
    fn output_drift(&self, state: &TrajState, j: usize) -> f64 {
        let r = &self.ops.diffusive[j];
        2.0 * match state {
            TrajState::Pure(phi) => phi.0.dotc(&(r * phi.0)).re,
            TrajState::Mixed(s) => (r * s).trace().re,
        }
    }

    /// Intensity `μ_k = Tr 𝒥_k(ρ)` of a normalized state.
    fn intensity(&self, state: &TrajState, k: usize) -> f64 {
        let e = &self.effects[k];
        match state {
            TrajState::Pure(phi) => phi.0.dotc(&(e * phi.0)).re,
            TrajState::Mixed(s) => (e * s).trace().re,
        }
        .max(0.0)
    }
}

fn hermitize(s: &Op4) -> Op4 {
    (s + s.adjoint()) * re(0.5)
}

/// Applies the jump map of `ch`. Under Q the result is `𝒥(σ)/λ`; under P
/// it is normalized. Multi-Kraus channels acting on pure states pick one
/// Kraus operator with probability proportional to `‖K_i φ‖²`.
fn apply_jump(ch: &JumpChannel, state: &mut TrajState, measure: Measure, rng: &mut ChaCha8Rng) -> Option<usize> {
    let lam = ch.rate();
    match state {
        TrajState::Pure(phi) => {
            let (v, mark): (Ket, Option<usize>) = match ch.kraus() {
                [k] => (k * phi.0, None),
                kraus => {
                    let images: Vec<Ket> = kraus.iter().map(|k| k * phi.0).collect();
                    let q: Vec<f64> = images.iter().map(|v| v.norm_squared()).collect();
                    let total: f64 = q.iter().sum();
                    if total == 0.0 {
                        (Ket::zeros(), None)
                    } else {
                        let mut u = rng.random::<f64>() * total;
                        let mut pick = q.len() - 1;
                        for (i, qi) in q.iter().enumerate() {
                            if u < *qi {
                                pick = i;
                                break;
                            }
                            u -= qi;
                        }
                        (images[pick] * re((total / q[pick]).sqrt()), Some(pick))
                    }
                }
            };
            phi.0 = match measure {
                Measure::Reference => v * re(1.0 / lam.sqrt()),
                Measure::Physical => normalize_ket(v),
            };
            mark
        }
        TrajState::Mixed(s) => {
            let out = hermitize(&ch.apply(s));
            *s = match measure {
                Measure::Reference => out / re(lam),
                Measure::Physical => {
                    let tr = out.trace().re;
                    if tr > 0.0 {
                        out / re(tr)
                    } else {
                        out
                    }
                }
            };
            None
        }
    }
}

fn normalize_ket(v: Ket) -> Ket {
    let n = v.norm();
    if n > 0.0 {
        v / C64::new(n, 0.0)
    } else {
        v
    }
}

fn normalize(state: &mut TrajState) {
    match state {
        TrajState::Pure(phi) => phi.0 = normalize_ket(phi.0),
        TrajState::Mixed(s) => {
            let tr = s.trace().re;
            if tr > 0.0 {
                *s /= re(tr);
            }
        }
    }
}

fn zero_state(state: &TrajState) -> TrajState {
    match state {
        TrajState::Pure(_) => TrajState::Pure(StateVector(Ket::zeros())),
        TrajState::Mixed(_) => TrajState::Mixed(Op4::zeros()),
    }
}

fn gaussians(rng: &mut ChaCha8Rng, out: &mut [f64], h: f64) {
    let s = h.sqrt();
    for w in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *w = z * s;
    }
}

fn exp_sample(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    Exp::new(rate).expect("positive rate").sample(rng)
}

/// Integrates one trajectory from `initial` and feeds `observer`.
///
/// The caller is responsible for [`SimConfig::validate`]; under
/// [`Measure::Physical`] the initial state must be normalized.
pub fn run_trajectory<O: Observer>(
    dynamics: &dyn Dynamics,
    initial: &TrajState,
    cfg: &SimConfig,
    measure: Measure,
    rng: &mut ChaCha8Rng,
    observer: &mut O,
) -> Result<()> {
    let n_steps = cfg.n_steps()?;
    if measure == Measure::Physical {
        initial.check_normalized()?;
    }
    let dt = cfg.dt;
    let breakpoints = dynamics.breakpoints();
    let mut seg_idx = 0;
    let mut seg = Segment::new(dynamics.operators(0.0), dt, cfg.scheme);
    let n_diff = seg.ops.diffusive.len();
    let n_jump = seg.ops.jumps.len();

    let mut state = *initial;
    let mut terminated = false;
    let mut dw = vec![0.0; n_diff];
    let mut dw_step = vec![0.0; n_diff];

    let mut next_jump: Vec<f64> = match measure {
        Measure::Reference => seg.ops.jumps.iter().map(|ch| exp_sample(rng, ch.rate())).collect(),
        Measure::Physical => Vec::new(),
    };

    let mut rec_idx = 0;
    let weight_of = |s: &TrajState| match measure {
        Measure::Reference => s.weight(),
        Measure::Physical => 1.0,
    };
    observer.record(rec_idx, 0.0, &state, weight_of(&state))?;
    rec_idx += 1;

    for n in 0..n_steps {
        let t0 = n as f64 * dt;
        let t1 = (n + 1) as f64 * dt;
        let idx = segment_index(&breakpoints, t0);
        if idx != seg_idx {
            seg_idx = idx;
            seg = Segment::new(dynamics.operators(t0), dt, cfg.scheme);
        }
        dw_step.iter_mut().for_each(|w| *w = 0.0);

        if !terminated {
            match measure {
                Measure::Reference => {
                    let mut cur = t0;
                    loop {
                        let (k, tj) = next_jump
                            .iter()
                            .copied()
                            .enumerate()
                            .fold((usize::MAX, f64::INFINITY), |b, (k, t)| if t < b.1 { (k, t) } else { b });
                        let end = if tj <= t1 { tj } else { t1 };
                        let h = end - cur;
                        gaussians(rng, &mut dw, h);
                        seg.advance(cfg.scheme, &mut state, h, &dw, cur == t0 && end == t1);
                        for (a, b) in dw_step.iter_mut().zip(&dw) {
                            *a += b;
                        }
                        cur = end;
                        if tj > t1 {
                            break;
                        }
                        let mark = apply_jump(&seg.ops.jumps[k], &mut state, measure, rng);
                        observer.count(CountEvent { time: tj, channel: k, mark });
                        next_jump[k] += exp_sample(rng, seg.ops.jumps[k].rate());
                    }
                    if !(state.weight() >= WEIGHT_FLOOR) {
                        terminated = true;
                        state = zero_state(&state);
                    }
                }
                Measure::Physical => {
                    let mut bounds: Vec<f64> =
                        (0..n_jump).map(|k| THINNING_FACTOR * seg.intensity(&state, k)).collect();
                    let mut cur = t0;
                    loop {
                        let total: f64 = bounds.iter().sum();
                        let proposal = if total > 0.0 { cur + exp_sample(rng, total) } else { f64::INFINITY };
                        let end = if proposal < t1 { proposal } else { t1 };
                        let h = end - cur;
                        gaussians(rng, &mut dw, h);
                        for (j, w) in dw.iter_mut().enumerate() {
                            *w += seg.output_drift(&state, j) * h;
                        }
                        seg.advance(cfg.scheme, &mut state, h, &dw, cur == t0 && end == t1);
                        normalize(&mut state);
                        for (a, b) in dw_step.iter_mut().zip(&dw) {
                            *a += b;
                        }
                        cur = end;
                        if proposal >= t1 {
                            break;
                        }
                        let mut u = rng.random::<f64>() * total;
                        let mut k = n_jump - 1;
                        for (i, b) in bounds.iter().enumerate() {
                            if u < *b {
                                k = i;
                                break;
                            }
                            u -= b;
                        }
                        let mu = seg.intensity(&state, k);
                        if rng.random::<f64>() * bounds[k] < mu {
                            let mark = apply_jump(&seg.ops.jumps[k], &mut state, measure, rng);
                            observer.count(CountEvent { time: proposal, channel: k, mark });
                            for (i, b) in bounds.iter_mut().enumerate() {
                                *b = THINNING_FACTOR * seg.intensity(&state, i);
                            }
                        }
                    }
                }
            }
        }
        observer.increment(&dw_step);

        let step = n + 1;
        if step % cfg.record_every == 0 || step == n_steps {
            observer.record(rec_idx, t1, &state, if terminated { 0.0 } else { weight_of(&state) })?;
            rec_idx += 1;
        }
    }
    Ok(())
}

struct RecordObserver {
    record: TrajectoryRecord,
}

impl Observer for RecordObserver {
    fn record(&mut self, _index: usize, t: f64, state: &TrajState, weight: f64) -> Result<()> {
        self.record.times.push(t);
        self.record.states.push(*state);
        self.record.weights.push(weight);
        Ok(())
    }

    fn increment(&mut self, dw: &[f64]) {
        self.record.wiener_increments.push(dw.to_vec());
    }

    fn count(&mut self, event: CountEvent) {
        self.record.counts.push(event);
    }
}

/// Simulates one trajectory under `measure`, using stream 0 of `seed`.
pub fn simulate(
    dynamics: &dyn Dynamics,
    initial: &TrajState,
    cfg: &SimConfig,
    measure: Measure,
    seed: u64,
) -> Result<TrajectoryRecord> {
    simulate_stream(dynamics, initial, cfg, measure, seed, 0)
}

/// Path `index` of an ensemble with root `seed`, fully recorded.
pub fn simulate_stream(
    dynamics: &dyn Dynamics,
    initial: &TrajState,
    cfg: &SimConfig,
    measure: Measure,
    seed: u64,
    index: u64,
) -> Result<TrajectoryRecord> {
    cfg.validate(dynamics)?;
    let mut rng = trajectory_rng(seed, index);
    let mut obs = RecordObserver {
        record: TrajectoryRecord {
            times: Vec::new(),
            states: Vec::new(),
            weights: Vec::new(),
            wiener_increments: Vec::new(),
            counts: Vec::new(),
            measure,
            dt: cfg.dt,
            record_every: cfg.record_every,
            n_jump_channels: dynamics.n_jump(),
        },
    };
    run_trajectory(dynamics, initial, cfg, measure, &mut rng, &mut obs)?;
    Ok(obs.record)
}

/// A trajectory of the normalized a posteriori state under the physical law.
pub fn simulate_physical(
    dynamics: &dyn Dynamics,
    initial: &TrajState,
    cfg: &SimConfig,
    seed: u64,
) -> Result<TrajectoryRecord> {
    simulate(dynamics, initial, cfg, Measure::Physical, seed)
}
