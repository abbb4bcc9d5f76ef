//! Statistical and path-wise checks of the trajectory engine against the
//! master equation and the closed-form curves.

use std::collections::BTreeMap;

use entmon::analytics::{
    aposteriori_concurrence, aposteriori_concurrence_reconstruction, cpmd_residuals, oracle_mean_concurrence_local,
};
use entmon::engine::{
    ensemble_run, evolve_master, simulate, EnsembleEstimate, EnsembleSpec, Measure, Observable, Scheme, SimConfig,
    TrajState,
};
use entmon::entanglement::concurrence_mixed;
use entmon::linalg::{bell_basis, c, trace_distance, Op4};
use entmon::presets::{
    local_diffusive, local_jump_with_rate, nonlocal_diffusive, swap_witness, swap_witness_refined, Preset, PresetId,
};
use entmon::StateVector;

/// Statistical checks use `|x − y| ≤ K·SE` with this `K`; 4 keeps the
/// family-wise false alarm rate small over a few dozen grid points.
const K: f64 = 4.0;
const FLOOR: f64 = 1e-12;

fn generic() -> TrajState {
    TrajState::Pure(StateVector::new(c(0.3, 0.2), c(0.5, -0.1), c(0.1, 0.6), c(-0.2, 0.3)).normalized().unwrap())
}

fn run(p: &Preset, cfg: &SimConfig, n: usize, seed: u64, measure: Measure, observables: Vec<Observable>) -> EnsembleEstimate {
    ensemble_run(p.dynamics(), &generic(), cfg, &EnsembleSpec { n_traj: n, seed, measure, observables }).unwrap()
}

/// Largest `|mean − target|/(K·SE)` of one column.
fn worst_ratio(est: &EnsembleEstimate, col: &str, target: impl Fn(usize) -> f64) -> f64 {
    let (mean, se) = est.series(col).unwrap();
    (0..mean.len()).map(|i| (mean[i] - target(i)).abs() / (K * se[i]).max(FLOOR)).fold(0.0, f64::max)
}

/// Largest `D_tr/(K·SE)` of the mean state against `target`.
fn worst_state_ratio(est: &EnsembleEstimate, target: impl Fn(usize) -> (Op4, f64)) -> f64 {
    (0..est.times.len())
        .map(|i| {
            let (t, se) = target(i);
            let se = est.state_std_error(i).unwrap().hypot(se);
            trace_distance(&est.state_mean(i).unwrap(), &t) / (K * se).max(FLOOR)
        })
        .fold(0.0, f64::max)
}

#[test]
fn reference_weights_have_unit_mean() {
    let cfg = SimConfig::new(1.0, 1e-3).record_every(100);
    let presets = [
        swap_witness(1.0, 2.0).unwrap(),
        local_jump_with_rate(1.0, 0.0, 0.3, 0.0, Some(1.0)).unwrap(),
        local_diffusive(1.0, 0.5, 0.2, 0.7).unwrap(),
    ];
    for (n, p) in presets.iter().enumerate() {
        let est = run(p, &cfg, 4000, 10 + n as u64, Measure::Reference, vec![Observable::Weight]);
        let r = worst_ratio(&est, "weight", |_| 1.0);
        assert!(r <= 1.0, "{:?}: |E p − 1| = {r}·{K}SE", p.id);
    }
}

#[test]
fn both_measures_and_rates_give_the_local_mean_concurrence() {
    let cfg = SimConfig::new(1.0, 1e-3).record_every(100);
    let c0 = generic().concurrence().unwrap();
    for (n, lambda) in [0.5, 0.8].into_iter().enumerate() {
        let p = local_jump_with_rate(1.0, 0.0, 0.4, 1.2, Some(lambda)).unwrap();
        let oracle = oracle_mean_concurrence_local(p.monitored().unwrap(), c0).unwrap();
        for (m, measure) in [Measure::Reference, Measure::Physical].into_iter().enumerate() {
            let est = run(&p, &cfg, 3000, 20 + 2 * n as u64 + m as u64, measure, vec![Observable::Concurrence]);
            let r = worst_ratio(&est, "concurrence", |i| oracle.value(est.times[i]).unwrap());
            assert!(r <= 1.0, "λ = {lambda}, {}: deviation {r}·{K}SE", measure.tag());
        }
    }
}

#[test]
fn reference_estimates_do_not_depend_on_the_rate() {
    // Short horizon: the Q-mode variance grows like exp(T(λ − ν)²/λ).
    let cfg = SimConfig::new(0.5, 1e-3).record_every(50);
    let obs = vec![Observable::State, Observable::Concurrence];
    let a = run(&swap_witness(1.0, 1.0).unwrap(), &cfg, 4000, 31, Measure::Reference, obs.clone());
    let b = run(&swap_witness(1.0, 1.5).unwrap(), &cfg, 4000, 32, Measure::Reference, obs);
    let r = worst_state_ratio(&a, |i| (b.state_mean(i).unwrap(), b.state_std_error(i).unwrap()));
    assert!(r <= 1.0, "state deviation {r}·{K}SE");
    let (mb, sb) = b.series("concurrence").unwrap();
    let (ma, sa) = a.series("concurrence").unwrap();
    for i in 0..ma.len() {
        assert!((ma[i] - mb[i]).abs() <= K * sa[i].hypot(sb[i]).max(FLOOR));
    }
}

#[test]
fn both_schemes_reproduce_the_master_equation_on_average() {
    let p = local_diffusive(1.0, 1.0, 0.3, 0.9).unwrap();
    let rho0 = generic().density();
    for (n, scheme) in [Scheme::ExponentialSplit, Scheme::EulerMaruyama].into_iter().enumerate() {
        let cfg = SimConfig::new(1.0, 1e-3).record_every(100).scheme(scheme);
        let master = evolve_master(p.dynamics(), &rho0, &cfg).unwrap();
        let est = run(&p, &cfg, 3000, 40 + n as u64, Measure::Physical, vec![Observable::State]);
        let r = worst_state_ratio(&est, |i| (master.states[i], 0.0));
        assert!(r <= 1.0, "{scheme:?}: {r}·{K}SE");
    }
}

#[test]
fn weak_error_of_the_mean_state_shrinks_with_the_step() {
    // Mixed-state SME paths average to the master solution; a coarse step
    // shows the first-order bias, a finer one removes most of it.
    let p = local_diffusive(2.0, 0.0, 0.0, 0.0).unwrap();
    let initial = TrajState::Mixed(generic().density());
    let bias = |dt: f64| {
        let cfg = SimConfig::new(1.0, dt).scheme(Scheme::EulerMaruyama).record_every((1.0 / dt).round() as usize);
        let master = evolve_master(p.dynamics(), &initial.density(), &SimConfig::new(1.0, 1e-4)).unwrap();
        let est = ensemble_run(
            p.dynamics(),
            &initial,
            &cfg,
            &EnsembleSpec { n_traj: 20_000, seed: 51, measure: Measure::Reference, observables: vec![Observable::State] },
        )
        .unwrap();
        let last = est.times.len() - 1;
        (trace_distance(&est.state_mean(last).unwrap(), master.states.last().unwrap()), est.state_std_error(last).unwrap())
    };
    let (coarse, se_coarse) = bias(0.1);
    let (fine, se_fine) = bias(0.01);
    assert!(fine < coarse, "bias {fine} at dt = 0.01 vs {coarse} at dt = 0.1");
    assert!(fine <= 0.2 * coarse + K * se_fine.hypot(se_coarse), "{fine} vs {coarse}");
}

#[test]
fn apriori_concurrence_is_below_the_mean_and_the_mean_below_the_start() {
    let cfg = SimConfig::new(2.0, 1e-3).record_every(100);
    let c0 = generic().concurrence().unwrap();
    for (n, id) in [PresetId::LocalDiffusive, PresetId::LocalJump, PresetId::SwapWitness].into_iter().enumerate() {
        let p = Preset::build(id, &BTreeMap::new()).unwrap();
        let master = evolve_master(p.dynamics(), &generic().density(), &cfg).unwrap();
        let est = run(&p, &cfg, 2000, 60 + n as u64, Measure::Physical, vec![Observable::Concurrence]);
        let (mean, se) = est.series("concurrence").unwrap();
        for i in 0..mean.len() {
            let apriori = concurrence_mixed(&master.states[i]).unwrap();
            assert!(apriori <= mean[i] + K * se[i] + FLOOR, "{}: t = {}", id.name(), est.times[i]);
            if id != PresetId::SwapWitness {
                // Local detection can only lose entanglement on average.
                assert!(mean[i] <= c0 + K * se[i] + FLOOR);
            }
        }
    }
}

#[test]
fn refined_marks_match_the_four_channel_model() {
    let cfg = SimConfig::new(2.0, 1e-3).record_every(200);
    let obs = vec![Observable::State, Observable::Concurrence];
    let a = run(&swap_witness(1.0, 1.0).unwrap(), &cfg, 3000, 71, Measure::Physical, obs.clone());
    let b = run(&swap_witness_refined(1.0, 1.0).unwrap(), &cfg, 3000, 72, Measure::Physical, obs);
    let r = worst_state_ratio(&a, |i| (b.state_mean(i).unwrap(), b.state_std_error(i).unwrap()));
    assert!(r <= 1.0, "{r}");
    let (ma, sa) = a.series("concurrence").unwrap();
    let (mb, sb) = b.series("concurrence").unwrap();
    for i in 0..ma.len() {
        assert!((ma[i] - mb[i]).abs() <= K * sa[i].hypot(sb[i]).max(FLOOR));
    }
}

#[test]
fn counts_collapse_onto_the_detected_bell_state() {
    let p = swap_witness(2.0, 2.0).unwrap();
    let cfg = SimConfig::new(3.0, 1e-3);
    let bell = bell_basis();
    let rec = simulate(p.dynamics(), &generic(), &cfg, Measure::Physical, 5).unwrap();
    assert!(rec.counts.len() > 2, "{} counts", rec.counts.len());
    let mut previous = match generic() {
        TrajState::Pure(phi) => phi,
        _ => unreachable!(),
    };
    for (n, ev) in rec.counts.iter().enumerate() {
        // The drawn Kraus index must be a basis state the pre-jump state populates.
        let i = ev.mark.expect("pure states record the Kraus index");
        assert!(previous.0[i].norm() > 1e-9, "count {n}: mark {i} has zero amplitude");
        // Between counts the state is frozen, so it is β of the last channel.
        let k = rec.times.iter().position(|&t| t > ev.time + 1e-12).unwrap_or(rec.times.len() - 1);
        let TrajState::Pure(phi) = rec.states[k] else { unreachable!() };
        let overlap = bell[ev.channel].inner(&phi).norm_sqr() / phi.norm_sqr();
        assert!((overlap - 1.0).abs() < 1e-12, "count {n}: overlap {overlap}");
        previous = bell[ev.channel];
    }
}

#[test]
fn reconstruction_follows_the_simulated_concurrence() {
    let cfg = SimConfig::new(1.0, 1e-4);
    let presets = [
        local_diffusive(1.0, 0.0, 0.4, 1.3).unwrap(),
        local_diffusive(1.0, 0.8, 0.0, 0.5).unwrap(),
        local_jump_with_rate(1.0, 0.0, 0.6, 0.2, Some(0.8)).unwrap(),
    ];
    for (n, p) in presets.iter().enumerate() {
        for seed in 0..3 {
            let rec = simulate(p.dynamics(), &generic(), &cfg, Measure::Physical, 100 * n as u64 + seed).unwrap();
            let direct = aposteriori_concurrence(&rec).unwrap();
            let rebuilt = aposteriori_concurrence_reconstruction(&rec, p.monitored().unwrap()).unwrap();
            let worst = direct.iter().zip(&rebuilt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(worst < 0.02, "preset {n}, seed {seed}: {worst}");
        }
    }
}

/// The linear (Q-mode) state obeys the `χ ± 𝒟` equations path by path; the
/// ℰ term is the only record-dependent input.
#[test]
fn chi_and_d_combinations_follow_their_equations_with_precession() {
    let (gamma, omega0, theta) = (1.0, 1.0, 0.4);
    let p = nonlocal_diffusive(gamma, omega0, theta, 0.3).unwrap();
    let dt = 1e-3;
    let cfg = SimConfig::new(2.0, dt);
    for seed in 0..5 {
        let rec = simulate(p.dynamics(), &generic(), &cfg, Measure::Reference, seed).unwrap();
        let [plus, minus] = cpmd_residuals(&rec, gamma, theta, omega0).unwrap();
        assert!(plus < 5.0 * dt && minus < 5.0 * dt, "seed {seed}: {plus}, {minus}");
    }
}

#[test]
fn shorter_horizons_give_prefixes_of_longer_runs() {
    let p = local_jump_with_rate(1.0, 0.5, 0.0, 0.0, Some(0.7)).unwrap();
    for measure in [Measure::Reference, Measure::Physical] {
        let long = simulate(p.dynamics(), &generic(), &SimConfig::new(2.0, 1e-3), measure, 9).unwrap();
        let short = simulate(p.dynamics(), &generic(), &SimConfig::new(1.0, 1e-3), measure, 9).unwrap();
        let n = short.times.len();
        assert_eq!(&long.states[..n], &short.states[..]);
        assert_eq!(&long.weights[..n], &short.weights[..]);
        let cut = long.counts.iter().filter(|e| e.time <= 1.0).count();
        assert_eq!(&long.counts[..cut], &short.counts[..]);
    }
}
