use std::path::Path;

use entmon::analytics::{find_esd, oracle_esd_time, preset_oracles};
use entmon::engine::{ensemble_run, evolve_master, simulate_stream, EnsembleEstimate, TrajState, TrajectoryRecord};
use entmon::io::{csv_string, model_to_toml};
use entmon::presets::{Preset, PresetId};
use entmon::Op4;
use serde_json::json;

use crate::config::RunConfig;
use crate::CliError;

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    write(path, &(serde_json::to_string_pretty(value).expect("JSON values serialize") + "\n"))
}

/// `t, c, c_se, …` for every estimated column.
fn estimates_csv(est: &EnsembleEstimate) -> String {
    let columns: Vec<String> = est.columns.iter().flat_map(|c| [c.clone(), format!("{c}_se")]).collect();
    let rows: Vec<Vec<f64>> = est
        .mean
        .iter()
        .zip(&est.std_error)
        .map(|(m, s)| m.iter().zip(s).flat_map(|(a, b)| [*a, *b]).collect())
        .collect();
    csv_string(&columns, &est.times, &rows)
}

fn state_columns(state: &TrajState) -> Vec<String> {
    match state {
        TrajState::Pure(_) => ["11", "10", "01", "00"]
            .iter()
            .flat_map(|b| [format!("phi{b}_re"), format!("phi{b}_im")])
            .collect(),
        TrajState::Mixed(_) => (0..16)
            .flat_map(|i| {
                let (r, c) = (i / 4 + 1, i % 4 + 1);
                [format!("rho{r}{c}_re"), format!("rho{r}{c}_im")]
            })
            .collect(),
    }
}

fn matrix_row(m: &Op4) -> Vec<f64> {
    m.transpose().iter().flat_map(|z| [z.re, z.im]).collect()
}

/// One row per recorded point: weight, concurrence, state entries and
/// cumulative counts.
fn trajectory_csv(rec: &TrajectoryRecord) -> Result<String, CliError> {
    let mut columns = vec!["weight".to_string(), "concurrence".to_string()];
    columns.extend(state_columns(&rec.states[0]));
    columns.extend((1..=rec.n_jump_channels).map(|k| format!("count{k}")));
    let mut rows = Vec::with_capacity(rec.times.len());
    for (t, s) in rec.times.iter().zip(&rec.states) {
        let w = s.weight();
        let mut row = vec![w, if w > 0.0 { s.concurrence()? } else { 0.0 }];
        match s {
            TrajState::Pure(phi) => row.extend(phi.0.iter().flat_map(|z| [z.re, z.im])),
            TrajState::Mixed(m) => row.extend(matrix_row(m)),
        }
        row.extend((0..rec.n_jump_channels).map(|k| rec.count_until(k, *t) as f64));
        rows.push(row);
    }
    Ok(csv_string(&columns, &rec.times, &rows))
}

fn run_ensemble(cfg: &RunConfig, csv_path: &Path) -> Result<(), CliError> {
    let est = ensemble_run(cfg.model.dynamics(), &cfg.initial, &cfg.sim, &cfg.ensemble_spec())?;
    write(csv_path, &estimates_csv(&est))
}

fn run_summary(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "model": cfg.model.preset().map_or("file", |p| p.id.name()),
        "params": cfg.model.preset().map(|p| &p.params),
        "measure": cfg.measure.tag(),
        "n_traj": cfg.n_traj,
        "seed": cfg.seed,
        "t_final": cfg.sim.t_final,
        "dt": cfg.sim.dt,
        "record_every": cfg.sim.record_every,
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    create_dir(&cfg.out_dir)?;
    run_ensemble(cfg, &cfg.out_dir.join("estimates.csv"))?;
    if cfg.traj_dump {
        let dir = cfg.out_dir.join("trajectories");
        create_dir(&dir)?;
        for i in 0..cfg.n_traj {
            let rec =
                simulate_stream(cfg.model.dynamics(), &cfg.initial, &cfg.sim, cfg.measure, cfg.seed, i as u64)?;
            write(&dir.join(format!("traj_{i:05}.csv")), &trajectory_csv(&rec)?)?;
        }
    }
    write_json(&cfg.out_dir.join("run.json"), &run_summary(cfg))
}

pub fn master(cfg: &RunConfig) -> Result<(), CliError> {
    create_dir(&cfg.out_dir)?;
    let rho0 = cfg.initial.normalized_density()?;
    let series = evolve_master(cfg.model.dynamics(), &rho0, &cfg.sim)?;
    let esd = find_esd(cfg.model.dynamics(), &rho0, &cfg.sim)?;

    let mut columns = vec!["concurrence".to_string(), "purity".to_string()];
    columns.extend(state_columns(&TrajState::Mixed(rho0)));
    let mut rows = Vec::with_capacity(series.states.len());
    for eta in &series.states {
        let mut row = vec![entmon::entanglement::concurrence_mixed(eta)?, (eta * eta).trace().re];
        row.extend(matrix_row(eta));
        rows.push(row);
    }
    write(&cfg.out_dir.join("master.csv"), &csv_string(&columns, &series.times, &rows))?;
    let last = series.states.last().expect("series has the initial point");
    write_json(
        &cfg.out_dir.join("summary.json"),
        &json!({
            "esd_time": esd,
            "min_eigenvalue": series.min_eigenvalue,
            "final_trace": last.trace().re,
            "t_final": cfg.sim.t_final,
            "dt": cfg.sim.dt,
        }),
    )?;
    match esd {
        Some(t) => println!("entanglement sudden death at t = {t:.12}"),
        None => println!("no entanglement sudden death before t = {}", cfg.sim.t_final),
    }
    Ok(())
}

fn presets_with_oracles() -> String {
    PresetId::ALL
        .iter()
        .filter_map(|id| {
            let p = Preset::build(*id, &Default::default()).ok()?;
            if p.oracles.is_empty() {
                return None;
            }
            let names: Vec<_> = p.oracles.iter().map(|o| o.name()).collect();
            Some(format!("{} ({})", id.name(), names.join(", ")))
        })
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn oracle(cfg: &RunConfig) -> Result<(), CliError> {
    let no_oracle = || {
        CliError::Config(format!("this model has no oracle curves; presets with oracles: {}", presets_with_oracles()))
    };
    let preset = cfg.model.preset().ok_or_else(no_oracle)?;
    if preset.oracles.is_empty() {
        return Err(no_oracle());
    }
    create_dir(&cfg.out_dir)?;
    let curves = preset_oracles(preset, &cfg.initial)?;
    let times: Vec<f64> = cfg.sim.recorded_steps()?.iter().map(|&i| i as f64 * cfg.sim.dt).collect();
    let columns: Vec<String> = curves.iter().flat_map(|(n, _)| [n.clone(), format!("{n}_se")]).collect();
    let mut rows = Vec::with_capacity(times.len());
    for &t in &times {
        let mut row = Vec::with_capacity(columns.len());
        for (_, c) in &curves {
            row.push(c.value(t)?);
            row.push(0.0);
        }
        rows.push(row);
    }
    write(&cfg.out_dir.join("oracle.csv"), &csv_string(&columns, &times, &rows))?;
    let esd = match oracle_esd_time(preset, &cfg.initial.normalized_density()?) {
        Ok(t) => t,
        Err(entmon::Error::Unsupported(_)) => None,
        Err(e) => return Err(e.into()),
    };
    write_json(&cfg.out_dir.join("oracle.json"), &json!({ "preset": preset.id.name(), "esd_time": esd }))
}

pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let s = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("the config has no [sweep] section".into()))?;
    create_dir(&cfg.out_dir)?;
    let mut index = Vec::with_capacity(s.values.len());
    for (i, &v) in s.values.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(i as u64);
        let point = cfg.with_param(&s.param, v, seed)?;
        let file = format!("sweep_{i:03}.csv");
        run_ensemble(&point, &cfg.out_dir.join(&file))?;
        index.push(json!({ "index": i, "value": v, "seed": seed, "file": file }));
    }
    write_json(&cfg.out_dir.join("sweep.json"), &json!({ "param": s.param, "points": index, "run": run_summary(cfg) }))
}

pub fn export_model(cfg: &RunConfig) -> Result<(), CliError> {
    let preset = cfg.model.preset().ok_or_else(|| CliError::Config("export-model needs a preset".into()))?;
    let m = preset.monitored().ok_or_else(|| {
        CliError::Config(format!("preset {} is a channel model without a model-file form", preset.id.name()))
    })?;
    create_dir(&cfg.out_dir)?;
    write(&cfg.out_dir.join("model.toml"), &model_to_toml(m)?)
}
