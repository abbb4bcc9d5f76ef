//! Run configuration: a TOML file with `[model]`, `[run]`, `[output]` and an
//! optional `[sweep]` section.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use entmon::engine::{EnsembleSpec, Measure, Observable, Scheme, SimConfig, TrajState};
use entmon::io::{read_model, state_from_literal, Pair};
use entmon::model::{Dynamics, MonitoredModel};
use entmon::presets::{named_state, Preset, PresetId};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    model: ModelSection,
    run: RunSection,
    #[serde(default)]
    output: OutputSection,
    sweep: Option<SweepSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    preset: Option<String>,
    file: Option<PathBuf>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    initial: Option<InitialSpec>,
}

/// A named state (`bell0`, `psi_esd`, …) or a literal of 4 or 16 pairs.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum InitialSpec {
    Named(String),
    Literal(Vec<Pair>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    #[serde(alias = "T")]
    t_final: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "one")]
    n_traj: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_mode")]
    mode: String,
    #[serde(default = "default_observables")]
    observables: Vec<String>,
    #[serde(default = "one")]
    record_every: usize,
    #[serde(default)]
    scheme: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
    #[serde(default)]
    traj_dump: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    param: String,
    values: Vec<f64>,
}

fn one() -> usize {
    1
}

fn default_dt() -> f64 {
    1e-3
}

fn default_mode() -> String {
    "Q".into()
}

fn default_observables() -> Vec<String> {
    vec!["concurrence".into()]
}

#[derive(Debug, Clone)]
pub enum ModelSource {
    Preset(Preset),
    File(MonitoredModel),
}

impl ModelSource {
    pub fn dynamics(&self) -> &dyn Dynamics {
        match self {
            ModelSource::Preset(p) => p.dynamics(),
            ModelSource::File(m) => m,
        }
    }

    pub fn preset(&self) -> Option<&Preset> {
        match self {
            ModelSource::Preset(p) => Some(p),
            ModelSource::File(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<f64>,
}

/// A validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelSource,
    /// Overrides the preset was built from, for sweeps.
    pub params: BTreeMap<String, f64>,
    pub initial: TrajState,
    pub sim: SimConfig,
    pub n_traj: usize,
    pub seed: u64,
    pub measure: Measure,
    pub observables: Vec<Observable>,
    pub out_dir: PathBuf,
    pub traj_dump: bool,
    pub sweep: Option<Sweep>,
}

/// Command-line overrides of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub traj_dump: bool,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, overrides)
    }

    /// Parses and validates; relative model file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| config_error(format!("config: {e}")))?;
        let m = file.model;
        let model = match (&m.preset, &m.file) {
            (Some(name), None) => ModelSource::Preset(Preset::build(PresetId::parse(name)?, &m.params)?),
            (None, Some(f)) => {
                if !m.params.is_empty() {
                    return Err(config_error("[model.params] only applies to presets"));
                }
                ModelSource::File(read_model(&base.join(f))?)
            }
            _ => return Err(config_error("[model] needs exactly one of 'preset' or 'file'")),
        };
        let initial = match &m.initial {
            None => named_state("bell0")?,
            Some(InitialSpec::Named(name)) => named_state(name)?,
            Some(InitialSpec::Literal(pairs)) => state_from_literal(pairs)?,
        };

        let r = file.run;
        if !(r.t_final > 0.0 && r.t_final.is_finite()) {
            return Err(config_error(format!("run.t_final must be positive, got {}", r.t_final)));
        }
        if !(r.dt > 0.0 && r.dt.is_finite()) {
            return Err(config_error(format!("run.dt must be positive, got {}", r.dt)));
        }
        if r.n_traj == 0 {
            return Err(config_error("run.n_traj must be at least 1"));
        }
        let measure = match r.mode.as_str() {
            "Q" => Measure::Reference,
            "P" => Measure::Physical,
            other => return Err(config_error(format!("run.mode must be \"Q\" or \"P\", got \"{other}\""))),
        };
        let scheme = match r.scheme.as_deref() {
            None | Some("exponential") => Scheme::ExponentialSplit,
            Some("euler") => Scheme::EulerMaruyama,
            Some(other) => {
                return Err(config_error(format!("run.scheme must be \"exponential\" or \"euler\", got \"{other}\"")))
            }
        };
        let observables = r.observables.iter().map(|o| Observable::parse(o)).collect::<Result<Vec<_>, _>>()?;
        if observables.is_empty() {
            return Err(config_error("run.observables is empty"));
        }
        let sim = SimConfig::new(r.t_final, r.dt).record_every(r.record_every).scheme(scheme);
        sim.validate(model.dynamics())?;

        let sweep = match file.sweep {
            None => None,
            Some(s) => {
                let Some(preset) = model.preset() else {
                    return Err(config_error("[sweep] needs a preset model"));
                };
                if preset.param(&s.param).is_none() {
                    return Err(config_error(format!(
                        "sweep.param '{}' is not a parameter of preset {}",
                        s.param,
                        preset.id.name()
                    )));
                }
                if s.values.is_empty() {
                    return Err(config_error("sweep.values is empty"));
                }
                Some(Sweep { param: s.param, values: s.values })
            }
        };

        Ok(RunConfig {
            model,
            params: m.params,
            initial,
            sim,
            n_traj: r.n_traj,
            seed: overrides.seed.unwrap_or(r.seed),
            measure,
            observables,
            out_dir: overrides.out.clone().or(file.output.dir).unwrap_or_else(|| PathBuf::from(".")),
            traj_dump: overrides.traj_dump || file.output.traj_dump,
            sweep,
        })
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            n_traj: self.n_traj,
            seed: self.seed,
            measure: self.measure,
            observables: self.observables.clone(),
        }
    }

    /// The configuration with one preset parameter replaced and seed `seed`.
    pub fn with_param(&self, name: &str, value: f64, seed: u64) -> Result<Self, CliError> {
        let preset = self.model.preset().ok_or_else(|| config_error("sweeps need a preset model"))?;
        let mut params = self.params.clone();
        params.insert(name.to_string(), value);
        let model = ModelSource::Preset(Preset::build(preset.id, &params)?);
        self.sim.validate(model.dynamics())?;
        Ok(RunConfig { model, params, seed, sweep: None, ..self.clone() })
    }
}
