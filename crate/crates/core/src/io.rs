//! Model files, matrix literals and CSV output.
//!
//! Matrices are written as row-major lists of `[re, im]` pairs. Square
//! operators use a flat list (`n²` pairs); rectangular matrices such as the
//! detection matrix use one list per row.
//!
//! A model file is TOML with a single `[model]` table:
//!
//! ```toml
//! [model]
//! hamiltonian = [[0.5, 0.0], [0.0, 0.0], ...]   # 16 pairs
//! n_diffusive = 1
//! reference_rates = [0.5]                       # one per counting channel
//!
//! [[model.channels]]
//! label = "1"
//! coupling = [[0.0, 0.0], ...]                  # 16 pairs
//!
//! [[model.field]]                               # optional, piecewise constant
//! t = 0.0
//! v = [[0.0, 0.0], [0.0, 0.0]]
//!
//! [[model.detection]]                           # optional, piecewise constant
//! t = 0.0
//! u = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]
//! ```
//!
//! `scattering`, when present, is a nested list `[z][w]` of flat 16-pair
//! blocks. Floats are written in shortest round-trip form, so a written model
//! reloads bit for bit.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::engine::TrajState;
use crate::linalg::{Op4, StateVector, C64};
use crate::model::{ModelSpec, MonitoredModel};
use crate::{Error, Result};

pub type Pair = [f64; 2];

pub fn to_pairs<'a>(values: impl IntoIterator<Item = &'a C64>) -> Vec<Pair> {
    values.into_iter().map(|z| [z.re, z.im]).collect()
}

pub fn from_pairs(pairs: &[Pair]) -> Vec<C64> {
    pairs.iter().map(|[r, i]| C64::new(*r, *i)).collect()
}

/// Flat row-major literal of a 4×4 operator.
pub fn op4_to_literal(m: &Op4) -> Vec<Pair> {
    to_pairs(m.transpose().iter())
}

pub fn op4_from_literal(pairs: &[Pair]) -> Result<Op4> {
    if pairs.len() != 16 {
        return Err(Error::DimensionMismatch { expected: "16 [re, im] pairs".into(), got: pairs.len().to_string() });
    }
    Ok(Op4::from_row_slice(&from_pairs(pairs)))
}

/// One list of pairs per row.
pub fn matrix_to_literal(m: &DMatrix<C64>) -> Vec<Vec<Pair>> {
    m.row_iter().map(|row| to_pairs(row.iter())).collect()
}

pub fn matrix_from_literal(rows: &[Vec<Pair>]) -> Result<DMatrix<C64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::ModelFile("matrix rows have different lengths".into()));
    }
    let flat: Vec<C64> = rows.iter().flat_map(|r| from_pairs(r)).collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

/// A state literal: 4 pairs give a ket `(φ11, φ10, φ01, φ00)`, 16 pairs a
/// density matrix.
pub fn state_from_literal(pairs: &[Pair]) -> Result<TrajState> {
    match pairs.len() {
        4 => {
            let v = from_pairs(pairs);
            Ok(TrajState::Pure(StateVector::new(v[0], v[1], v[2], v[3])))
        }
        16 => Ok(TrajState::Mixed(op4_from_literal(pairs)?)),
        n => Err(Error::DimensionMismatch { expected: "4 (ket) or 16 (density) pairs".into(), got: n.to_string() }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    pub label: String,
    pub coupling: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldEntry {
    pub t: f64,
    pub v: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionEntry {
    pub t: f64,
    pub u: Vec<Vec<Pair>>,
}

/// Serialized form of a [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hamiltonian: Vec<Pair>,
    pub n_diffusive: usize,
    #[serde(default)]
    pub reference_rates: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scattering: Option<Vec<Vec<Vec<Pair>>>>,
    pub channels: Vec<ChannelEntry>,
    #[serde(default)]
    pub field: Vec<FieldEntry>,
    #[serde(default)]
    pub detection: Vec<DetectionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    model: ModelSection,
}

impl ModelSection {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        ModelSection {
            hamiltonian: op4_to_literal(&spec.hamiltonian),
            n_diffusive: spec.n_diffusive,
            reference_rates: spec.reference_rates.clone(),
            scattering: spec
                .scattering
                .as_ref()
                .map(|rows| rows.iter().map(|row| row.iter().map(op4_to_literal).collect()).collect()),
            channels: spec
                .labels
                .iter()
                .zip(&spec.couplings)
                .map(|(label, l)| ChannelEntry { label: label.clone(), coupling: op4_to_literal(l) })
                .collect(),
            field: spec.field.iter().map(|(t, v)| FieldEntry { t: *t, v: to_pairs(v) }).collect(),
            detection: spec.detection.iter().map(|(t, u)| DetectionEntry { t: *t, u: matrix_to_literal(u) }).collect(),
        }
    }

    pub fn to_spec(&self) -> Result<ModelSpec> {
        let couplings = self
            .channels
            .iter()
            .map(|ch| Ok((ch.label.clone(), op4_from_literal(&ch.coupling)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut spec = ModelSpec::new(op4_from_literal(&self.hamiltonian)?, couplings);
        spec.n_diffusive = self.n_diffusive;
        spec.reference_rates = self.reference_rates.clone();
        if let Some(rows) = &self.scattering {
            spec.scattering = Some(
                rows.iter()
                    .map(|row| row.iter().map(|b| op4_from_literal(b)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        if !self.field.is_empty() {
            spec.field = self.field.iter().map(|f| (f.t, from_pairs(&f.v))).collect();
        }
        if !self.detection.is_empty() {
            spec.detection =
                self.detection.iter().map(|d| Ok((d.t, matrix_from_literal(&d.u)?))).collect::<Result<Vec<_>>>()?;
        }
        Ok(spec)
    }
}

pub fn model_to_toml(m: &MonitoredModel) -> Result<String> {
    toml::to_string(&ModelFile { model: ModelSection::from_spec(m.spec()) }).map_err(|e| Error::ModelFile(e.to_string()))
}

/// Parses and validates a model file.
pub fn model_from_toml(text: &str) -> Result<MonitoredModel> {
    let file: ModelFile = toml::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))?;
    MonitoredModel::new(file.model.to_spec()?)
}

pub fn write_model(m: &MonitoredModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_toml(m)?).map_err(|e| Error::ModelFile(format!("{}: {e}", path.display())))
}

pub fn read_model(path: &Path) -> Result<MonitoredModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::ModelFile(format!("{}: {e}", path.display())))?;
    model_from_toml(&text)
}

/// `{:.16e}`: 17 significant digits, enough to reproduce every `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text with a header row and one row per time point, `t` first.
pub fn csv_string(columns: &[String], times: &[f64], rows: &[Vec<f64>]) -> String {
    let mut out = String::from("t");
    for c in columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (t, row) in times.iter().zip(rows) {
        out.push_str(&format_float(*t));
        for v in row {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    out
}
