//! The bundled models.
//!
//! | id | model |
//! |----|-------|
//! | `local_diffusive` | two qubits, `L_z = √(γ/2)σ_x` on each, homodyne-type detection with phases `φ_1, φ_2` |
//! | `local_jump` | same operators, counting detection |
//! | `nonlocal_diffusive` | same operators, detection mixing both environments (`θ, φ`) |
//! | `swap_witness` | Bell-state collapse model, 4 counting channels |
//! | `swap_witness_refined` | the same with all 16 marks `(x, x′)` |
//! | `gammadelta` | amplitude damping/pumping with three detection choices |
//!
//! Parameter names are the strings accepted by [`Preset::build`].

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};

use crate::engine::TrajState;
use crate::linalg::{
    bell_basis, c, on_first, on_second, re, sigma_minus, sigma_plus, sigma_x, sigma_y, sigma_z,
    DensityOperator, Factor, Op2, Op4, StateVector, C64,
};
use crate::model::{
    classify_interaction, ChannelModel, Dynamics, Interaction, JumpChannel, ModelSpec, MonitoredModel,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PresetId {
    LocalDiffusive,
    LocalJump,
    NonlocalDiffusive,
    SwapWitness,
    SwapWitnessRefined,
    GammaDelta,
}

impl PresetId {
    pub const ALL: [PresetId; 6] = [
        PresetId::LocalDiffusive,
        PresetId::LocalJump,
        PresetId::NonlocalDiffusive,
        PresetId::SwapWitness,
        PresetId::SwapWitnessRefined,
        PresetId::GammaDelta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetId::LocalDiffusive => "local_diffusive",
            PresetId::LocalJump => "local_jump",
            PresetId::NonlocalDiffusive => "nonlocal_diffusive",
            PresetId::SwapWitness => "swap_witness",
            PresetId::SwapWitnessRefined => "swap_witness_refined",
            PresetId::GammaDelta => "gammadelta",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
            Error::InvalidParameter(format!("unknown preset '{s}' (available: {})", names.join(", ")))
        })
    }

    /// Parameter names with their defaults.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            PresetId::LocalDiffusive => &[("gamma", 1.0), ("omega0", 0.0), ("phi1", 0.0), ("phi2", 0.0)],
            // lambda < 0 selects the default γ/2.
            PresetId::LocalJump => {
                &[("gamma", 1.0), ("omega0", 0.0), ("phi1", 0.0), ("phi2", 0.0), ("lambda", -1.0)]
            }
            PresetId::NonlocalDiffusive => &[("gamma", 1.0), ("omega0", 0.0), ("theta", 0.0), ("phi", 0.0)],
            // lambda < 0 selects the default ν.
            PresetId::SwapWitness | PresetId::SwapWitnessRefined => &[("nu", 1.0), ("lambda", -1.0)],
            PresetId::GammaDelta => &[("gamma_plus", 0.5), ("delta", 1.0), ("variant", 3.0), ("side", 3.0)],
        }
    }
}

/// Closed-form curves available for a preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OracleId {
    /// `𝔼_P[C_ρ(t)] = C_ρ0 exp(−∫c)` for local detection.
    MeanConcurrenceLocal,
    /// `|χ(t)|` for the non-local detection at `ω0 = 0`.
    NonlocalChi,
    /// A priori concurrence and death time at `ω0 = 0` (local presets).
    AprioriLocal,
    /// Bell-collapse mean concurrence `𝔼_P[C] = 1 − (1 − C_η(0))e^{−νt}`.
    BellCollapseMeanConcurrence,
    /// `η(t) = ρ0 e^{−νt} + (1 − e^{−νt})/4` and its concurrence.
    BellCollapseApriori,
}

impl OracleId {
    pub fn name(self) -> &'static str {
        match self {
            OracleId::MeanConcurrenceLocal => "mean_concurrence",
            OracleId::NonlocalChi => "abs_chi",
            OracleId::AprioriLocal => "apriori_concurrence",
            OracleId::BellCollapseMeanConcurrence => "mean_concurrence",
            OracleId::BellCollapseApriori => "apriori_concurrence",
        }
    }
}

/// How the two qubits interact in a preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Result of [`classify_interaction`].
    Computed(Interaction),
    /// Stated for models outside the `S = 1` classifier.
    Documented(Interaction),
}

impl Classification {
    pub fn interaction(self) -> Interaction {
        match self {
            Classification::Computed(i) | Classification::Documented(i) => i,
        }
    }
}

#[derive(Debug, Clone)]
pub enum PresetModel {
    Monitored(MonitoredModel),
    Channels(ChannelModel),
}

#[derive(Debug, Clone)]
pub struct Preset {
    pub id: PresetId,
    /// Resolved parameters, defaults included.
    pub params: BTreeMap<String, f64>,
    pub model: PresetModel,
    pub oracles: Vec<OracleId>,
    pub classification: Classification,
}

impl Preset {
    /// Builds a preset from named parameters; missing ones take defaults.
    pub fn build(id: PresetId, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let defaults = id.defaults();
        for key in overrides.keys() {
            if !defaults.iter().any(|(k, _)| k == key) {
                let names: Vec<_> = defaults.iter().map(|(k, _)| *k).collect();
                return Err(Error::InvalidParameter(format!(
                    "preset {} has no parameter '{key}' (expected one of: {})",
                    id.name(),
                    names.join(", ")
                )));
            }
        }
        let mut params: BTreeMap<String, f64> = defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        params.extend(overrides.iter().map(|(k, v)| (k.clone(), *v)));
        if let Some((k, v)) = params.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("parameter {k} = {v} is not finite")));
        }
        let p = |k: &str| params[k];
        let preset = match id {
            PresetId::LocalDiffusive => local_diffusive(p("gamma"), p("omega0"), p("phi1"), p("phi2"))?,
            PresetId::LocalJump => {
                let lam = if p("lambda") < 0.0 { None } else { Some(p("lambda")) };
                local_jump_with_rate(p("gamma"), p("omega0"), p("phi1"), p("phi2"), lam)?
            }
            PresetId::NonlocalDiffusive => nonlocal_diffusive(p("gamma"), p("omega0"), p("theta"), p("phi"))?,
            PresetId::SwapWitness | PresetId::SwapWitnessRefined => {
                let lam = if p("lambda") < 0.0 { p("nu") } else { p("lambda") };
                if id == PresetId::SwapWitness {
                    swap_witness(p("nu"), lam)?
                } else {
                    swap_witness_refined(p("nu"), lam)?
                }
            }
            PresetId::GammaDelta => {
                let variant = as_choice(p("variant"), "variant", 3)?;
                let side = as_choice(p("side"), "side", 3)?;
                gammadelta(p("gamma_plus"), p("delta"), variant, side)?
            }
        };
        Ok(preset)
    }

    pub fn dynamics(&self) -> &dyn Dynamics {
        match &self.model {
            PresetModel::Monitored(m) => m,
            PresetModel::Channels(m) => m,
        }
    }

    pub fn monitored(&self) -> Option<&MonitoredModel> {
        match &self.model {
            PresetModel::Monitored(m) => Some(m),
            PresetModel::Channels(_) => None,
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }
}

fn as_choice(x: f64, what: &str, max: u8) -> Result<u8> {
    if x.fract() == 0.0 && x >= 1.0 && x <= max as f64 {
        Ok(x as u8)
    } else {
        Err(Error::InvalidParameter(format!("{what} must be one of 1..={max}, got {x}")))
    }
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} must be positive, got {x}")))
    }
}

fn named(params: &[(&str, f64)]) -> BTreeMap<String, f64> {
    params.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn finish(id: PresetId, params: &[(&str, f64)], model: MonitoredModel, oracles: Vec<OracleId>) -> Result<Preset> {
    let classification = Classification::Computed(classify_interaction(&model)?);
    Ok(Preset { id, params: named(params), model: PresetModel::Monitored(model), oracles, classification })
}

/// `H = (ω0/2)(σ_z⊗1 + 1⊗σ_z)`, `L_1 = √(γ/2)σ_x⊗1`, `L_2 = 1⊗√(γ/2)σ_x`.
fn local_operators(gamma: f64, omega0: f64) -> (Op4, Vec<(String, Op4)>) {
    let l = sigma_x() * re((gamma / 2.0).sqrt());
    let h = (on_first(&sigma_z()) + on_second(&sigma_z())) * re(omega0 / 2.0);
    (h, vec![("1".into(), on_first(&l)), ("2".into(), on_second(&l))])
}

fn phase_matrix(phi1: f64, phi2: f64) -> DMatrix<C64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![C64::from_polar(1.0, phi1), C64::from_polar(1.0, phi2)]))
}

fn local_oracles(omega0: f64) -> Vec<OracleId> {
    let mut o = vec![OracleId::MeanConcurrenceLocal];
    if omega0 == 0.0 {
        o.push(OracleId::AprioriLocal);
    }
    o
}

/// Homodyne-type detection of each qubit's own environment with phases
/// `u = diag(e^{iφ1}, e^{iφ2})`; decay rate `c = γ(cos²φ1 + cos²φ2)`.
pub fn local_diffusive(gamma: f64, omega0: f64, phi1: f64, phi2: f64) -> Result<Preset> {
    positive(gamma, "gamma")?;
    let (h, ls) = local_operators(gamma, omega0);
    let model = MonitoredModel::new(ModelSpec::new(h, ls).with_detection(phase_matrix(phi1, phi2)))?;
    let params = [("gamma", gamma), ("omega0", omega0), ("phi1", phi1), ("phi2", phi2)];
    finish(PresetId::LocalDiffusive, &params, model, local_oracles(omega0))
}

/// Counting detection with `J_k = R_k` and the default reference rates
/// `λ_k = γ/2`, which make `J_k/√λ_k` unitary.
pub fn local_jump(gamma: f64, omega0: f64, phi1: f64, phi2: f64) -> Result<Preset> {
    local_jump_with_rate(gamma, omega0, phi1, phi2, None)
}

pub fn local_jump_with_rate(gamma: f64, omega0: f64, phi1: f64, phi2: f64, lambda: Option<f64>) -> Result<Preset> {
    positive(gamma, "gamma")?;
    let lam = lambda.unwrap_or(gamma / 2.0);
    positive(lam, "lambda")?;
    let (h, ls) = local_operators(gamma, omega0);
    let spec = ModelSpec::new(h, ls).with_detection(phase_matrix(phi1, phi2)).counting(vec![lam, lam]);
    let params = [("gamma", gamma), ("omega0", omega0), ("phi1", phi1), ("phi2", phi2), ("lambda", lam)];
    finish(PresetId::LocalJump, &params, MonitoredModel::new(spec)?, local_oracles(omega0))
}

/// `u = (1/√2)[[e^{i(θ+φ)}, e^{i(θ−φ)}], [i e^{i(θ+φ)}, −i e^{i(θ−φ)}]]`.
pub fn nonlocal_detection(theta: f64, phi: f64) -> DMatrix<C64> {
    let a = C64::from_polar(FRAC_1_SQRT_2, theta + phi);
    let b = C64::from_polar(FRAC_1_SQRT_2, theta - phi);
    let i = c(0.0, 1.0);
    DMatrix::from_row_slice(2, 2, &[a, b, i * a, -i * b])
}

/// Diffusive detection mixing both environments. The master equation is
/// that of [`local_diffusive`]; `χ` evolves without noise.
pub fn nonlocal_diffusive(gamma: f64, omega0: f64, theta: f64, phi: f64) -> Result<Preset> {
    positive(gamma, "gamma")?;
    let (h, ls) = local_operators(gamma, omega0);
    let model = MonitoredModel::new(ModelSpec::new(h, ls).with_detection(nonlocal_detection(theta, phi)))?;
    let oracles = if omega0 == 0.0 { vec![OracleId::NonlocalChi, OracleId::AprioriLocal] } else { vec![] };
    let params = [("gamma", gamma), ("omega0", omega0), ("theta", theta), ("phi", phi)];
    finish(PresetId::NonlocalDiffusive, &params, model, oracles)
}

fn bell_collapse_preset(id: PresetId, nu: f64, lambda: f64, jumps: Vec<JumpChannel>) -> Result<Preset> {
    Ok(Preset {
        id,
        params: named(&[("nu", nu), ("lambda", lambda)]),
        model: PresetModel::Channels(ChannelModel::new(Op4::zeros(), vec![], jumps)?),
        oracles: vec![OracleId::BellCollapseMeanConcurrence, OracleId::BellCollapseApriori],
        // The qubits swap their joint state with a common environment pair:
        // no direct coupling, interaction only through the environment.
        classification: Classification::Documented(Interaction::IndirectOnly),
    })
}

/// Bell-state collapse model. Channel `x′` has Kraus operators
/// `√(ν/4)|β_x′⟩⟨u_i|` (i = 1..4) and reference rate `λ/4`; the
/// Liouvillian is `ℒη = ν(Tr η/4)·1 − νη`.
pub fn swap_witness(nu: f64, lambda: f64) -> Result<Preset> {
    positive(nu, "nu")?;
    positive(lambda, "lambda")?;
    let bell = bell_basis();
    let s = re((nu / 4.0).sqrt());
    let jumps = (0..4)
        .map(|x| {
            let kraus = (0..4).map(|i| bell[x].0 * StateVector::basis(i).0.adjoint() * s).collect();
            JumpChannel::new(kraus, lambda / 4.0)
        })
        .collect::<Result<Vec<_>>>()?;
    bell_collapse_preset(PresetId::SwapWitness, nu, lambda, jumps)
}

/// The 16-mark version: channel `4x + x′` has the single Kraus operator
/// `√(ν/4)|β_x′⟩⟨β_x|` and reference rate `λ/16`.
pub fn swap_witness_refined(nu: f64, lambda: f64) -> Result<Preset> {
    positive(nu, "nu")?;
    positive(lambda, "lambda")?;
    let bell = bell_basis();
    let s = re((nu / 4.0).sqrt());
    let mut jumps = Vec::with_capacity(16);
    for x in 0..4 {
        for xp in 0..4 {
            jumps.push(JumpChannel::single(bell[xp].0 * bell[x].0.adjoint() * s, lambda / 16.0)?);
        }
    }
    bell_collapse_preset(PresetId::SwapWitnessRefined, nu, lambda, jumps)
}

/// Single-qubit jump operators of one detection variant.
///
/// All three give the dissipator `γ_− D[σ_−] + γ_+ D[σ_+]`, `γ_− = δ + γ_+`:
/// 1. `√γ_− σ_−`, `√γ_+ σ_+`
/// 2. `√(γ_+/2) σ_x`, `√(γ_+/2) σ_y`, `√δ σ_−`
/// 3. `(√γ_+ σ_+ ± √γ_− σ_−)/√2`
pub fn gammadelta_operators(gamma_plus: f64, delta: f64, variant: u8) -> Result<Vec<Op2>> {
    if !(gamma_plus >= 0.0 && gamma_plus.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma_plus must be ≥ 0, got {gamma_plus}")));
    }
    positive(delta, "delta")?;
    let gm = delta + gamma_plus;
    let (sp, sm) = (sigma_plus(), sigma_minus());
    Ok(match variant {
        1 => vec![sm * re(gm.sqrt()), sp * re(gamma_plus.sqrt())],
        2 => {
            let a = re((gamma_plus / 2.0).sqrt());
            vec![sigma_x() * a, sigma_y() * a, sm * re(delta.sqrt())]
        }
        3 => {
            let (p, m) = (sp * re(gamma_plus.sqrt()), sm * re(gm.sqrt()));
            vec![(p + m) * re(FRAC_1_SQRT_2), (p - m) * re(FRAC_1_SQRT_2)]
        }
        v => return Err(Error::InvalidParameter(format!("variant must be 1, 2 or 3, got {v}"))),
    })
}

/// Counting detection of the damping/pumping term on qubit `side` (1, 2, or
/// 3 for both). Reference rates are `Tr(J†J)/4`, or 1 for a vanishing `J`.
pub fn gammadelta(gamma_plus: f64, delta: f64, variant: u8, side: u8) -> Result<Preset> {
    let ops = gammadelta_operators(gamma_plus, delta, variant)?;
    let factors: Vec<Factor> = match side {
        1 => vec![Factor::First],
        2 => vec![Factor::Second],
        3 => vec![Factor::First, Factor::Second],
        s => return Err(Error::InvalidParameter(format!("side must be 1, 2 or 3, got {s}"))),
    };
    let mut couplings = Vec::new();
    let mut rates = Vec::new();
    for f in &factors {
        for (i, j0) in ops.iter().enumerate() {
            let j = f.embed(j0);
            let tr = (j.adjoint() * j).trace().re / 4.0;
            rates.push(if tr > 0.0 { tr } else { 1.0 });
            let q = if *f == Factor::First { 1 } else { 2 };
            couplings.push((format!("q{q}_J{}", i + 1), j));
        }
    }
    let spec = ModelSpec::new(Op4::zeros(), couplings).counting(rates);
    let params = [("gamma_plus", gamma_plus), ("delta", delta), ("variant", variant as f64), ("side", side as f64)];
    finish(PresetId::GammaDelta, &params, MonitoredModel::new(spec)?, vec![OracleId::MeanConcurrenceLocal])
}

/// The closed-form `c` contribution of a gammadelta variant on one qubit.
pub fn gammadelta_decay(gamma_plus: f64, delta: f64, variant: u8) -> f64 {
    let gm = delta + gamma_plus;
    match variant {
        1 => gamma_plus + delta / 2.0,
        2 => delta / 2.0,
        _ => 0.5 * (gm.sqrt() - gamma_plus.sqrt()).powi(2),
    }
}

/// `(|10⟩ + i|01⟩)/√2`, the initial state of the a priori death example.
pub fn psi_esd() -> StateVector {
    StateVector::new(re(0.0), re(FRAC_1_SQRT_2), c(0.0, FRAC_1_SQRT_2), re(0.0))
}

/// Named initial states: `bell0..bell3`, `u1..u4`, `psi_esd`, `maximally_mixed`.
pub fn named_state(name: &str) -> Result<TrajState> {
    let bell = bell_basis();
    Ok(match name {
        "bell0" | "bell1" | "bell2" | "bell3" => TrajState::Pure(bell[(name.as_bytes()[4] - b'0') as usize]),
        "u1" | "u2" | "u3" | "u4" => TrajState::Pure(StateVector::basis((name.as_bytes()[1] - b'1') as usize)),
        "psi_esd" => TrajState::Pure(psi_esd()),
        "maximally_mixed" => TrajState::Mixed(*DensityOperator::maximally_mixed().matrix()),
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown initial state '{other}' (expected bell0..bell3, u1..u4, psi_esd, maximally_mixed)"
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::*;
    use crate::model::local_coefficients;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_op(rng: &mut impl Rng) -> Op4 {
        Op4::from_fn(|_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn local_presets_are_non_interacting() {
        for p in [
            local_diffusive(1.0, 0.5, 0.2, 0.3).unwrap(),
            local_jump(1.0, 0.5, 0.2, 0.3).unwrap(),
            nonlocal_diffusive(1.0, 0.5, 0.2, 0.3).unwrap(),
            gammadelta(0.3, 1.0, 2, 3).unwrap(),
        ] {
            assert_eq!(p.classification, Classification::Computed(Interaction::NoInteraction));
        }
        assert_eq!(swap_witness(1.0, 1.0).unwrap().classification.interaction(), Interaction::IndirectOnly);
    }

    #[test]
    fn decay_rates_of_local_diffusive() {
        let c = |p1: f64, p2: f64| {
            local_coefficients(local_diffusive(1.0, 0.0, p1, p2).unwrap().monitored().unwrap(), 0.0)
                .unwrap()
                .total_decay()
        };
        use std::f64::consts::FRAC_PI_2;
        assert!(c(FRAC_PI_2, FRAC_PI_2) < 1e-30);
        assert!((c(0.0, FRAC_PI_2) - 1.0).abs() < 1e-15);
        assert!((c(0.0, 0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn local_jump_determinants_and_decay() {
        let (gamma, phi) = (0.8, 0.7);
        let p = local_jump(gamma, 0.0, phi, 0.0).unwrap();
        let lc = local_coefficients(p.monitored().unwrap(), 0.0).unwrap();
        let d = lc.channels[0].det;
        assert!((d - C64::from_polar(gamma / 2.0, 2.0 * phi) * -1.0).norm() < 1e-15);
        assert!(lc.total_decay().abs() < 1e-15);
        // J/√λ is unitary at the default rate.
        let ops = p.dynamics().operators(0.0);
        let u = ops.jumps[0].operator().unwrap() / re(ops.jumps[0].rate().sqrt());
        assert!(max_abs(&(u.adjoint() * u - identity4())) < 1e-15);
    }

    #[test]
    fn nonlocal_detection_operators_match_closed_form() {
        let (gamma, theta, phi) = (1.3, 0.4, -0.9);
        let p = nonlocal_diffusive(gamma, 0.0, theta, phi).unwrap();
        let ops = p.dynamics().operators(0.0);
        let pre = C64::from_polar(gamma.sqrt() / 2.0, theta);
        let (ep, em) = (C64::from_polar(1.0, phi), C64::from_polar(1.0, -phi));
        let x1 = on_first(&sigma_x());
        let x2 = on_second(&sigma_x());
        let r1 = (x1 * ep + x2 * em) * pre;
        let r2 = (x1 * ep * c(0.0, 1.0) - x2 * em * c(0.0, 1.0)) * pre;
        assert!(max_abs(&(ops.diffusive[0] - r1)) < 1e-15);
        assert!(max_abs(&(ops.diffusive[1] - r2)) < 1e-15);
    }

    #[test]
    fn all_local_presets_share_the_liouvillian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (gamma, omega0) = (0.9, 0.6);
        let presets = [
            local_diffusive(gamma, omega0, 0.1, 2.0).unwrap(),
            local_jump(gamma, omega0, 1.1, -0.4).unwrap(),
            local_jump_with_rate(gamma, omega0, 0.0, 0.0, Some(0.05)).unwrap(),
            nonlocal_diffusive(gamma, omega0, 0.3, 0.8).unwrap(),
        ];
        for _ in 0..10 {
            let tau = rand_op(&mut rng);
            let reference = presets[0].dynamics().apply_liouvillian(&tau, 0.0);
            for p in &presets[1..] {
                assert!(max_abs(&(p.dynamics().apply_liouvillian(&tau, 0.0) - reference)) < 1e-12);
            }
        }
    }

    #[test]
    fn gammadelta_variants_share_the_dissipator() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let gp = rng.random_range(0.0..2.0);
            let delta = rng.random_range(0.01..2.0);
            let gm = gp + delta;
            let tau = rand_op(&mut rng);
            let d = |j: Op4, t: &Op4| j * t * j.adjoint() - anticommutator(&(j.adjoint() * j), t) * re(0.5);
            for side in 1..=3u8 {
                let mut expected = Op4::zeros();
                for f in [Factor::First, Factor::Second] {
                    if side == 3 || (side == 1) == (f == Factor::First) {
                        expected += d(f.embed(&sigma_minus()), &tau) * re(gm) + d(f.embed(&sigma_plus()), &tau) * re(gp);
                    }
                }
                for v in 1..=3 {
                    let p = gammadelta(gp, delta, v, side).unwrap();
                    let got = p.dynamics().apply_liouvillian(&tau, 0.0);
                    assert!(max_abs(&(got - expected)) < 1e-12, "variant {v}, side {side}");
                }
            }
        }
    }

    #[test]
    fn bell_collapse_kraus_algebra() {
        let (nu, lam) = (1.7, 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [swap_witness(nu, lam).unwrap(), swap_witness_refined(nu, lam).unwrap()] {
            let ops = p.dynamics().operators(0.0);
            let total: f64 = ops.jumps.iter().map(|j| j.rate()).sum();
            assert!((total - lam).abs() < 1e-15);
            let sigma = rand_op(&mut rng);
            let sum: Op4 = ops.jumps.iter().map(|j| j.apply(&sigma)).sum();
            assert!(max_abs(&(sum - identity4() * (sigma.trace() * (nu / 4.0)))) < 1e-14);
            let l = p.dynamics().apply_liouvillian(&sigma, 0.0);
            assert!(max_abs(&(l - identity4() * (sigma.trace() * (nu / 4.0)) + sigma * re(nu))) < 1e-14);
        }
        // Physical intensity per 4-channel mark is ν/4 for every state.
        let p = swap_witness(nu, lam).unwrap();
        let rho = StateVector::new(c(0.2, 0.1), c(0.4, 0.0), c(-0.6, 0.3), c(0.1, 0.5)).normalized().unwrap().projector();
        for ch in p.dynamics().operators(0.0).jumps {
            assert!((ch.intensity(&rho) - nu / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn build_resolves_defaults_and_rejects_bad_input() {
        let p = Preset::build(PresetId::SwapWitness, &BTreeMap::new()).unwrap();
        assert_eq!(p.dynamics().operators(0.0).total_rate(), 1.0);
        let p = Preset::build(PresetId::LocalJump, &BTreeMap::from([("gamma".to_string(), 2.0)])).unwrap();
        assert_eq!(p.dynamics().operators(0.0).jumps[0].rate(), 1.0);
        assert!(Preset::build(PresetId::LocalJump, &BTreeMap::from([("gamma".to_string(), -1.0)])).is_err());
        assert!(Preset::build(PresetId::LocalJump, &BTreeMap::from([("nu".to_string(), 1.0)])).is_err());
        assert!(Preset::build(PresetId::GammaDelta, &BTreeMap::from([("variant".to_string(), 4.0)])).is_err());
        assert!(Preset::build(PresetId::GammaDelta, &BTreeMap::from([("variant".to_string(), 1.5)])).is_err());
        assert!(PresetId::parse("nope").is_err());
        for id in PresetId::ALL {
            assert_eq!(PresetId::parse(id.name()).unwrap(), id);
            Preset::build(id, &BTreeMap::new()).unwrap();
        }
    }

    #[test]
    fn named_states() {
        assert_eq!(named_state("bell1").unwrap(), TrajState::Pure(bell_basis()[1]));
        assert_eq!(named_state("u4").unwrap(), TrajState::Pure(StateVector::basis(3)));
        assert!((crate::entanglement::concurrence_pure(&psi_esd()).unwrap() - 1.0).abs() < 1e-15);
        assert!(named_state("bell4").is_err());
    }
}
