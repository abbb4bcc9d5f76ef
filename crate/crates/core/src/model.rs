//! Monitored two-qubit systems.
//!
//! A [`MonitoredModel`] carries the system operators `(H, {L_z}, S)`, the
//! coherent-field argument `v(t)`, the detection unitary `u(t)` and the split
//! of the output channels into `d` diffusive and `d′` counting channels with
//! reference rates `λ_k`. From these it derives the detection operators
//! `R_j(t)`, the drift `K(t)` and the Liouvillian driving the master
//! equation.
//!
//! Models given directly at the level of their stochastic master equation
//! (with multi-Kraus jump channels) are [`ChannelModel`]s. Both implement
//! [`Dynamics`], which is all the integrators need.

use nalgebra::DMatrix;

use crate::linalg::{
    anticommutator, commutator, hermiticity_deviation, on_first, on_second, partial_trace, pauli,
    re, Factor, Op2, Op4, C64, HERMITIAN_TOL,
};
use crate::{Error, Result};

pub const UNITARY_TOL: f64 = 1e-12;
pub const LOCALITY_TOL: f64 = 1e-10;

/// A completely positive jump map `σ ↦ Σ_i K_i σ K_i†` with its reference
/// rate `λ` under the reference measure.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    kraus: Vec<Op4>,
    rate: f64,
}

impl JumpChannel {
    pub fn new(kraus: Vec<Op4>, rate: f64) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidParameter("jump channel needs at least one Kraus operator".into()));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("reference rate must be positive, got {rate}")));
        }
        Ok(JumpChannel { kraus, rate })
    }

    pub fn single(op: Op4, rate: f64) -> Result<Self> {
        Self::new(vec![op], rate)
    }

    pub fn kraus(&self) -> &[Op4] {
        &self.kraus
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// The jump operator when the channel has a single Kraus operator.
    pub fn operator(&self) -> Option<&Op4> {
        match self.kraus.as_slice() {
            [k] => Some(k),
            _ => None,
        }
    }

    pub fn apply(&self, sigma: &Op4) -> Op4 {
        self.kraus.iter().map(|k| k * sigma * k.adjoint()).sum()
    }

    /// `Σ_i K_i† K_i`
    pub fn effect(&self) -> Op4 {
        self.kraus.iter().map(|k| k.adjoint() * k).sum()
    }

    /// `Tr 𝒥(ρ)`
    pub fn intensity(&self, rho: &Op4) -> f64 {
        (self.effect() * rho).trace().re
    }
}

/// Operators driving the stochastic equations at one instant.
#[derive(Debug, Clone)]
pub struct DerivedOperators {
    /// Effective Hamiltonian `H_0(t)`.
    pub hamiltonian: Op4,
    /// `R_1..R_d`
    pub diffusive: Vec<Op4>,
    /// Counting channels; for a [`MonitoredModel`] channel `k` holds
    /// `J_k = R_{d+k}` as its only Kraus operator.
    pub jumps: Vec<JumpChannel>,
    /// `K(t) = −iH_0 − ½ Σ_j R_j†R_j` over all channels.
    pub drift: Op4,
}

impl DerivedOperators {
    pub fn new(hamiltonian: Op4, diffusive: Vec<Op4>, jumps: Vec<JumpChannel>) -> Self {
        let mut drift = hamiltonian * C64::new(0.0, -1.0);
        for r in &diffusive {
            drift -= r.adjoint() * r * re(0.5);
        }
        for ch in &jumps {
            drift -= ch.effect() * re(0.5);
        }
        DerivedOperators { hamiltonian, diffusive, jumps, drift }
    }

    /// The Lindblad generator built from these operators:
    /// `Kτ + τK† + Σ_j R_j τ R_j† + Σ_k 𝒥_k(τ)`.
    pub fn liouvillian(&self, tau: &Op4) -> Op4 {
        let mut out = self.drift * tau + tau * self.drift.adjoint();
        for r in &self.diffusive {
            out += r * tau * r.adjoint();
        }
        for ch in &self.jumps {
            out += ch.apply(tau);
        }
        out
    }

    pub fn total_rate(&self) -> f64 {
        self.jumps.iter().map(|j| j.rate).sum()
    }
}

/// What the integrators need from a model.
pub trait Dynamics: Send + Sync {
    fn operators(&self, t: f64) -> DerivedOperators;

    fn apply_liouvillian(&self, tau: &Op4, t: f64) -> Op4;

    /// Times after 0 where the operators change; empty for constant models.
    fn breakpoints(&self) -> Vec<f64>;

    fn n_diffusive(&self) -> usize;

    fn n_jump(&self) -> usize;
}

/// Index of the constant piece containing `t`, given sorted breakpoints.
pub fn segment_index(breakpoints: &[f64], t: f64) -> usize {
    breakpoints.partition_point(|&b| b <= t + 1e-12)
}

fn at_time<T>(table: &[(f64, T)], t: f64) -> &T {
    let i = table.partition_point(|(b, _)| *b <= t + 1e-12);
    &table[i.saturating_sub(1)].1
}

/// Raw description of a monitored model; validated by [`MonitoredModel::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub hamiltonian: Op4,
    pub labels: Vec<String>,
    pub couplings: Vec<Op4>,
    /// Blocks `S_zw`; `None` is the identity.
    pub scattering: Option<Vec<Vec<Op4>>>,
    /// Breakpoint table `(t, v(t))`, piecewise constant, first entry at 0.
    pub field: Vec<(f64, Vec<C64>)>,
    /// Breakpoint table `(t, u(t))`.
    pub detection: Vec<(f64, DMatrix<C64>)>,
    pub n_diffusive: usize,
    /// `λ_k` for the counting channels `d+1..d+d′`.
    pub reference_rates: Vec<f64>,
}

impl ModelSpec {
    /// `S = 1`, `v = 0`, `u = 1`, all channels diffusive.
    pub fn new(hamiltonian: Op4, couplings: Vec<(String, Op4)>) -> Self {
        let n = couplings.len();
        let (labels, couplings) = couplings.into_iter().unzip();
        ModelSpec {
            hamiltonian,
            labels,
            couplings,
            scattering: None,
            field: vec![(0.0, vec![C64::new(0.0, 0.0); n])],
            detection: vec![(0.0, DMatrix::identity(n, n))],
            n_diffusive: n,
            reference_rates: Vec::new(),
        }
    }

    pub fn with_detection(mut self, u: DMatrix<C64>) -> Self {
        self.detection = vec![(0.0, u)];
        self
    }

    pub fn with_field(mut self, v: Vec<C64>) -> Self {
        self.field = vec![(0.0, v)];
        self
    }

    /// Makes the last `rates.len()` channels counting channels.
    pub fn counting(mut self, rates: Vec<f64>) -> Self {
        self.n_diffusive = self.labels.len().saturating_sub(rates.len());
        self.reference_rates = rates;
        self
    }
}

fn unitarity_deviation(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - DMatrix::<C64>::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitoredModel {
    spec: ModelSpec,
}

impl MonitoredModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let n = spec.labels.len();
        if n == 0 {
            return Err(Error::InvalidParameter("model needs at least one channel".into()));
        }
        if spec.couplings.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} coupling operators"),
                got: spec.couplings.len().to_string(),
            });
        }
        let dev = hermiticity_deviation(&spec.hamiltonian);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { what: "Hamiltonian".into(), deviation: dev });
        }
        if spec.n_diffusive > n || spec.n_diffusive + spec.reference_rates.len() != n {
            return Err(Error::InvalidParameter(format!(
                "d = {} and d' = {} must add up to {n} channels",
                spec.n_diffusive,
                spec.reference_rates.len()
            )));
        }
        if let Some(bad) = spec.reference_rates.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter(format!("reference rate must be positive, got {bad}")));
        }
        if let Some(blocks) = &spec.scattering {
            if blocks.len() != n || blocks.iter().any(|row| row.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{n}×{n} scattering blocks"),
                    got: format!("{} rows", blocks.len()),
                });
            }
            let big = assemble_blocks(blocks);
            let dev = unitarity_deviation(&big);
            if dev > UNITARY_TOL {
                return Err(Error::NotUnitary { what: "scattering matrix S".into(), deviation: dev });
            }
        }
        check_table(&spec.field, "field v")?;
        check_table(&spec.detection, "detection u")?;
        for (t, v) in &spec.field {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: format!("{n} field components at t = {t}"),
                    got: v.len().to_string(),
                });
            }
        }
        for (t, u) in &spec.detection {
            if u.nrows() != n || u.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: format!("{n}×{n} detection matrix at t = {t}"),
                    got: format!("{}×{}", u.nrows(), u.ncols()),
                });
            }
            let dev = unitarity_deviation(u);
            if dev > UNITARY_TOL {
                return Err(Error::NotUnitary { what: format!("detection matrix u at t = {t}"), deviation: dev });
            }
        }
        Ok(MonitoredModel { spec })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n_channels(&self) -> usize {
        self.spec.labels.len()
    }

    pub fn field_at(&self, t: f64) -> &[C64] {
        at_time(&self.spec.field, t)
    }

    pub fn detection_at(&self, t: f64) -> &DMatrix<C64> {
        at_time(&self.spec.detection, t)
    }

    pub fn scattering_is_identity(&self) -> bool {
        match &self.spec.scattering {
            None => true,
            Some(blocks) => {
                let n = blocks.len();
                let big = assemble_blocks(blocks);
                (big - DMatrix::<C64>::identity(4 * n, 4 * n)).iter().all(|z| z.norm() <= UNITARY_TOL)
            }
        }
    }

    fn s_block(&self, z: usize, w: usize) -> Op4 {
        match &self.spec.scattering {
            Some(b) => b[z][w],
            None if z == w => Op4::identity(),
            None => Op4::zeros(),
        }
    }

    /// `R_j(t) = Σ_z u_jz(t)(L_z + Σ_w S_zw v_w(t))`, `H_0(t)` and `K(t)`.
    pub fn detection_operators(&self, t: f64) -> DerivedOperators {
        let n = self.n_channels();
        let v = self.field_at(t);
        let u = self.detection_at(t);
        let shifted: Vec<Op4> = (0..n)
            .map(|z| {
                let mut a = self.spec.couplings[z];
                for (w, vw) in v.iter().enumerate() {
                    a += self.s_block(z, w) * *vw;
                }
                a
            })
            .collect();
        let r: Vec<Op4> = (0..n)
            .map(|j| (0..n).map(|z| shifted[z] * u[(j, z)]).sum())
            .collect();

        let mut h0 = self.spec.hamiltonian;
        let half_i = C64::new(0.0, 0.5);
        for z in 0..n {
            for w in 0..n {
                let s_wz = self.s_block(w, z);
                let l_w = &self.spec.couplings[w];
                h0 += (s_wz.adjoint() * l_w * v[z].conj() - l_w.adjoint() * s_wz * v[z]) * half_i;
            }
        }

        let d = self.spec.n_diffusive;
        let jumps = r[d..]
            .iter()
            .zip(&self.spec.reference_rates)
            .map(|(j, &lam)| JumpChannel { kraus: vec![*j], rate: lam })
            .collect();
        DerivedOperators::new(h0, r[..d].to_vec(), jumps)
    }

    /// Lindblad generator with `L̃_z = L_z + Σ_w (S_zw − δ_zw) v_w` and the
    /// field-shifted Hamiltonian `H(t)`.
    pub fn liouvillian(&self, tau: &Op4, t: f64) -> Op4 {
        let n = self.n_channels();
        let v = self.field_at(t);
        let eye = Op4::identity();
        let delta = |z: usize, w: usize| if z == w { eye } else { Op4::zeros() };

        let mut h = self.spec.hamiltonian;
        let mut extra = Op4::zeros();
        for z in 0..n {
            for w in 0..n {
                let l_w = &self.spec.couplings[w];
                extra += (self.s_block(w, z).adjoint() + delta(z, w)) * l_w * v[z].conj();
                extra += self.s_block(z, w) * (v[z].conj() * v[w]);
            }
        }
        h += (extra - extra.adjoint()) * C64::new(0.0, 0.5);

        let mut out = commutator(&h, tau) * C64::new(0.0, -1.0);
        for z in 0..n {
            let mut lt = self.spec.couplings[z];
            for (w, vw) in v.iter().enumerate() {
                lt += (self.s_block(z, w) - delta(z, w)) * *vw;
            }
            let ldl = lt.adjoint() * lt;
            out += lt * tau * lt.adjoint() - anticommutator(&ldl, tau) * re(0.5);
        }
        out
    }
}

fn check_table<T>(table: &[(f64, T)], what: &str) -> Result<()> {
    match table.first() {
        Some((t0, _)) if *t0 == 0.0 => {}
        _ => return Err(Error::InvalidParameter(format!("{what} table must start at t = 0"))),
    }
    if table.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidParameter(format!("{what} breakpoints must increase")));
    }
    Ok(())
}

fn assemble_blocks(blocks: &[Vec<Op4>]) -> DMatrix<C64> {
    let n = blocks.len();
    let mut big = DMatrix::<C64>::zeros(4 * n, 4 * n);
    for (z, row) in blocks.iter().enumerate() {
        for (w, b) in row.iter().enumerate() {
            big.view_mut((4 * z, 4 * w), (4, 4)).copy_from(b);
        }
    }
    big
}

impl Dynamics for MonitoredModel {
    fn operators(&self, t: f64) -> DerivedOperators {
        self.detection_operators(t)
    }

    fn apply_liouvillian(&self, tau: &Op4, t: f64) -> Op4 {
        self.liouvillian(tau, t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .spec
            .field
            .iter()
            .map(|p| p.0)
            .chain(self.spec.detection.iter().map(|p| p.0))
            .filter(|&t| t > 0.0)
            .collect();
        b.sort_by(|x, y| x.total_cmp(y));
        b.dedup();
        b
    }

    fn n_diffusive(&self) -> usize {
        self.spec.n_diffusive
    }

    fn n_jump(&self) -> usize {
        self.spec.reference_rates.len()
    }
}

/// A model given directly by its effective Hamiltonian, diffusive detection
/// operators and (possibly multi-Kraus) jump channels. Constant in time.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    operators: DerivedOperators,
}

impl ChannelModel {
    pub fn new(hamiltonian: Op4, diffusive: Vec<Op4>, jumps: Vec<JumpChannel>) -> Result<Self> {
        let dev = hermiticity_deviation(&hamiltonian);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { what: "Hamiltonian".into(), deviation: dev });
        }
        Ok(ChannelModel { operators: DerivedOperators::new(hamiltonian, diffusive, jumps) })
    }

    pub fn derived(&self) -> &DerivedOperators {
        &self.operators
    }
}

impl Dynamics for ChannelModel {
    fn operators(&self, _t: f64) -> DerivedOperators {
        self.operators.clone()
    }

    fn apply_liouvillian(&self, tau: &Op4, _t: f64) -> Op4 {
        self.operators.liouvillian(tau)
    }

    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn n_diffusive(&self) -> usize {
        self.operators.diffusive.len()
    }

    fn n_jump(&self) -> usize {
        self.operators.jumps.len()
    }
}

/// `a = Σ_i h_i σ_i + r·1`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliDecomposition {
    pub h: [C64; 3],
    pub r: C64,
}

impl PauliDecomposition {
    pub fn reconstruct(&self) -> Op2 {
        let mut out = Op2::identity() * self.r;
        for i in 0..3 {
            out += pauli(i + 1) * self.h[i];
        }
        out
    }
}

pub fn pauli_decompose(a: &Op2) -> PauliDecomposition {
    let h = [1, 2, 3].map(|i| (pauli(i) * a).trace() * 0.5);
    PauliDecomposition { h, r: a.trace() * 0.5 }
}

/// How a 4×4 operator sits relative to the tensor structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Locality {
    /// Multiple of the identity (local on both factors).
    Scalar,
    /// `A ⊗ 1`
    First,
    /// `1 ⊗ A`
    Second,
    /// `A ⊗ 1 + 1 ⊗ B` but neither alone.
    SumOfLocals,
    NonLocal,
}

impl Locality {
    pub fn is_local(self) -> bool {
        matches!(self, Locality::Scalar | Locality::First | Locality::Second)
    }
}

pub fn locality(a: &Op4) -> Locality {
    let tr = a.trace() * 0.25;
    let scalar = Op4::identity() * tr;
    let first = on_first(&(partial_trace(a, Factor::First) * re(0.5)));
    let second = on_second(&(partial_trace(a, Factor::Second) * re(0.5)));
    let off = |b: &Op4| (a - b).norm();
    if off(&scalar) <= LOCALITY_TOL {
        Locality::Scalar
    } else if off(&first) <= LOCALITY_TOL {
        Locality::First
    } else if off(&second) <= LOCALITY_TOL {
        Locality::Second
    } else if off(&(first + second - scalar)) <= LOCALITY_TOL {
        Locality::SumOfLocals
    } else {
        Locality::NonLocal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interaction {
    Direct,
    IndirectOnly,
    NoInteraction,
}

impl Interaction {
    pub fn as_str(self) -> &'static str {
        match self {
            Interaction::Direct => "direct",
            Interaction::IndirectOnly => "indirect-only",
            Interaction::NoInteraction => "none",
        }
    }
}

/// Interaction structure of a model with `S = 1`.
pub fn classify_interaction(m: &MonitoredModel) -> Result<Interaction> {
    if !m.scattering_is_identity() {
        return Err(Error::Unsupported(
            "interaction classification is only implemented for S = 1".into(),
        ));
    }
    if locality(&m.spec.hamiltonian) == Locality::NonLocal {
        return Ok(Interaction::Direct);
    }
    let mut all_local = true;
    for l in &m.spec.couplings {
        match locality(l) {
            Locality::NonLocal => return Ok(Interaction::Direct),
            Locality::SumOfLocals => all_local = false,
            _ => {}
        }
    }
    Ok(if all_local { Interaction::NoInteraction } else { Interaction::IndirectOnly })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Diffusive,
    Counting,
}

/// Coefficients of one local detection channel `R_j = R_j^0 ⊗ 1` (or `1 ⊗ R_j^0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelCoefficients {
    pub kind: ChannelKind,
    pub factor: Factor,
    /// `h̃_j1..3` in `R_j^0 = Σ h̃_ji σ_i + ℓ_j/2`.
    pub h: [C64; 3],
    /// `ℓ_j = Tr R_j^0`
    pub ell: C64,
    /// `ℓ_j²/4 − Σ_i h̃_ji²`, equal to `det R_j^0`.
    pub det: C64,
    /// Contribution `c_j ≥ 0` to the decay rate of the mean concurrence.
    pub decay: f64,
    /// Reference rate for counting channels.
    pub rate: Option<f64>,
}

impl ChannelCoefficients {
    /// The single-qubit operator `R_j^0`.
    pub fn reduced(&self) -> Op2 {
        PauliDecomposition { h: self.h, r: self.ell * 0.5 }.reconstruct()
    }

    /// `R_j` embedded back on its factor.
    pub fn embedded(&self) -> Op4 {
        self.factor.embed(&self.reduced())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalCoefficients {
    pub channels: Vec<ChannelCoefficients>,
}

impl LocalCoefficients {
    /// `c = Σ_j c_j`
    pub fn total_decay(&self) -> f64 {
        self.channels.iter().map(|c| c.decay).sum()
    }
}

fn channel_coefficients(op: &Op4, index: usize, kind: ChannelKind, rate: Option<f64>) -> Result<ChannelCoefficients> {
    let factor = match locality(op) {
        Locality::Scalar | Locality::First => Factor::First,
        Locality::Second => Factor::Second,
        _ => return Err(Error::NonLocalDetection { channel: index }),
    };
    let reduced = partial_trace(op, factor) * re(0.5);
    let pd = pauli_decompose(&reduced);
    let ell = pd.r * 2.0;
    let det = ell * ell * 0.25 - pd.h.iter().map(|h| h * h).sum::<C64>();
    let decay = match kind {
        ChannelKind::Diffusive => 2.0 * pd.h.iter().map(|h| h.re * h.re).sum::<f64>(),
        ChannelKind::Counting => {
            (ell.norm_sqr() / 4.0 - det.norm() + pd.h.iter().map(|h| h.norm_sqr()).sum::<f64>()).max(0.0)
        }
    };
    Ok(ChannelCoefficients { kind, factor, h: pd.h, ell, det, decay, rate })
}

/// `h̃_ji`, `ℓ_j`, `d_k` and `c_j` for operators whose detection channels are
/// all local. Counting channels must have a single Kraus operator.
pub fn local_coefficients_of(ops: &DerivedOperators) -> Result<LocalCoefficients> {
    let mut channels = Vec::with_capacity(ops.diffusive.len() + ops.jumps.len());
    for (j, r) in ops.diffusive.iter().enumerate() {
        channels.push(channel_coefficients(r, j, ChannelKind::Diffusive, None)?);
    }
    let d = ops.diffusive.len();
    for (k, ch) in ops.jumps.iter().enumerate() {
        let op = ch.operator().ok_or_else(|| {
            Error::Unsupported("local coefficients need single-Kraus jump channels".into())
        })?;
        channels.push(channel_coefficients(op, d + k, ChannelKind::Counting, Some(ch.rate))?);
    }
    Ok(LocalCoefficients { channels })
}

pub fn local_coefficients(m: &MonitoredModel, t: f64) -> Result<LocalCoefficients> {
    local_coefficients_of(&m.detection_operators(t))
}
