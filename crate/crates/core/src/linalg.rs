//! Two-qubit linear algebra.
//!
//! Every 4×4 matrix and 4-vector is expressed in the canonical basis
//! `u1 = |11⟩, u2 = |10⟩, u3 = |01⟩, u4 = |00⟩` (indices 0..4). Single-qubit
//! matrices use the ordering `(|1⟩, |0⟩)`, so with `|1⟩` the up state the
//! Pauli matrices take their textbook form and `kron(a, b)` lands on the
//! canonical basis with `a` acting on the leftmost qubit.

use std::ops::Deref;

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type Op2 = Matrix2<C64>;
pub type Op4 = Matrix4<C64>;
pub type Ket = Vector4<C64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity2() -> Op2 {
    Op2::identity()
}

pub fn identity4() -> Op4 {
    Op4::identity()
}

pub fn sigma_x() -> Op2 {
    Op2::new(re(0.0), re(1.0), re(1.0), re(0.0))
}

pub fn sigma_y() -> Op2 {
    Op2::new(re(0.0), c(0.0, -1.0), c(0.0, 1.0), re(0.0))
}

pub fn sigma_z() -> Op2 {
    Op2::new(re(1.0), re(0.0), re(0.0), re(-1.0))
}

/// `σ₊ = (σx + iσy)/2`, mapping `|0⟩` to `|1⟩`.
pub fn sigma_plus() -> Op2 {
    Op2::new(re(0.0), re(1.0), re(0.0), re(0.0))
}

/// `σ₋ = (σx − iσy)/2`.
pub fn sigma_minus() -> Op2 {
    Op2::new(re(0.0), re(0.0), re(1.0), re(0.0))
}

/// Pauli matrix `σ_i` for `i ∈ {1, 2, 3}`; `i = 0` gives the identity.
pub fn pauli(i: usize) -> Op2 {
    match i {
        0 => identity2(),
        1 => sigma_x(),
        2 => sigma_y(),
        3 => sigma_z(),
        _ => panic!("Pauli index {i} out of range"),
    }
}

/// Kronecker product `a ⊗ b`, first factor on the leftmost qubit.
pub fn tensor(a: &Op2, b: &Op2) -> Op4 {
    a.kronecker(b)
}

/// `a ⊗ 1`
pub fn on_first(a: &Op2) -> Op4 {
    tensor(a, &identity2())
}

/// `1 ⊗ a`
pub fn on_second(a: &Op2) -> Op4 {
    tensor(&identity2(), a)
}

/// `σy ⊗ σy`, the spin-flip matrix entering every concurrence formula.
pub fn spin_flip() -> Op4 {
    tensor(&sigma_y(), &sigma_y())
}

/// One of the two tensor factors of `C² ⊗ C²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Factor {
    First,
    Second,
}

impl Factor {
    pub fn other(self) -> Factor {
        match self {
            Factor::First => Factor::Second,
            Factor::Second => Factor::First,
        }
    }

    /// Embeds a single-qubit operator on this factor.
    pub fn embed(self, a: &Op2) -> Op4 {
        match self {
            Factor::First => on_first(a),
            Factor::Second => on_second(a),
        }
    }
}

/// Reduced 2×2 matrix on the factor `keep`, tracing out the other one.
pub fn partial_trace(rho: &Op4, keep: Factor) -> Op2 {
    let mut out = Op2::zeros();
    for a in 0..2 {
        for b in 0..2 {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..2 {
                acc += match keep {
                    Factor::First => rho[(2 * a + k, 2 * b + k)],
                    Factor::Second => rho[(2 * k + a, 2 * k + b)],
                };
            }
            out[(a, b)] = acc;
        }
    }
    out
}

pub fn det2(a: &Op2) -> C64 {
    a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]
}

pub fn commutator(a: &Op4, b: &Op4) -> Op4 {
    a * b - b * a
}

pub fn anticommutator(a: &Op4, b: &Op4) -> Op4 {
    a * b + b * a
}

/// Largest entry modulus of `a − a†`.
pub fn hermiticity_deviation(a: &Op4) -> f64 {
    (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry modulus of a matrix.
pub fn max_abs(a: &Op4) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian 4×4 matrix, ascending.
pub fn hermitian_eigenvalues(a: &Op4) -> [f64; 4] {
    let h = (a + a.adjoint()) * re(0.5);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    [ev[0], ev[1], ev[2], ev[3]]
}

/// `½‖a − b‖₁` for Hermitian `a`, `b`.
pub fn trace_distance(a: &Op4, b: &Op4) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
}

fn one_norm(a: &Op4) -> f64 {
    (0..4)
        .map(|j| (0..4).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn squarings_for(norm: f64) -> i32 {
    if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    }
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &Op4) -> Op4 {
    let s = squarings_for(one_norm(a));
    let scaled = a * re(0.5f64.powi(s));
    let mut term = Op4::identity();
    let mut sum = Op4::identity();
    for k in 1..40 {
        term = &scaled * term * re(1.0 / k as f64);
        sum += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(a)·v` without forming the exponential; cheap for small `‖a‖`.
pub fn expm_apply(a: &Op4, v: &Ket) -> Ket {
    let s = squarings_for(one_norm(a));
    let scaled = a * re(0.5f64.powi(s));
    let mut out = *v;
    for _ in 0..(1usize << s) {
        let mut term = out;
        let mut sum = out;
        let scale = out.norm().max(f64::MIN_POSITIVE);
        for k in 1..40 {
            term = &scaled * term * re(1.0 / k as f64);
            sum += &term;
            if term.norm() < 1e-18 * scale {
                break;
            }
        }
        out = sum;
    }
    out
}

/// A (not necessarily normalized) two-qubit vector, components in the
/// canonical order `(φ11, φ10, φ01, φ00)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub Ket);

impl StateVector {
    pub fn new(phi11: C64, phi10: C64, phi01: C64, phi00: C64) -> Self {
        StateVector(Ket::new(phi11, phi10, phi01, phi00))
    }

    /// Canonical basis vector `u_{index+1}`.
    pub fn basis(index: usize) -> Self {
        let mut v = Ket::zeros();
        v[index] = re(1.0);
        StateVector(v)
    }

    /// `u ⊗ w` for single-qubit vectors in the `(|1⟩, |0⟩)` ordering.
    pub fn product(u: [C64; 2], w: [C64; 2]) -> Self {
        StateVector::new(u[0] * w[0], u[0] * w[1], u[1] * w[0], u[1] * w[1])
    }

    pub fn ket(&self) -> &Ket {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.0.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(StateVector(self.0 / re(n)))
    }

    /// Complex conjugation of the canonical-basis coefficients.
    pub fn t_conjugate(&self) -> Self {
        StateVector(self.0.map(|z| z.conj()))
    }

    pub fn apply(&self, op: &Op4) -> Self {
        StateVector(op * self.0)
    }

    pub fn scale(&self, z: C64) -> Self {
        StateVector(self.0 * z)
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn projector(&self) -> Op4 {
        self.0 * self.0.adjoint()
    }
}

/// The Bell vectors `β0 = (|00⟩+|11⟩)/√2`, `β_i = (σ_i ⊗ 1) β0`.
pub fn bell_basis() -> [StateVector; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let b0 = StateVector::new(re(h), re(0.0), re(0.0), re(h));
    [
        b0,
        b0.apply(&on_first(&sigma_x())),
        b0.apply(&on_first(&sigma_y())),
        b0.apply(&on_first(&sigma_z())),
    ]
}

/// A two-qubit density operator. `normalized` is false for the
/// unnormalized a posteriori state `σ(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityOperator {
    matrix: Op4,
    normalized: bool,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: Op4) -> Result<Self> {
        let rho = Self::unnormalized(matrix)?;
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::NotNormalized { trace: tr.re });
        }
        Ok(DensityOperator { normalized: true, ..rho })
    }

    /// Validates Hermiticity and positivity only.
    pub fn unnormalized(matrix: Op4) -> Result<Self> {
        let dev = hermiticity_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { what: "density operator".into(), deviation: dev });
        }
        let min = hermitian_eigenvalues(&matrix)[0];
        if min < -POSITIVITY_TOL {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        Ok(DensityOperator { matrix, normalized: false })
    }

    pub fn pure(psi: &StateVector) -> Result<Self> {
        let psi = psi.normalized()?;
        Ok(DensityOperator { matrix: psi.projector(), normalized: true })
    }

    pub fn maximally_mixed() -> Self {
        DensityOperator { matrix: identity4() * re(0.25), normalized: true }
    }

    pub fn matrix(&self) -> &Op4 {
        &self.matrix
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (self.matrix * self.matrix).trace().re
    }
}

impl Deref for DensityOperator {
    type Target = Op4;

    fn deref(&self) -> &Op4 {
        &self.matrix
    }
}
