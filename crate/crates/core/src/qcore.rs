//! Exact single-qubit linear algebra.
//!
//! States are 2×2 density matrices, evolution is by real rotation gates,
//! and measurement is projective in the computational basis with Lüders
//! collapse. Every [`QubitState`] is validated on construction, so holding
//! one means holding a physical state.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;

/// Tolerance used by every state invariant check.
pub const STATE_TOL: f64 = 1e-12;

/// Branches with a Born probability below this are reported as impossible.
pub const ZERO_PROBABILITY: f64 = 1e-15;

const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity() -> Mat2 {
    Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))
}

pub fn pauli_x() -> Mat2 {
    Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}

pub fn pauli_y() -> Mat2 {
    Mat2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
}

pub fn pauli_z() -> Mat2 {
    Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
}

/// `Rz(λ) = diag(e^{-iλ/2}, e^{iλ/2})`.
pub fn rz(lambda: f64) -> Mat2 {
    Mat2::new(
        C64::from_polar(1.0, -lambda / 2.0),
        c(0.0, 0.0),
        c(0.0, 0.0),
        C64::from_polar(1.0, lambda / 2.0),
    )
}

/// Square root of X: `½[[1+i, 1−i], [1−i, 1+i]]`.
pub fn sx() -> Mat2 {
    Mat2::new(c(0.5, 0.5), c(0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5))
}

/// A qubit density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BlochVector", into = "BlochVector")]
pub struct QubitState {
    rho: Mat2,
}

/// Bloch-vector form `(n_x, n_y, n_z)` of a state, `ρ = ½(𝟙 + n·σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }
}

impl TryFrom<BlochVector> for QubitState {
    type Error = Error;

    fn try_from(n: BlochVector) -> Result<Self> {
        QubitState::from_bloch(n.x, n.y, n.z)
    }
}

impl From<QubitState> for BlochVector {
    fn from(s: QubitState) -> Self {
        s.bloch()
    }
}

impl QubitState {
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = BlochVector::new(x, y, z);
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::Validation("bloch vector must be finite".into()));
        }
        if n.norm_sqr() > 1.0 + STATE_TOL {
            return Err(Error::Validation(format!(
                "bloch norm: |n|² = {} exceeds 1",
                n.norm_sqr()
            )));
        }
        let half = c(0.5, 0.0);
        let rho = (identity() + pauli_x() * c(x, 0.0) + pauli_y() * c(y, 0.0) + pauli_z() * c(z, 0.0))
            * half;
        Ok(Self { rho })
    }

    /// Validates all density-matrix invariants.
    pub fn from_matrix(rho: Mat2) -> Result<Self> {
        let state = Self { rho };
        state.validate()?;
        Ok(state)
    }

    /// For channel outputs that are physical by construction; checked in
    /// debug builds only.
    pub(crate) fn from_matrix_unchecked(rho: Mat2) -> Self {
        let state = Self { rho };
        debug_assert!(state.validate().is_ok(), "{:?}", state.validate());
        state
    }

    /// `|0⟩⟨0|`, the `+1` eigenstate of the measured observable.
    pub fn ket0() -> Self {
        Self::from_bloch(0.0, 0.0, 1.0).expect("valid")
    }

    pub fn ket1() -> Self {
        Self::from_bloch(0.0, 0.0, -1.0).expect("valid")
    }

    /// The protocol's pure initial state, `n = (0, 1, 0)`, i.e. `(|0⟩ + i|1⟩)/√2`.
    pub fn protocol_pure() -> Self {
        Self::from_bloch(0.0, 1.0, 0.0).expect("valid")
    }

    /// `(|0⟩ − i|1⟩)/√2`, i.e. `n = (0, −1, 0)`.
    ///
    /// Under real rotations and computational-basis measurement this state
    /// produces exactly the same statistics as [`QubitState::protocol_pure`].
    pub fn protocol_pure_conjugate() -> Self {
        Self::from_bloch(0.0, -1.0, 0.0).expect("valid")
    }

    /// `𝟙/2`, the equal mixture of `|0⟩` and `|1⟩`.
    pub fn maximally_mixed() -> Self {
        Self::from_bloch(0.0, 0.0, 0.0).expect("valid")
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.rho
    }

    pub fn bloch(&self) -> BlochVector {
        let r = &self.rho;
        BlochVector {
            x: 2.0 * r[(0, 1)].re,
            y: -2.0 * r[(0, 1)].im,
            z: (r[(0, 0)] - r[(1, 1)]).re,
        }
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.rho[(0, 0)].re;
        let d = self.rho[(1, 1)].re;
        let b = self.rho[(0, 1)];
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - rad, mean + rad]
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rho;
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            if !(r[(i, j)].re.is_finite() && r[(i, j)].im.is_finite()) {
                return Err(Error::Validation("density matrix has non-finite entries".into()));
            }
            if (r[(i, j)] - r[(j, i)].conj()).norm() > STATE_TOL {
                return Err(Error::Validation(format!(
                    "hermitian: ρ[{i}{j}] != conj(ρ[{j}{i}])"
                )));
            }
        }
        let tr = self.trace();
        if (tr - c(1.0, 0.0)).norm() > STATE_TOL {
            return Err(Error::Validation(format!("unit trace: Tr ρ = {tr}")));
        }
        let [lo, _] = self.eigenvalues();
        if lo < -STATE_TOL {
            return Err(Error::Validation(format!(
                "positive semidefinite: smallest eigenvalue {lo}"
            )));
        }
        if self.bloch().norm_sqr() > 1.0 + STATE_TOL {
            return Err(Error::Validation("bloch norm exceeds 1".into()));
        }
        Ok(())
    }

    /// Born probability `Tr[P_a ρ]` of an outcome.
    pub fn probability(&self, outcome: Outcome) -> f64 {
        let i = outcome.index();
        self.rho[(i, i)].re.clamp(0.0, 1.0)
    }

    /// Largest elementwise distance to another state.
    pub fn max_abs_diff(&self, other: &QubitState) -> f64 {
        (self.rho - other.rho).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Dichotomic measurement outcome `a ∈ {+1, −1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const ALL: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    /// Basis index: `|0⟩` for `+1`, `|1⟩` for `−1`. Also the emitted bit.
    pub fn index(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

/// Computational-basis projector `P₊ = diag(1,0)` or `P₋ = diag(0,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Projector {
    pub outcome: Outcome,
}

impl Projector {
    pub fn new(outcome: Outcome) -> Self {
        Self { outcome }
    }

    pub fn matrix(&self) -> Mat2 {
        let mut m = Mat2::zeros();
        let i = self.outcome.index();
        m[(i, i)] = c(1.0, 0.0);
        m
    }
}

/// Real rotation `U(θ) = [[cos θ, sin θ], [−sin θ, cos θ]]`, θ in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationGate {
    pub theta: f64,
}

impl RotationGate {
    pub fn new(theta: f64) -> Self {
        Self { theta }
    }

    pub fn matrix(&self) -> Mat2 {
        let (s, co) = self.theta.sin_cos();
        Mat2::new(c(co, 0.0), c(s, 0.0), c(-s, 0.0), c(co, 0.0))
    }
}

/// `ρ → UρU†`.
pub fn apply_unitary(state: &QubitState, gate: &RotationGate) -> QubitState {
    apply_matrix(state, &gate.matrix())
}

/// `ρ → UρU†` for an arbitrary unitary `U`.
pub fn apply_matrix(state: &QubitState, u: &Mat2) -> QubitState {
    QubitState::from_matrix_unchecked(u * state.rho * u.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementBranch {
    pub outcome: Outcome,
    pub probability: f64,
    /// `P_a ρ P_a / p_a`; `None` when the branch cannot occur.
    pub post_state: Option<QubitState>,
}

/// Projective computational-basis measurement, one branch per outcome.
pub fn measure(state: &QubitState) -> [MeasurementBranch; 2] {
    Outcome::ALL.map(|outcome| {
        let p = state.probability(outcome);
        if p < ZERO_PROBABILITY {
            MeasurementBranch {
                outcome,
                probability: 0.0,
                post_state: None,
            }
        } else {
            let proj = Projector::new(outcome).matrix();
            let collapsed = proj * state.rho * proj / c(p, 0.0);
            MeasurementBranch {
                outcome,
                probability: p,
                post_state: Some(QubitState::from_matrix_unchecked(collapsed)),
            }
        }
    })
}

/// Non-selective measurement: `Σ_a P_a ρ P_a`.
pub fn dephase(state: &QubitState) -> QubitState {
    let mut m = state.rho;
    m[(0, 1)] = c(0.0, 0.0);
    m[(1, 0)] = c(0.0, 0.0);
    QubitState::from_matrix_unchecked(m)
}

/// `U = e^{i·global_phase} · Rz(λ₃)·SX·Rz(λ₂)·SX·Rz(λ₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZxzxzDecomposition {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub global_phase: f64,
}

impl ZxzxzDecomposition {
    /// The five-gate product without the global phase.
    pub fn sequence_matrix(&self) -> Mat2 {
        rz(self.lambda3) * sx() * rz(self.lambda2) * sx() * rz(self.lambda1)
    }

    pub fn reconstruct(&self) -> Mat2 {
        self.sequence_matrix() * C64::from_polar(1.0, self.global_phase)
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Decomposes any single-qubit unitary into virtual Z rotations and two SX pulses.
///
/// The unitary is first written in `U3(θ, φ, λ)` form, then mapped through
/// `U3(θ, φ, λ) ∝ Rz(φ+π)·SX·Rz(θ+π)·SX·Rz(λ)`. The global phase is recovered
/// from `Tr(R†U)`, which never vanishes because `R` and `U` differ only by
/// a phase.
pub fn decompose_unitary(u: &Mat2) -> ZxzxzDecomposition {
    const EPS: f64 = 1e-14;
    let cos_half = u[(0, 0)].norm();
    let sin_half = u[(1, 0)].norm();
    let theta = 2.0 * sin_half.atan2(cos_half);
    let (phi, lambda) = if cos_half < EPS {
        // Only φ − λ is defined.
        let alpha = (-u[(0, 1)]).arg();
        (u[(1, 0)].arg() - alpha, 0.0)
    } else if sin_half < EPS {
        // Only φ + λ is defined.
        let alpha = u[(0, 0)].arg();
        (u[(1, 1)].arg() - alpha, 0.0)
    } else {
        let alpha = u[(0, 0)].arg();
        (u[(1, 0)].arg() - alpha, (-u[(0, 1)]).arg() - alpha)
    };
    let mut d = ZxzxzDecomposition {
        lambda1: wrap_angle(lambda),
        lambda2: wrap_angle(theta + PI),
        lambda3: wrap_angle(phi + PI),
        global_phase: 0.0,
    };
    let r = d.sequence_matrix();
    d.global_phase = (r.adjoint() * u).trace().arg();
    d
}

pub fn decompose_zxzxz(gate: &RotationGate) -> ZxzxzDecomposition {
    decompose_unitary(&gate.matrix())
}

/// Largest entrywise modulus of `a − b`.
pub fn max_abs_diff(a: &Mat2, b: &Mat2) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn assert_valid(s: &QubitState) {
        s.validate().unwrap();
    }

    #[test]
    fn identity_rotation_leaves_state() {
        let s = QubitState::protocol_pure();
        let out = apply_unitary(&s, &RotationGate::new(0.0));
        assert!(out.max_abs_diff(&s) < 1e-15);
    }

    #[test]
    fn quarter_turn_maps_ket0_to_ket1() {
        let out = apply_unitary(&QubitState::ket0(), &RotationGate::new(FRAC_PI_2));
        assert!(out.max_abs_diff(&QubitState::ket1()) < 1e-15);
    }

    #[test]
    fn conjugate_state_matches_named_ket() {
        // (|0⟩ − i|1⟩)/√2 written as a density matrix.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [c(s, 0.0), c(0.0, -s)];
        let rho = Mat2::from_fn(|i, j| psi[i] * psi[j].conj());
        let named = QubitState::from_matrix(rho).unwrap();
        assert!(named.max_abs_diff(&QubitState::protocol_pure_conjugate()) < 1e-15);
        assert!(named.max_abs_diff(&QubitState::protocol_pure()) > 0.5);
    }

    #[test]
    fn measurement_probabilities() {
        let eq = measure(&QubitState::protocol_pure_conjugate());
        assert!((eq[0].probability - 0.5).abs() < 1e-15);
        assert!((eq[1].probability - 0.5).abs() < 1e-15);

        let z = measure(&QubitState::ket0());
        assert_eq!(z[0].probability, 1.0);
        assert_eq!(z[1].probability, 0.0);
        assert!(z[1].post_state.is_none());

        let mixed = measure(&QubitState::maximally_mixed());
        assert!((mixed[0].probability - 0.5).abs() < 1e-15);
        assert!((mixed[1].probability - 0.5).abs() < 1e-15);
    }

    #[test]
    fn measurement_recombines_to_dephased_state() {
        let s = QubitState::from_bloch(0.3, -0.4, 0.5).unwrap();
        let mut acc = Mat2::zeros();
        for b in measure(&s) {
            if let Some(post) = b.post_state {
                assert_valid(&post);
                acc += post.matrix() * c(b.probability, 0.0);
            }
        }
        assert!(max_abs_diff(&acc, dephase(&s).matrix()) < 1e-12);
    }

    #[test]
    fn invalid_states_rejected() {
        assert!(QubitState::from_bloch(1.0, 1.0, 0.0).is_err());
        let not_hermitian = Mat2::new(c(0.5, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(0.5, 0.0));
        let err = QubitState::from_matrix(not_hermitian).unwrap_err();
        assert!(err.to_string().contains("hermitian"));
        let bad_trace = Mat2::new(c(0.7, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.7, 0.0));
        assert!(QubitState::from_matrix(bad_trace).unwrap_err().to_string().contains("trace"));
        let negative = Mat2::new(c(1.2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.2, 0.0));
        assert!(QubitState::from_matrix(negative)
            .unwrap_err()
            .to_string()
            .contains("positive"));
    }

    #[test]
    fn rotation_is_special_orthogonal() {
        for k in 0..50 {
            let g = RotationGate::new(-3.0 + 0.13 * k as f64);
            let m = g.matrix();
            assert!(max_abs_diff(&(m * m.transpose()), &identity()) < 1e-12);
            assert!((m.determinant() - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn projectors_are_complete_and_idempotent() {
        let p = Projector::new(Outcome::Plus).matrix();
        let m = Projector::new(Outcome::Minus).matrix();
        assert_eq!(p * p, p);
        assert_eq!(m * m, m);
        assert_eq!(p + m, identity());
    }

    #[test]
    fn sx_squares_to_x() {
        assert!(max_abs_diff(&(sx() * sx()), &pauli_x()) < 1e-15);
    }

    #[test]
    fn decomposition_of_identity_and_quarter() {
        let id = decompose_zxzxz(&RotationGate::new(0.0));
        assert!(max_abs_diff(&id.reconstruct(), &identity()) < 1e-12);
        let g = RotationGate::new(std::f64::consts::FRAC_PI_4);
        let d = decompose_zxzxz(&g);
        assert!(max_abs_diff(&d.reconstruct(), &g.matrix()) < 1e-12);
    }

    #[test]
    fn decomposition_handles_diagonal_and_antidiagonal() {
        for u in [rz(0.7), pauli_x(), pauli_y(), pauli_z(), sx(), identity() * c(0.0, 1.0)] {
            let d = decompose_unitary(&u);
            assert!(max_abs_diff(&d.reconstruct(), &u) < 1e-12, "{u}");
        }
    }

    #[test]
    fn bloch_round_trip() {
        let s = QubitState::from_bloch(0.1, 0.2, -0.3).unwrap();
        let n = s.bloch();
        assert!((n.x - 0.1).abs() < 1e-15 && (n.y - 0.2).abs() < 1e-15 && (n.z + 0.3).abs() < 1e-15);
        let json = serde_json::to_string(&s).unwrap();
        let back: QubitState = serde_json::from_str(&json).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-15);
        assert!(serde_json::from_str::<QubitState>(r#"{"x":1,"y":1,"z":0}"#).is_err());
    }
}
