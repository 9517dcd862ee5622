//! Dense complex linear algebra, channel representations and fidelity functionals.
//!
//! Superoperators use the column-stacking vectorization convention:
//! `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`, so a unitary channel `ρ ↦ U ρ U†` is
//! represented by `conj(U) ⊗ U`. nalgebra stores matrices column-major, so the
//! column-stacked superket of a density matrix is simply its backing slice.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlerbError};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Unitarity / normalization tolerance.
pub const UNITARY_TOL: f64 = 1e-10;
/// Channel physicality tolerance.
pub const CHANNEL_TOL: f64 = 1e-9;
/// Projective equality threshold on `1 - |Tr(A†B)|/d`.
pub const PROJECTIVE_TOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Single-qubit Paulis in the order I, X, Y, Z.
pub fn pauli_1q() -> [CMatrix; 4] {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[l, o, o, l]),
        CMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        CMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        CMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
    ]
}

/// All `4^n` n-qubit Pauli strings; index `Σ_k p_k 4^(n-1-k)` with qubit 0 leftmost.
pub fn pauli_basis(n_qubits: usize) -> Vec<CMatrix> {
    let singles = pauli_1q();
    let mut out = vec![identity(1)];
    for _ in 0..n_qubits {
        out = out
            .iter()
            .flat_map(|m| singles.iter().map(move |p| kron(m, p)))
            .collect();
    }
    out
}

/// Largest entry of `|U†U − I|`.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let g = u.adjoint() * u - identity(u.nrows());
    g.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `1 − |Tr(A†B)|/d`: zero iff the matrices agree up to a global phase.
pub fn projective_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = a.nrows() as f64;
    1.0 - (a.adjoint() * b).trace().norm() / d
}

pub fn projectively_equal(a: &CMatrix, b: &CMatrix) -> bool {
    projective_distance(a, b) < PROJECTIVE_TOL
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `exp(−i t H)` for Hermitian `H`, via its eigendecomposition (exactly unitary).
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let eig = h.clone().symmetric_eigen();
    let phases = CVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -l * t)),
    );
    let v = &eig.eigenvectors;
    v * CMatrix::from_diagonal(&phases) * v.adjoint()
}

/// Eigenvalues of a general complex square matrix, from its Schur form.
pub fn eigenvalues(m: &CMatrix) -> Vec<C64> {
    let schur = nalgebra::linalg::Schur::new(m.clone());
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Column-stacked superket of an operator.
pub fn vectorize(rho: &CMatrix) -> CVector {
    CVector::from_column_slice(rho.as_slice())
}

pub fn unvectorize(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// A unitary gate, compared projectively.
#[derive(Clone, Debug, PartialEq)]
pub struct GateUnitary(CMatrix);

impl GateUnitary {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(SlerbError::Dimension(format!(
                "gate must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let deviation = unitarity_deviation(&m);
        if deviation >= UNITARY_TOL {
            return Err(SlerbError::NotUnitary { deviation });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix known to be unitary by construction.
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        debug_assert!(unitarity_deviation(&m) < 1e-8);
        Self(m)
    }

    pub fn identity(d: usize) -> Self {
        Self(identity(d))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `self · other` (other acts first).
    pub fn then_after(&self, other: &GateUnitary) -> GateUnitary {
        GateUnitary(&self.0 * &other.0)
    }

    pub fn adjoint(&self) -> GateUnitary {
        GateUnitary(self.0.adjoint())
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        StateVector {
            amplitudes: &self.0 * &psi.amplitudes,
        }
    }

    pub fn projectively_eq(&self, other: &GateUnitary) -> bool {
        projectively_equal(&self.0, &other.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: CVector,
}

impl StateVector {
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = CVector::zeros(dim);
        amplitudes[index] = c(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Self {
        Self {
            amplitudes: CVector::from_vec(amplitudes),
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() < UNITARY_TOL
    }

    pub fn overlap(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// Two-qubit states used throughout: |00⟩, |01⟩, |10⟩, |11⟩, |Ψ±⟩.
pub mod states {
    use super::*;

    pub fn ket00() -> StateVector {
        StateVector::basis(4, 0)
    }

    pub fn ket11() -> StateVector {
        StateVector::basis(4, 3)
    }

    pub fn psi_plus() -> StateVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_amplitudes(vec![c(0.0, 0.0), c(s, 0.0), c(s, 0.0), c(0.0, 0.0)])
    }

    pub fn psi_minus() -> StateVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_amplitudes(vec![c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    VectorizedComputational,
    Pauli,
}

/// A `d² × d²` superoperator.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    mat: CMatrix,
    dim: usize,
    basis: Basis,
}

impl ProcessMatrix {
    pub fn new(mat: CMatrix, basis: Basis) -> Result<Self> {
        let n = mat.nrows();
        let dim = (n as f64).sqrt().round() as usize;
        if !mat.is_square() || dim * dim != n {
            return Err(SlerbError::Dimension(format!(
                "process matrix must be d²×d², got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { mat, dim, basis })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: identity(dim * dim),
            dim,
            basis: Basis::VectorizedComputational,
        }
    }

    /// Fully depolarizing channel `ρ ↦ Tr(ρ) I/d`.
    pub fn depolarizing(dim: usize) -> Self {
        let v = vectorize(&identity(dim));
        Self {
            mat: &v * v.adjoint() / c(dim as f64, 0.0),
            dim,
            basis: Basis::VectorizedComputational,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// `self ∘ other` (other acts first).
    pub fn compose(&self, other: &ProcessMatrix) -> ProcessMatrix {
        debug_assert_eq!(self.basis, other.basis);
        Self {
            mat: &self.mat * &other.mat,
            dim: self.dim,
            basis: self.basis,
        }
    }

    /// Applies the channel to an operator (computational basis only).
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        assert_eq!(self.basis, Basis::VectorizedComputational);
        unvectorize(&(&self.mat * vectorize(rho)), self.dim)
    }

    /// Largest deviation of `⟨⟨I|Λ` from `⟨⟨I|`.
    pub fn trace_preservation_deviation(&self) -> f64 {
        let id = vectorize(&identity(self.dim));
        let row = id.adjoint() * &self.mat - id.adjoint();
        row.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preservation_deviation() < CHANNEL_TOL
    }

    /// Pauli transfer matrix `R_ij = Tr(P_i Λ(P_j)) / d`.
    pub fn to_pauli_basis(&self) -> ProcessMatrix {
        assert_eq!(self.basis, Basis::VectorizedComputational);
        let n = self.dim.trailing_zeros() as usize;
        let paulis = pauli_basis(n);
        let d = self.dim as f64;
        let images: Vec<CMatrix> = paulis.iter().map(|p| self.apply(p)).collect();
        let mut r = CMatrix::zeros(paulis.len(), paulis.len());
        for (i, pi) in paulis.iter().enumerate() {
            for (j, img) in images.iter().enumerate() {
                r[(i, j)] = (pi * img).trace() / d;
            }
        }
        Self {
            mat: r,
            dim: self.dim,
            basis: Basis::Pauli,
        }
    }
}

/// `Λ = conj(U) ⊗ U`.
pub fn unitary_to_process(u: &GateUnitary) -> Result<ProcessMatrix> {
    let deviation = unitarity_deviation(u.matrix());
    if deviation >= UNITARY_TOL {
        return Err(SlerbError::NotUnitary { deviation });
    }
    let m = u.matrix();
    Ok(ProcessMatrix {
        mat: kron(&m.map(|z| z.conj()), m),
        dim: m.nrows(),
        basis: Basis::VectorizedComputational,
    })
}

/// Process (entanglement) fidelity to the identity, `Re Tr(Λ)/d²`.
pub fn process_fidelity(lambda: &ProcessMatrix) -> Result<f64> {
    let tr = lambda.matrix().trace();
    if tr.im.abs() > CHANNEL_TOL {
        return Err(SlerbError::ComplexTrace(tr.im));
    }
    let d = lambda.hilbert_dim() as f64;
    Ok(tr.re / (d * d))
}

/// Horodecki conversion `(dF + 1)/(d + 1)`.
pub fn average_fidelity(process_fidelity: f64, d: usize) -> f64 {
    let d = d as f64;
    (d * process_fidelity + 1.0) / (d + 1.0)
}

/// Average fidelity from the Pauli sum `(Σ_j Tr(P_j Λ(P_j)) + d²) / (d²(d+1))`.
pub fn average_fidelity_pauli_sum(lambda: &ProcessMatrix) -> f64 {
    let d = lambda.hilbert_dim();
    let n = d.trailing_zeros() as usize;
    let sum: f64 = pauli_basis(n).iter().map(|p| (p * lambda.apply(p)).trace().re).sum();
    let d = d as f64;
    (sum + d * d) / (d * d * (d + 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub process_fidelity: f64,
    pub average_fidelity: f64,
    pub dim: usize,
}

impl FidelityReport {
    pub fn from_process_fidelity(process_fidelity: f64, dim: usize) -> Self {
        Self {
            process_fidelity,
            average_fidelity: average_fidelity(process_fidelity, dim),
            dim,
        }
    }

    /// Builds the report from an average fidelity, inverting the Horodecki formula.
    pub fn from_average_fidelity(average_fidelity: f64, dim: usize) -> Self {
        let d = dim as f64;
        Self {
            process_fidelity: ((d + 1.0) * average_fidelity - 1.0) / d,
            average_fidelity,
            dim,
        }
    }

    pub fn average_infidelity(&self) -> f64 {
        1.0 - self.average_fidelity
    }
}
