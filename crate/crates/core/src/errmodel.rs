//! Transfer-matrix population model, its Markov eigendecomposition, the
//! rate-based fidelity estimators, and analytic error-channel generators.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlerbError};
use crate::grouprep::extended_fidelity;
use crate::msgates::per_gate_error;
use crate::qcore::{expm_hermitian, identity, kron, pauli_1q, pauli_basis, CMatrix, FidelityReport, GateUnitary};

/// Per-Clifford transfer probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferRates {
    pub eps_rb: f64,
    pub eps_leak: f64,
}

impl TransferRates {
    pub fn new(eps_rb: f64, eps_leak: f64) -> Result<Self> {
        let ok = (0.0..1.0).contains(&eps_rb)
            && (0.0..1.0).contains(&eps_leak)
            && 2.0 * eps_rb + eps_leak < 1.0
            && 3.0 * eps_leak < 1.0;
        if !ok {
            return Err(SlerbError::InvalidRates(format!(
                "eps_rb={eps_rb}, eps_leak={eps_leak} gives a non-positive decay base"
            )));
        }
        Ok(Self { eps_rb, eps_leak })
    }

    pub fn zero() -> Self {
        Self {
            eps_rb: 0.0,
            eps_leak: 0.0,
        }
    }

    /// Decay base of the survival-flip difference, `1 − 2ε_RB − ε_leak`.
    pub fn q_rb(&self) -> f64 {
        1.0 - 2.0 * self.eps_rb - self.eps_leak
    }

    /// Decay base of leakage, `1 − 3ε_leak`.
    pub fn q_leak(&self) -> f64 {
        1.0 - 3.0 * self.eps_leak
    }

    /// Inverts the two decay bases.
    pub fn from_decays(q_rb: f64, q_leak: f64) -> Self {
        let eps_leak = (1.0 - q_leak) / 3.0;
        Self {
            eps_rb: (1.0 - q_rb - eps_leak) / 2.0,
            eps_leak,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationVector {
    pub p_survival: f64,
    pub p_flip: f64,
    pub p_leak: f64,
}

impl PopulationVector {
    pub fn new(p_survival: f64, p_flip: f64, p_leak: f64) -> Self {
        Self {
            p_survival,
            p_flip,
            p_leak,
        }
    }

    pub fn initial() -> Self {
        Self::new(1.0, 0.0, 0.0)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.p_survival, self.p_flip, self.p_leak)
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.p_survival, self.p_flip, self.p_leak]
    }

    pub fn total(&self) -> f64 {
        self.p_survival + self.p_flip + self.p_leak
    }

    pub fn is_valid(&self) -> bool {
        self.as_array().iter().all(|p| (-1e-9..=1.0 + 1e-9).contains(p)) && (self.total() - 1.0).abs() < 1e-9
    }

    pub fn max_abs_diff(&self, other: &PopulationVector) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `I + T_RB + T_leak`, acting on (survival, flip, leak) column vectors.
pub fn transfer_matrix(rates: &TransferRates) -> Matrix3<f64> {
    let (r, k) = (rates.eps_rb, rates.eps_leak);
    let t_rb = Matrix3::new(-r, r, 0.0, r, -r, 0.0, 0.0, 0.0, 0.0);
    let t_leak = Matrix3::new(-k, 0.0, k, 0.0, -k, k, k, k, -2.0 * k);
    Matrix3::identity() + t_rb + t_leak
}

pub fn analytic_populations(rates: &TransferRates, l: u32) -> PopulationVector {
    analytic_populations_spam(rates, 0.0, l)
}

/// Populations with first-order SPAM error `eps_spam` folded into the offsets.
pub fn analytic_populations_spam(rates: &TransferRates, eps_spam: f64, l: u32) -> PopulationVector {
    let a = rates.q_rb().powi(l as i32);
    let b = rates.q_leak().powi(l as i32);
    let s = eps_spam;
    let base = (1.0 - s) / 3.0;
    let p_survival = base + 0.5 * (1.0 - 2.0 * s) * a + (1.0 - 4.0 * s) / 6.0 * b;
    let p_flip = base - 0.5 * (1.0 - 2.0 * s) * a + (1.0 - 4.0 * s) / 6.0 * b;
    let p_leak = (1.0 + 2.0 * s) / 3.0 - (1.0 - 4.0 * s) / 3.0 * b;
    PopulationVector::new(p_survival, p_flip, p_leak)
}

/// `(I + T)^l (1, 0, 0)ᵀ` by repeated multiplication.
pub fn matrix_power_populations(rates: &TransferRates, l: u32) -> PopulationVector {
    let m = transfer_matrix(rates);
    let mut v = Vector3::new(1.0, 0.0, 0.0);
    for _ in 0..l {
        v = m * v;
    }
    PopulationVector::from_vector(&v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovDecomposition {
    pub eigenvalues: [f64; 3],
    pub projectors: [Matrix3<f64>; 3],
}

impl MarkovDecomposition {
    pub fn populations(&self, l: u32) -> PopulationVector {
        let p0 = Vector3::new(1.0, 0.0, 0.0);
        let v = (0..3).fold(Vector3::zeros(), |acc, k| {
            acc + self.projectors[k] * p0 * self.eigenvalues[k].powi(l as i32)
        });
        PopulationVector::from_vector(&v)
    }
}

/// Permutes a matrix on (survival, flip, leak) to the (survival, leak, flip) order.
pub fn reorder_survival_leak_flip(m: &Matrix3<f64>) -> Matrix3<f64> {
    let perm = [0, 2, 1];
    Matrix3::from_fn(|i, j| m[(perm[i], perm[j])])
}

/// Eigenvalues `1, 1 − 2ε_RB − ε_leak, 1 − 3ε_leak` with their spectral
/// projectors, in (survival, flip, leak) order.
pub fn markov_eigendecomposition(rates: &TransferRates) -> MarkovDecomposition {
    let p1 = Matrix3::from_element(1.0 / 3.0);
    let p2 = Matrix3::new(0.5, -0.5, 0.0, -0.5, 0.5, 0.0, 0.0, 0.0, 0.0);
    let p3 = Matrix3::new(1.0, 1.0, -2.0, 1.0, 1.0, -2.0, -2.0, -2.0, 4.0) / 6.0;
    MarkovDecomposition {
        eigenvalues: [1.0, rates.q_rb(), rates.q_leak()],
        projectors: [p1, p2, p3],
    }
}

/// Transfer-matrix estimator: `ℐ = (6/5)ε_RB + (4/5)ε_leak`.
pub fn transfer_clifford_infidelity(rates: &TransferRates) -> f64 {
    1.2 * rates.eps_rb + 0.8 * rates.eps_leak
}

pub fn transfer_matrix_estimate(rates: &TransferRates) -> FidelityReport {
    FidelityReport::from_average_fidelity(1.0 - transfer_clifford_infidelity(rates), 4)
}

/// Group-theory estimator evaluated at the symmetric-model decay bases.
pub fn group_theory_estimate(rates: &TransferRates) -> FidelityReport {
    extended_fidelity(rates.q_rb(), rates.q_leak())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateErrorPair {
    pub transfer: f64,
    pub group: f64,
}

/// Per-gate errors `ε_2Q` from both estimators.
pub fn per_gate_errors(rates: &TransferRates) -> GateErrorPair {
    GateErrorPair {
        transfer: per_gate_error(transfer_clifford_infidelity(rates)),
        group: per_gate_error(group_theory_estimate(rates).average_infidelity()),
    }
}

/// Largest angle for which the perturbative rate formulas are trusted.
pub const PERTURBATIVE_ALPHA: f64 = 0.3;

/// `ε_RB = (2/3)α_RB²`, `ε_leak = 2α_leak²`. The flag is false outside the
/// perturbative regime.
pub fn rates_from_alpha(alpha_rb: f64, alpha_leak: f64) -> Result<(TransferRates, bool)> {
    let rates = TransferRates::new(2.0 / 3.0 * alpha_rb * alpha_rb, 2.0 * alpha_leak * alpha_leak)?;
    let perturbative = alpha_rb.abs() <= PERTURBATIVE_ALPHA && alpha_leak.abs() <= PERTURBATIVE_ALPHA;
    Ok((rates, perturbative))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticNoiseChannel {
    /// `exp(−iα σ_x⊗σ_x)`.
    RbConserving { alpha: f64 },
    /// `exp(∓iα(σ_x⊗I + I⊗σ_x))`, sign redrawn per use when `random_sign`.
    Leakage { alpha: f64, random_sign: bool },
    /// `exp(i Σ_j θ_j P_j)` over the 15 non-identity Paulis, `θ_j ~ N(0, σ²)`.
    RandomPauliGaussian { sigma2: f64 },
    /// `exp(−iα P)` for a fixed two-qubit Pauli; `pauli` indexes I, X, Y, Z per qubit.
    FixedPauli { pauli: [usize; 2], alpha: f64 },
}

fn single_qubit_sum(p: &CMatrix) -> CMatrix {
    kron(p, &identity(2)) + kron(&identity(2), p)
}

pub fn make_error_unitary<R: Rng + ?Sized>(ch: &AnalyticNoiseChannel, rng: &mut R) -> Result<GateUnitary> {
    let ps = pauli_1q();
    let m = match ch {
        AnalyticNoiseChannel::RbConserving { alpha } => expm_hermitian(&kron(&ps[1], &ps[1]), *alpha),
        AnalyticNoiseChannel::Leakage { alpha, random_sign } => {
            let sign = if *random_sign && rng.random::<bool>() {
                -1.0
            } else {
                1.0
            };
            expm_hermitian(&single_qubit_sum(&ps[1]), sign * alpha)
        }
        AnalyticNoiseChannel::RandomPauliGaussian { sigma2 } => {
            if !(*sigma2 >= 0.0 && sigma2.is_finite()) {
                return Err(SlerbError::InvalidRates(format!(
                    "sigma2 must be non-negative, got {sigma2}"
                )));
            }
            let normal = Normal::new(0.0, sigma2.sqrt()).expect("finite sigma");
            let h = pauli_basis(2).iter().skip(1).fold(CMatrix::zeros(4, 4), |acc, p| {
                acc + p * crate::qcore::c(normal.sample(rng), 0.0)
            });
            expm_hermitian(&h, -1.0)
        }
        AnalyticNoiseChannel::FixedPauli { pauli, alpha } => {
            if pauli.iter().any(|&k| k > 3) {
                return Err(SlerbError::InvalidRates(format!("bad Pauli index {pauli:?}")));
            }
            expm_hermitian(&kron(&ps[pauli[0]], &ps[pauli[1]]), *alpha)
        }
    };
    GateUnitary::new(m)
}
