//! The benchmarking group generated by the two MS generators, twirling, the
//! irreducible decomposition of its process representation, and decay
//! extraction from twirled channels.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Result, SlerbError};
use crate::msgates::{per_gate_error, BasisState};
use crate::qcore::{
    c, max_abs, projective_distance, states, unitary_to_process, vectorize, CMatrix, CVector, FidelityReport,
    GateUnitary, ProcessMatrix, StateVector, C64, PROJECTIVE_TOL,
};

pub const MAX_GROUP_ORDER: usize = 500;

#[derive(Clone, Debug)]
pub struct BenchmarkGroup {
    elements: Vec<GateUnitary>,
    process_reps: Vec<ProcessMatrix>,
}

/// Rescales so the largest-magnitude entry (first in column-major order, up
/// to 1e-9) is real and positive.
fn canonicalize(m: &CMatrix) -> CMatrix {
    let top = max_abs(m);
    let pivot = m.iter().find(|z| z.norm() > top - 1e-9).copied().unwrap();
    m * (pivot.conj() / pivot.norm())
}

impl BenchmarkGroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[GateUnitary] {
        &self.elements
    }

    pub fn process_reps(&self) -> &[ProcessMatrix] {
        &self.process_reps
    }

    pub fn index_of(&self, u: &GateUnitary) -> Option<usize> {
        self.elements
            .iter()
            .position(|g| projective_distance(g.matrix(), u.matrix()) < PROJECTIVE_TOL)
    }

    pub fn contains(&self, u: &GateUnitary) -> bool {
        self.index_of(u).is_some()
    }
}

/// Worklist closure under left multiplication by the generators.
pub fn generate_group(gen_x: &GateUnitary, gen_y: &GateUnitary) -> Result<BenchmarkGroup> {
    let gens = [gen_x, gen_y];
    let mut elements = vec![GateUnitary::identity(gen_x.dim())];
    let mut next = 0;
    while next < elements.len() {
        for g in gens {
            let cand = g.then_after(&elements[next]);
            let seen = elements
                .iter()
                .any(|e| projective_distance(e.matrix(), cand.matrix()) < PROJECTIVE_TOL);
            if !seen {
                elements.push(GateUnitary::new(canonicalize(cand.matrix()))?);
                if elements.len() > MAX_GROUP_ORDER {
                    return Err(SlerbError::GroupTooLarge(MAX_GROUP_ORDER));
                }
            }
        }
        next += 1;
    }
    let process_reps = elements.iter().map(unitary_to_process).collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkGroup { elements, process_reps })
}

/// The group generated by M_x = U(π/2, 0) and M_y = U(π/2, π/4).
pub fn slerb_group() -> Result<BenchmarkGroup> {
    use crate::msgates::ms_unitary;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
    generate_group(&ms_unitary(FRAC_PI_2, 0.0), &ms_unitary(FRAC_PI_2, FRAC_PI_4))
}

fn tree_sum(mut terms: Vec<CMatrix>) -> CMatrix {
    while terms.len() > 1 {
        let mut next = Vec::with_capacity(terms.len().div_ceil(2));
        let mut it = terms.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a + b),
                None => next.push(a),
            }
        }
        terms = next;
    }
    terms.pop().expect("non-empty sum")
}

/// `(1/|G|) Σ_g V(g) Λ V(g)†`, summed in a fixed pairwise order.
pub fn twirl(lambda: &ProcessMatrix, group: &BenchmarkGroup) -> ProcessMatrix {
    let lam = lambda.matrix();
    let terms: Vec<CMatrix> = group
        .process_reps
        .par_iter()
        .map(|v| v.matrix() * lam * v.matrix().adjoint())
        .collect();
    let sum = tree_sum(terms) / c(group.order() as f64, 0.0);
    ProcessMatrix::new(sum, lambda.basis()).expect("same shape as input")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrrepLabel {
    Trivial,
    Su2Subspace,
    SymAntisymTransfer,
    AntisymSymTransfer,
    ForwardMixing,
    BackwardMixing,
}

impl IrrepLabel {
    pub const ALL: [IrrepLabel; 6] = [
        Self::Trivial,
        Self::Su2Subspace,
        Self::SymAntisymTransfer,
        Self::AntisymSymTransfer,
        Self::ForwardMixing,
        Self::BackwardMixing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Trivial => "trivial",
            Self::Su2Subspace => "su2_subspace",
            Self::SymAntisymTransfer => "sym_antisym_transfer",
            Self::AntisymSymTransfer => "antisym_sym_transfer",
            Self::ForwardMixing => "forward_mixing",
            Self::BackwardMixing => "backward_mixing",
        }
    }
}

#[derive(Clone, Debug)]
pub struct IrrepProjector {
    pub label: IrrepLabel,
    pub projector: CMatrix,
    pub multiplicity: usize,
    pub irrep_dim: usize,
    /// Orthonormal superkets spanning the isotypic component.
    pub basis: Vec<CVector>,
}

impl IrrepProjector {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// `B† Λ B` for the basis `B`: the channel restricted to this component.
    pub fn restrict(&self, lambda: &ProcessMatrix) -> CMatrix {
        let n = self.basis.len();
        let mut b = CMatrix::zeros(16, n);
        for (k, v) in self.basis.iter().enumerate() {
            b.set_column(k, v);
        }
        b.adjoint() * lambda.matrix() * b
    }
}

fn ket(s: BasisState) -> StateVector {
    StateVector::basis(4, s.index())
}

fn outer(a: &StateVector, b: &StateVector) -> CMatrix {
    &a.amplitudes * b.amplitudes.adjoint()
}

fn projector_from(label: IrrepLabel, multiplicity: usize, irrep_dim: usize, ops: Vec<CMatrix>) -> IrrepProjector {
    let basis: Vec<CVector> = ops.iter().map(vectorize).collect();
    let projector = basis
        .iter()
        .fold(CMatrix::zeros(16, 16), |acc, v| acc + v * v.adjoint());
    IrrepProjector {
        label,
        projector,
        multiplicity,
        irrep_dim,
        basis,
    }
}

/// The six isotypic projectors, built from operator bases in the
/// {|00⟩, |11⟩, |Ψ⁺⟩, |Ψ⁻⟩} frame.
pub fn irrep_projectors() -> Vec<IrrepProjector> {
    let k00 = ket(BasisState::S00);
    let k11 = ket(BasisState::S11);
    let pp = states::psi_plus();
    let pm = states::psi_minus();
    let s = c(FRAC_1_SQRT_2, 0.0);
    let even_sum = (outer(&k00, &k00) + outer(&k11, &k11)) * s;
    let even_diff = (outer(&k00, &k00) - outer(&k11, &k11)) * s;
    vec![
        projector_from(
            IrrepLabel::Trivial,
            3,
            1,
            vec![even_sum, outer(&pp, &pp), outer(&pm, &pm)],
        ),
        projector_from(
            IrrepLabel::Su2Subspace,
            1,
            3,
            vec![outer(&k00, &k11), outer(&k11, &k00), even_diff],
        ),
        projector_from(IrrepLabel::SymAntisymTransfer, 1, 1, vec![outer(&pm, &pp)]),
        projector_from(IrrepLabel::AntisymSymTransfer, 1, 1, vec![outer(&pp, &pm)]),
        projector_from(
            IrrepLabel::ForwardMixing,
            2,
            2,
            vec![outer(&pp, &k00), outer(&pp, &k11), outer(&k00, &pm), outer(&k11, &pm)],
        ),
        projector_from(
            IrrepLabel::BackwardMixing,
            2,
            2,
            vec![outer(&pm, &k00), outer(&pm, &k11), outer(&k00, &pp), outer(&k11, &pp)],
        ),
    ]
}

pub fn projector(label: IrrepLabel) -> IrrepProjector {
    irrep_projectors().into_iter().find(|p| p.label == label).unwrap()
}

/// `⟨⟨meas|Π|prep⟩⟩` for computational-basis projectors.
pub fn spam_pair_overlap(p: &IrrepProjector, prep: BasisState, meas: BasisState) -> f64 {
    let sp = vectorize(&outer(&ket(prep), &ket(prep)));
    let sm = vectorize(&outer(&ket(meas), &ket(meas)));
    (sm.adjoint() * &p.projector * sp)[(0, 0)].re
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualDecay {
    pub label: IrrepLabel,
    pub value: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySpectrum {
    pub q_rb: f64,
    pub q_leak_plus: f64,
    pub q_leak_minus: f64,
    pub residual_decays: Vec<ResidualDecay>,
    /// `(coefficient, base)` pairs with `⟨⟨00|Λ̃^l|00⟩⟩ = Σ coefficient · base^l`.
    pub survival_terms: Vec<(f64, f64)>,
}

impl DecaySpectrum {
    /// The leakage base with the larger weight in the survival signal, which
    /// is the one a single-exponential fit of survival + flip picks up.
    pub fn dominant_leak_base(&self) -> f64 {
        let weight = |q: f64| {
            self.survival_terms
                .iter()
                .filter(|t| t.1 == q)
                .map(|t| t.0.abs())
                .sum::<f64>()
        };
        if weight(self.q_leak_minus) > weight(self.q_leak_plus) {
            self.q_leak_minus
        } else {
            self.q_leak_plus
        }
    }

    pub fn survival(&self, l: u32) -> f64 {
        self.survival_terms.iter().map(|&(a, q)| a * q.powi(l as i32)).sum()
    }
}

/// Unit right null vector of `m` (its smallest singular direction).
fn null_vector(m: &Matrix3<f64>) -> Vector3<f64> {
    let svd = m.svd(false, true);
    let k = svd.singular_values.imin();
    svd.v_t.unwrap().row(k).transpose()
}

const TRACE_EIGEN_TOL: f64 = 1e-6;

pub fn extract_decays(twirled: &ProcessMatrix) -> Result<DecaySpectrum> {
    let projectors = irrep_projectors();
    let block = |label: IrrepLabel| projectors.iter().find(|p| p.label == label).unwrap().restrict(twirled);

    let q0c = block(IrrepLabel::Trivial);
    let q0 = Matrix3::from_fn(|i, j| q0c[(i, j)].re);
    let eig = q0.complex_eigenvalues();
    let (one_idx, one) = eig
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).norm().total_cmp(&(b.1 - 1.0).norm()))
        .unwrap();
    if (one - 1.0).norm() > TRACE_EIGEN_TOL {
        return Err(SlerbError::NotTracePreserving(one.re));
    }
    let rest: Vec<f64> = (0..3).filter(|&k| k != one_idx).map(|k| eig[k].re).collect();
    let vecs: Vec<Vector3<f64>> = [1.0, rest[0], rest[1]]
        .iter()
        .map(|&l| null_vector(&(q0 - Matrix3::identity() * l)))
        .collect();
    // Ψ⁺ dominance decides which leakage eigenvalue is q₊.
    let plus_weight = |v: &Vector3<f64>| v[1].abs() - v[2].abs();
    let (plus, minus) = if plus_weight(&vecs[1]) >= plus_weight(&vecs[2]) {
        (1, 2)
    } else {
        (2, 1)
    };
    let bases = [1.0, rest[plus - 1], rest[minus - 1]];
    let s = Matrix3::from_columns(&[vecs[0], vecs[plus], vecs[minus]]);

    let qc = block(IrrepLabel::Su2Subspace);
    let q_rb = qc.trace().re / 3.0;

    // ⟨⟨00| has weight 1/√2 on the even-parity trivial vector and on the S_RB
    // population difference.
    let a = Vector3::new(FRAC_1_SQRT_2, 0.0, 0.0);
    let mut survival_terms = Vec::with_capacity(4);
    match s.try_inverse() {
        Some(s_inv) => {
            let left = s.transpose() * a;
            let right = s_inv * a;
            for k in 0..3 {
                survival_terms.push((left[k] * right[k], bases[k]));
            }
        }
        None => {
            let p = q0c[(0, 0)].re;
            survival_terms.push((0.5, 1.0));
            survival_terms.push((0.0, p));
        }
    }
    survival_terms.push((0.5, q_rb));

    let mut residual_decays = Vec::new();
    for label in [
        IrrepLabel::SymAntisymTransfer,
        IrrepLabel::AntisymSymTransfer,
        IrrepLabel::ForwardMixing,
        IrrepLabel::BackwardMixing,
    ] {
        for value in crate::qcore::eigenvalues(&block(label)) {
            residual_decays.push(ResidualDecay { label, value });
        }
    }
    Ok(DecaySpectrum {
        q_rb,
        q_leak_plus: bases[1],
        q_leak_minus: bases[2],
        residual_decays,
        survival_terms,
    })
}

/// Process and average fidelity with unmeasured decays set to the average of
/// the measured ones: `F = (1 + 8 q_RB + 7 q₊)/16`.
pub fn extended_fidelity(q_rb: f64, q_leak_plus: f64) -> FidelityReport {
    FidelityReport::from_process_fidelity((1.0 + 8.0 * q_rb + 7.0 * q_leak_plus) / 16.0, 4)
}

/// Per-gate error of the extended estimator.
pub fn extended_per_gate_error(q_rb: f64, q_leak_plus: f64) -> f64 {
    per_gate_error(extended_fidelity(q_rb, q_leak_plus).average_infidelity())
}

/// Off-block norm `max_{ν≠μ} ‖Π_ν Λ Π_μ‖_max`.
pub fn off_block_norm(lambda: &ProcessMatrix, projectors: &[IrrepProjector]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in projectors.iter().enumerate() {
        for (j, b) in projectors.iter().enumerate() {
            if i != j {
                worst = worst.max(max_abs(&(&a.projector * lambda.matrix() * &b.projector)));
            }
        }
    }
    worst
}

/// A labelled matrix for numeric export, entries row-major as `[re, im]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExportedMatrix {
    pub label: String,
    pub shape: [usize; 2],
    pub entries: Vec<[f64; 2]>,
}

impl ExportedMatrix {
    pub fn new(label: impl Into<String>, m: &DMatrix<C64>) -> Self {
        let mut entries = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                entries.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        Self {
            label: label.into(),
            shape: [m.nrows(), m.ncols()],
            entries,
        }
    }
}

pub fn export_group(group: &BenchmarkGroup) -> Vec<ExportedMatrix> {
    group
        .elements()
        .iter()
        .enumerate()
        .map(|(k, g)| ExportedMatrix::new(format!("g{k}"), g.matrix()))
        .collect()
}

pub fn export_projectors(projectors: &[IrrepProjector]) -> Vec<ExportedMatrix> {
    projectors
        .iter()
        .map(|p| ExportedMatrix::new(p.label.name(), &p.projector))
        .collect()
}
