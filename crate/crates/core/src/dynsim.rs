//! Hamiltonian-level simulation of MS gates: two qubits coupled to one
//! truncated motional mode, with Walsh modulation, an optional carrier tone
//! and injectable parameter errors.
//!
//! Composite indices are `q * n_fock + m` for qubit basis state `q` and Fock
//! level `m`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlerbError};
use crate::fitkit::{make_outcome, PopulationCurve, Randomization};
use crate::msgates::{ms_unitary, sample_sequence, CliffordCatalogue, MsPulse, SlerbSequence, CATALOGUE_PHASES};
use crate::qcore::{c, expm_hermitian, identity, kron, pauli_1q, unitarity_deviation, CMatrix, CVector, C64};
use crate::seeding::{derive_seed, stage_rng};

/// Population threshold for the transfer flags.
pub const TRANSFER_THRESHOLD: f64 = 1e-8;
/// Allowed population in the two highest Fock levels.
pub const FOCK_TOL: f64 = 1e-8;
pub const DEFAULT_STEPS_PER_HALF: usize = 64;
const MAX_STEPS_PER_HALF: usize = 1 << 15;
const OVERLAP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarrierParams {
    /// Angular carrier Rabi frequency Ω_c.
    pub omega_c: f64,
    pub phase: f64,
    /// Per-ion carrier Rabi scaling κ₁, κ₂.
    #[serde(default = "unit_pair")]
    pub rabi_scaling: [f64; 2],
}

fn unit_pair() -> [f64; 2] {
    [1.0, 1.0]
}

impl CarrierParams {
    pub fn new(omega_c: f64) -> Self {
        Self {
            omega_c,
            phase: 0.0,
            rabi_scaling: [1.0, 1.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MsGateParams {
    pub omega_ms: f64,
    pub delta: f64,
    pub gate_time: f64,
    pub phi_ms: f64,
    pub walsh: bool,
    pub n_fock: usize,
    pub carrier: Option<CarrierParams>,
    pub steps_per_half: usize,
}

impl Default for MsGateParams {
    /// Ω_MS/2π = 1, δ/2π = 2√2, t_g = 1/√2: two closed loops per gate.
    fn default() -> Self {
        Self {
            omega_ms: 2.0 * PI,
            delta: 2.0 * PI * 2.0 * SQRT_2,
            gate_time: 1.0 / SQRT_2,
            phi_ms: 0.0,
            walsh: true,
            n_fock: 15,
            carrier: None,
            steps_per_half: DEFAULT_STEPS_PER_HALF,
        }
    }
}

impl MsGateParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_fock < 8 {
            return Err(SlerbError::Injection(format!(
                "n_fock must be at least 8, got {}",
                self.n_fock
            )));
        }
        if self.steps_per_half == 0 {
            return Err(SlerbError::Injection("steps_per_half must be positive".into()));
        }
        let vals = [self.omega_ms, self.delta, self.gate_time, self.phi_ms];
        if vals.iter().any(|v| !v.is_finite()) || self.gate_time <= 0.0 {
            return Err(SlerbError::Injection(
                "gate parameters must be finite with positive gate time".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorInjection {
    pub fractional_rabi_offset: f64,
    pub fractional_detuning_offset: f64,
    /// Angular frequency, same on both qubits.
    pub global_qubit_freq_offset: f64,
    /// Angular frequency, opposite on the two qubits.
    pub differential_qubit_freq_shift: f64,
    pub carrier_phase_offset: f64,
    pub differential_carrier_rabi: f64,
    /// Spin-motion couplings become `1 ± a`.
    pub coupling_asymmetry: f64,
}

impl ErrorInjection {
    fn fields(&self) -> [(&'static str, f64); 7] {
        [
            ("fractional_rabi_offset", self.fractional_rabi_offset),
            ("fractional_detuning_offset", self.fractional_detuning_offset),
            ("global_qubit_freq_offset", self.global_qubit_freq_offset),
            ("differential_qubit_freq_shift", self.differential_qubit_freq_shift),
            ("carrier_phase_offset", self.carrier_phase_offset),
            ("differential_carrier_rabi", self.differential_carrier_rabi),
            ("coupling_asymmetry", self.coupling_asymmetry),
        ]
    }

    pub fn active(&self) -> Vec<&'static str> {
        self.fields()
            .iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|(n, _)| *n)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((n, _)) = self.fields().iter().find(|(_, v)| !v.is_finite()) {
            return Err(SlerbError::Injection(format!("{n} is not finite")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositeState {
    pub amplitudes: CVector,
    pub n_fock: usize,
}

impl CompositeState {
    /// `|q⟩ ⊗ |0⟩`.
    pub fn ground(q: usize, n_fock: usize) -> Self {
        let mut amplitudes = CVector::zeros(4 * n_fock);
        amplitudes[q * n_fock] = c(1.0, 0.0);
        Self { amplitudes, n_fock }
    }

    pub fn from_qubit_state(psi: &[C64; 4], n_fock: usize) -> Self {
        let mut amplitudes = CVector::zeros(4 * n_fock);
        for q in 0..4 {
            amplitudes[q * n_fock] = psi[q];
        }
        Self { amplitudes, n_fock }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn qubit_populations(&self) -> [f64; 4] {
        let mut p = [0.0; 4];
        for (k, a) in self.amplitudes.iter().enumerate() {
            p[k / self.n_fock] += a.norm_sqr();
        }
        p
    }

    pub fn fock_populations(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.n_fock];
        for (k, a) in self.amplitudes.iter().enumerate() {
            p[k % self.n_fock] += a.norm_sqr();
        }
        p
    }

    fn top_population(&self) -> f64 {
        let p = self.fock_populations();
        p[self.n_fock - 2] + p[self.n_fock - 1]
    }
}

fn lowering(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        if j == i + 1 {
            c((j as f64).sqrt(), 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

fn sigma_phi(p: f64) -> CMatrix {
    let ps = pauli_1q();
    &ps[1] * c(p.cos(), 0.0) + &ps[2] * c(p.sin(), 0.0)
}

fn local_sum(a: &CMatrix, b: &CMatrix) -> CMatrix {
    kron(a, &identity(2)) + kron(&identity(2), b)
}

/// The three Fourier components of H on one gate half: a static part and
/// the `e^{±iδt}` sideband parts.
struct HalfTerms {
    terms: [(CMatrix, f64); 3],
}

fn half_terms(params: &MsGateParams, inj: &ErrorInjection, phi: f64) -> HalfTerms {
    let nf = params.n_fock;
    let omega = params.omega_ms * (1.0 + inj.fractional_rabi_offset);
    let delta = params.delta * (1.0 + inj.fractional_detuning_offset);
    let eta = [1.0 + inj.coupling_asymmetry, 1.0 - inj.coupling_asymmetry];
    let sp = sigma_phi(phi);
    let spin = local_sum(&(&sp * c(eta[0], 0.0)), &(&sp * c(eta[1], 0.0)));
    let b = kron(&spin, &lowering(nf)) * c(omega / 2.0, 0.0);
    let bd = b.adjoint();

    let ps = pauli_1q();
    let mut stat = local_sum(&ps[3], &ps[3]) * c(inj.global_qubit_freq_offset / 2.0, 0.0)
        + (kron(&ps[3], &identity(2)) - kron(&identity(2), &ps[3])) * c(inj.differential_qubit_freq_shift / 2.0, 0.0);
    if let Some(cr) = params.carrier {
        let sc = sigma_phi(phi + cr.phase + inj.carrier_phase_offset);
        let k1 = cr.rabi_scaling[0] * (1.0 + inj.differential_carrier_rabi / 2.0);
        let k2 = cr.rabi_scaling[1] * (1.0 - inj.differential_carrier_rabi / 2.0);
        stat += local_sum(&(&sc * c(k1, 0.0)), &(&sc * c(k2, 0.0))) * c(cr.omega_c / 2.0, 0.0);
    }
    HalfTerms {
        terms: [(kron(&stat, &identity(nf)), 0.0), (b, delta), (bd, -delta)],
    }
}

fn half_phase(params: &MsGateParams, phi: f64, second_half: bool) -> f64 {
    if params.walsh && second_half {
        phi + PI
    } else {
        phi
    }
}

/// H(t) on the composite space for a gate of phase `phi_ms` (with the gate's
/// own `params.phi_ms` added).
pub fn ms_hamiltonian(t: f64, params: &MsGateParams, inj: &ErrorInjection) -> CMatrix {
    let second = t > params.gate_time / 2.0;
    let h = half_terms(params, inj, half_phase(params, params.phi_ms, second));
    h.terms
        .iter()
        .fold(CMatrix::zeros(4 * params.n_fock, 4 * params.n_fock), |acc, (m, w)| {
            acc + m * C64::from_polar(1.0, w * t)
        })
}

fn cexp(w: f64, d: f64) -> C64 {
    C64::from_polar(1.0, w * d)
}

/// `∫₀^D e^{iws} ds`
fn e_int(w: f64, d: f64) -> C64 {
    if w == 0.0 {
        c(d, 0.0)
    } else {
        (cexp(w, d) - 1.0) / c(0.0, w)
    }
}

/// `∫₀^D s e^{iws} ds`
fn se_int(w: f64, d: f64) -> C64 {
    if w == 0.0 {
        c(d * d / 2.0, 0.0)
    } else {
        let iw = c(0.0, w);
        cexp(w, d) * d / iw - (cexp(w, d) - 1.0) / (iw * iw)
    }
}

/// `∫₀^D ds₁ e^{iw_j s₁} ∫₀^{s₁} ds₂ e^{iw_k s₂}`
fn k_int(wj: f64, wk: f64, d: f64) -> C64 {
    if wk == 0.0 {
        se_int(wj, d)
    } else {
        (e_int(wj + wk, d) - e_int(wj, d)) / c(0.0, wk)
    }
}

/// Second-order Magnus propagation of one half with `steps` equal steps.
fn propagate_half(h: &HalfTerms, t_start: f64, t_half: f64, steps: usize, u: &mut CMatrix) {
    let d = t_half / steps as f64;
    let comms: Vec<(usize, usize, CMatrix)> = [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(j, k)| {
            let (hj, hk) = (&h.terms[j].0, &h.terms[k].0);
            (j, k, hj * hk - hk * hj)
        })
        .collect();
    for s in 0..steps {
        let t0 = t_start + s as f64 * d;
        let mut heff = h
            .terms
            .iter()
            .fold(CMatrix::zeros(u.nrows(), u.ncols()), |acc, (m, w)| {
                acc + m * (C64::from_polar(1.0, w * t0) * e_int(*w, d))
            });
        for (j, k, comm) in &comms {
            let (wj, wk) = (h.terms[*j].1, h.terms[*k].1);
            let phase = C64::from_polar(1.0, (wj + wk) * t0);
            let coef = phase * (k_int(wj, wk, d) - k_int(wk, wj, d));
            heff -= comm * (c(0.0, 0.5) * coef);
        }
        let heff = (&heff + heff.adjoint()) * c(0.5, 0.0);
        *u = expm_hermitian(&heff, 1.0) * &*u;
    }
}

fn gate_unitary_with_steps(params: &MsGateParams, inj: &ErrorInjection, phi: f64, steps: usize) -> CMatrix {
    let dim = 4 * params.n_fock;
    let th = params.gate_time / 2.0;
    let mut u = identity(dim);
    for half in 0..2 {
        let h = half_terms(params, inj, half_phase(params, phi, half == 1));
        propagate_half(&h, half as f64 * th, th, steps, &mut u);
    }
    u
}

fn ground_column_deficit(a: &CMatrix, b: &CMatrix, nf: usize) -> f64 {
    (0..4)
        .map(|q| {
            let col = q * nf;
            let ov = a.column(col).dotc(&b.column(col));
            1.0 - ov.norm_sqr()
        })
        .fold(0.0, f64::max)
}

/// One gate on the composite space plus its Kraus decomposition for a mode
/// starting in the ground state.
#[derive(Clone, Debug)]
pub struct GatePropagator {
    pub phi: f64,
    pub unitary: CMatrix,
    pub n_fock: usize,
    pub steps_per_half: usize,
    pub unitarity_deviation: f64,
    /// Population left in the two highest Fock levels from a ground-state mode.
    pub top_population: f64,
    kraus: Vec<Matrix4<C64>>,
}

impl GatePropagator {
    /// `K_m = ⟨m|U|0⟩` on the qubits.
    pub fn kraus(&self) -> &[Matrix4<C64>] {
        &self.kraus
    }

    /// Qubit block taking motional ground to ground.
    pub fn ground_block(&self) -> Matrix4<C64> {
        self.kraus[0]
    }

    pub fn apply(&self, state: &CompositeState) -> Result<CompositeState> {
        if state.n_fock != self.n_fock {
            return Err(SlerbError::Dimension(format!(
                "state has {} Fock levels, gate has {}",
                state.n_fock, self.n_fock
            )));
        }
        let out = CompositeState {
            amplitudes: &self.unitary * &state.amplitudes,
            n_fock: self.n_fock,
        };
        let drift = (out.norm() - state.norm()).abs();
        if drift > 1e-10 {
            return Err(SlerbError::NotUnitary { deviation: drift });
        }
        let top = out.top_population();
        if top > FOCK_TOL {
            return Err(SlerbError::FockTruncation(top));
        }
        Ok(out)
    }

    /// Reset-mode action on a qubit density matrix.
    pub fn apply_reset(&self, rho: &Matrix4<C64>) -> Matrix4<C64> {
        self.kraus
            .iter()
            .fold(Matrix4::zeros(), |acc, k| acc + k * rho * k.adjoint())
    }
}

/// Builds the gate propagator at phase `phi` (added to `params.phi_ms`),
/// doubling the step count until the ground-state columns agree with the
/// next finer run.
pub fn gate_propagator(params: &MsGateParams, inj: &ErrorInjection, phi: f64) -> Result<GatePropagator> {
    params.validate()?;
    inj.validate()?;
    let nf = params.n_fock;
    let phi = phi + params.phi_ms;
    let mut steps = params.steps_per_half;
    let mut u = gate_unitary_with_steps(params, inj, phi, steps);
    loop {
        if steps * 2 > MAX_STEPS_PER_HALF {
            return Err(SlerbError::Integrator(steps));
        }
        let finer = gate_unitary_with_steps(params, inj, phi, steps * 2);
        let deficit = ground_column_deficit(&u, &finer, nf);
        u = finer;
        steps *= 2;
        if deficit < OVERLAP_TOL {
            break;
        }
    }
    let dev = unitarity_deviation(&u);
    if dev > 1e-10 {
        return Err(SlerbError::NotUnitary { deviation: dev });
    }
    let top = (0..4)
        .map(|q| {
            (0..4)
                .map(|qo| u[(qo * nf + nf - 2, q * nf)].norm_sqr() + u[(qo * nf + nf - 1, q * nf)].norm_sqr())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    if top > FOCK_TOL {
        return Err(SlerbError::FockTruncation(top));
    }
    let kraus = (0..nf)
        .map(|m| Matrix4::from_fn(|a, b| u[(a * nf + m, b * nf)]))
        .collect();
    Ok(GatePropagator {
        phi,
        unitary: u,
        n_fock: nf,
        steps_per_half: steps,
        unitarity_deviation: dev,
        top_population: top,
        kraus,
    })
}

/// Evolves a composite state through one gate at `params.phi_ms`.
pub fn propagate_gate(params: &MsGateParams, inj: &ErrorInjection, state: &CompositeState) -> Result<CompositeState> {
    gate_propagator(params, inj, 0.0)?.apply(state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetPolicy {
    ResetEachGate,
    Persist,
}

/// Gate propagators for the four catalogue phases.
#[derive(Clone, Debug)]
pub struct HamiltonianSimulator {
    pub params: MsGateParams,
    pub injection: ErrorInjection,
    gates: Vec<GatePropagator>,
}

impl HamiltonianSimulator {
    pub fn new(params: MsGateParams, injection: ErrorInjection) -> Result<Self> {
        let gates = CATALOGUE_PHASES
            .par_iter()
            .map(|&p| gate_propagator(&params, &injection, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            injection,
            gates,
        })
    }

    pub fn gate(&self, pulse: &MsPulse) -> Result<&GatePropagator> {
        if (pulse.theta - PI / 2.0).abs() > 1e-12 {
            return Err(SlerbError::Injection(format!(
                "Hamiltonian gates implement θ = π/2 only, got {}",
                pulse.theta
            )));
        }
        pulse
            .phase_index()
            .map(|k| &self.gates[k])
            .ok_or_else(|| SlerbError::Injection(format!("pulse phase {} is not a catalogue phase", pulse.phi)))
    }

    /// Exact outcome probabilities (00, 01, 10, 11) of a sequence from |00⟩|0⟩.
    pub fn run_sequence(&self, seq: &SlerbSequence, policy: ResetPolicy) -> Result<[f64; 4]> {
        let gates = seq
            .pulse_schedule
            .iter()
            .map(|p| self.gate(p))
            .collect::<Result<Vec<_>>>()?;
        match policy {
            ResetPolicy::ResetEachGate => {
                let mut rho = Matrix4::zeros();
                rho[(0, 0)] = c(1.0, 0.0);
                for g in gates {
                    rho = g.apply_reset(&rho);
                }
                let tr: f64 = (0..4).map(|k| rho[(k, k)].re).sum();
                if (tr - 1.0).abs() > 1e-9 {
                    return Err(SlerbError::NotUnitary {
                        deviation: (tr - 1.0).abs(),
                    });
                }
                Ok([rho[(0, 0)].re, rho[(1, 1)].re, rho[(2, 2)].re, rho[(3, 3)].re])
            }
            ResetPolicy::Persist => {
                let mut state = CompositeState::ground(0, self.params.n_fock);
                for g in gates {
                    state = g.apply(&state)?;
                }
                Ok(state.qubit_populations())
            }
        }
    }
}

/// One randomization: exact probabilities when `shots == 0`, multinomial
/// counts otherwise.
pub fn run_hamiltonian_slerb<R: Rng + ?Sized>(
    sim: &HamiltonianSimulator,
    seq: &SlerbSequence,
    policy: ResetPolicy,
    shots: u64,
    rng: &mut R,
) -> Result<Randomization> {
    let probs = sim.run_sequence(seq, policy)?;
    Ok(Randomization {
        target: seq.target,
        outcome: make_outcome(probs, shots, rng),
    })
}

/// `r` random sequences per length with seeds derived from `seed`.
pub fn simulate_hamiltonian_curve(
    catalogue: &CliffordCatalogue,
    sim: &HamiltonianSimulator,
    lengths: &[usize],
    r: usize,
    shots: u64,
    policy: ResetPolicy,
    seed: u64,
) -> Result<PopulationCurve> {
    let points = lengths
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let stage_seed = derive_seed(seed, "hamiltonian", i as u64);
            (0..r)
                .into_par_iter()
                .map(|k| {
                    let mut rng = stage_rng(stage_seed, "circuit", k as u64);
                    let seq = sample_sequence(catalogue, l, &mut rng);
                    run_hamiltonian_slerb(sim, &seq, policy, shots, &mut rng)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    PopulationCurve::new(lengths.to_vec(), points, shots, Some(seed))
}

/// Transfer populations `[00→11, 00→Ψ⁺, 00→Ψ⁻, Ψ⁺→Ψ⁻]` in the ideal-gate frame
/// and their flags at [`TRANSFER_THRESHOLD`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferFlags {
    pub flags: [bool; 4],
    pub populations: [f64; 4],
    /// Singlet population after [`CONFINEMENT_GATES`] gates, maximised over |00⟩ and |Ψ⁺⟩ starts.
    pub singlet_after_sequence: f64,
}

pub const CONFINEMENT_GATES: usize = 20;

fn basis_vectors() -> [Vector4<C64>; 4] {
    let s = 1.0 / SQRT_2;
    [
        Vector4::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)),
        Vector4::new(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)),
        Vector4::new(c(0.0, 0.0), c(s, 0.0), c(s, 0.0), c(0.0, 0.0)),
        Vector4::new(c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)),
    ]
}

/// Runs `n` reset-mode gates from `psi` and undoes the ideal `n`-gate rotation.
fn error_frame_state(g: &GatePropagator, psi: &Vector4<C64>, n: usize) -> Matrix4<C64> {
    let mut rho = psi * psi.adjoint();
    for _ in 0..n {
        rho = g.apply_reset(&rho);
    }
    let t = ms_unitary(PI / 2.0, g.phi);
    let t4 = Matrix4::from_fn(|i, j| t.matrix()[(i, j)]);
    let mut tn = Matrix4::identity();
    for _ in 0..n {
        tn = t4 * tn;
    }
    tn.adjoint() * rho * tn
}

fn pop(rho: &Matrix4<C64>, v: &Vector4<C64>) -> f64 {
    (v.adjoint() * rho * v)[(0, 0)].re
}

/// Which subspace transfers an injected error produces. Exactly one injection
/// may be active, except that a carrier phase offset may be combined with a
/// differential carrier Rabi frequency.
pub fn classify_error_channel(inj: &ErrorInjection, params: &MsGateParams) -> Result<TransferFlags> {
    let active = inj.active();
    let carrier_pair =
        active.len() == 2 && active.contains(&"carrier_phase_offset") && active.contains(&"differential_carrier_rabi");
    if active.len() > 1 && !carrier_pair {
        return Err(SlerbError::Injection(format!(
            "expected a single injection, got {}",
            active.join(", ")
        )));
    }
    if (inj.carrier_phase_offset != 0.0 || inj.differential_carrier_rabi != 0.0) && params.carrier.is_none() {
        return Err(SlerbError::Injection("carrier injections need a carrier tone".into()));
    }
    let g = gate_propagator(params, inj, 0.0)?;
    let [k00, k11, kp, km] = basis_vectors();
    let r00 = error_frame_state(&g, &k00, 1);
    let rp = error_frame_state(&g, &kp, 1);
    let populations = [pop(&r00, &k11), pop(&r00, &kp), pop(&r00, &km), pop(&rp, &km)];
    let singlet = [k00, kp]
        .iter()
        .map(|v| pop(&error_frame_state(&g, v, CONFINEMENT_GATES), &km))
        .fold(0.0, f64::max);
    Ok(TransferFlags {
        flags: populations.map(|p| p > TRANSFER_THRESHOLD),
        populations,
        singlet_after_sequence: singlet,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msgates::build_clifford_catalogue;
    use crate::qcore::max_abs;
    use crate::seeding::rng_from_seed;

    #[test]
    fn hamiltonian_is_hermitian_and_walsh_flips() {
        let p = MsGateParams::default();
        let inj = ErrorInjection::default();
        let t = 0.3;
        let h = ms_hamiltonian(t, &p, &inj);
        assert!(max_abs(&(&h - h.adjoint())) < 1e-12);
        let eps = 1e-9;
        let before = ms_hamiltonian(p.gate_time / 2.0 - eps, &p, &inj);
        let after = ms_hamiltonian(p.gate_time / 2.0 + eps, &p, &inj);
        assert!(max_abs(&(&before + &after)) < 1e-6);
    }

    #[test]
    fn ideal_gate_matches_analytic() {
        let p = MsGateParams::default();
        let inj = ErrorInjection::default();
        let g = gate_propagator(&p, &inj, 0.0).unwrap();
        let ideal = ms_unitary(PI / 2.0, 0.0);
        let out = propagate_gate(&p, &inj, &CompositeState::ground(0, p.n_fock)).unwrap();
        let target: Vec<C64> = (0..4).map(|q| ideal.matrix()[(q, 0)]).collect();
        let ov: C64 = (0..4).map(|q| target[q].conj() * out.amplitudes[q * p.n_fock]).sum();
        assert!(ov.norm_sqr() > 1.0 - 1e-6);
        assert!(out.fock_populations()[0] > 1.0 - 1e-9);
        assert!(g.unitarity_deviation < 1e-10);
    }

    #[test]
    fn rabi_offset_does_not_leak() {
        let p = MsGateParams::default();
        let inj = ErrorInjection {
            fractional_rabi_offset: 0.05,
            ..Default::default()
        };
        let out = propagate_gate(&p, &inj, &CompositeState::ground(0, p.n_fock)).unwrap();
        let q = out.qubit_populations();
        assert!(q[1] + q[2] < 1e-6);
    }

    #[test]
    fn detuning_leaves_motion_excited() {
        let p = MsGateParams::default();
        let inj = ErrorInjection {
            fractional_detuning_offset: -0.07,
            ..Default::default()
        };
        let out = propagate_gate(&p, &inj, &CompositeState::ground(0, p.n_fock)).unwrap();
        assert!(out.fock_populations()[0] < 1.0 - 1e-4);
    }

    #[test]
    fn walsh_suppresses_detuning_leakage() {
        for det in [0.01, -0.01] {
            let inj = ErrorInjection {
                fractional_detuning_offset: det,
                ..Default::default()
            };
            let leak = |walsh: bool| {
                let p = MsGateParams {
                    walsh,
                    ..Default::default()
                };
                let q = propagate_gate(&p, &inj, &CompositeState::ground(0, p.n_fock))
                    .unwrap()
                    .qubit_populations();
                q[1] + q[2]
            };
            assert!(leak(true) * 10.0 < leak(false), "det {det}");
        }
    }

    #[test]
    fn ideal_sequences_survive() {
        let cat = build_clifford_catalogue().unwrap();
        let sim = HamiltonianSimulator::new(MsGateParams::default(), ErrorInjection::default()).unwrap();
        let mut rng = rng_from_seed(4);
        for l in [0, 3, 12] {
            let seq = sample_sequence(&cat, l, &mut rng);
            for policy in [ResetPolicy::ResetEachGate, ResetPolicy::Persist] {
                let p = sim.run_sequence(&seq, policy).unwrap();
                assert!((p[seq.target.state().index()] - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rejects_multiple_injections() {
        let inj = ErrorInjection {
            fractional_rabi_offset: 0.01,
            fractional_detuning_offset: 0.01,
            ..Default::default()
        };
        assert!(matches!(
            classify_error_channel(&inj, &MsGateParams::default()),
            Err(SlerbError::Injection(_))
        ));
    }

    #[test]
    fn small_fock_space_rejected() {
        let p = MsGateParams {
            n_fock: 4,
            ..Default::default()
        };
        assert!(gate_propagator(&p, &ErrorInjection::default(), 0.0).is_err());
    }
}
