//! Clifford-level Monte Carlo: ideal catalogue Cliffords interleaved with
//! error unitaries, simulated on state vectors.

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::errmodel::{make_error_unitary, AnalyticNoiseChannel};
use crate::error::{Result, SlerbError};
use crate::fitkit::{make_outcome, PopulationCurve, Randomization};
use crate::msgates::{sample_sequence, CliffordCatalogue, SlerbSequence};
use crate::qcore::{c, GateUnitary, C64};
use crate::seeding::{derive_seed, stage_rng};

type M4 = Matrix4<C64>;

fn to_static(u: &GateUnitary) -> M4 {
    let m = u.matrix();
    M4::from_fn(|i, j| m[(i, j)])
}

/// Error draws with deterministic channels cached.
enum ErrorSource {
    Fixed(M4),
    Signed(M4, M4),
    Fresh(AnalyticNoiseChannel),
}

impl ErrorSource {
    fn new(ch: &AnalyticNoiseChannel) -> Result<Self> {
        let mut rng = stage_rng(0, "cache", 0);
        Ok(match *ch {
            AnalyticNoiseChannel::Leakage {
                alpha,
                random_sign: true,
            } => {
                let mut fixed = |a: f64| -> Result<M4> {
                    let u = make_error_unitary(
                        &AnalyticNoiseChannel::Leakage {
                            alpha: a,
                            random_sign: false,
                        },
                        &mut rng,
                    )?;
                    Ok(to_static(&u))
                };
                ErrorSource::Signed(fixed(alpha)?, fixed(-alpha)?)
            }
            AnalyticNoiseChannel::RandomPauliGaussian { .. } => ErrorSource::Fresh(ch.clone()),
            _ => ErrorSource::Fixed(to_static(&make_error_unitary(ch, &mut rng)?)),
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<M4> {
        match self {
            ErrorSource::Fixed(u) => Ok(*u),
            ErrorSource::Signed(p, m) => Ok(if rng.random::<bool>() { *m } else { *p }),
            ErrorSource::Fresh(ch) => Ok(to_static(&make_error_unitary(ch, rng)?)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliffordMcConfig {
    pub lengths: Vec<usize>,
    pub circuits: usize,
    /// 0 keeps exact per-circuit probabilities.
    pub shots: u64,
    /// Applied after every Clifford in list order.
    pub errors: Vec<AnalyticNoiseChannel>,
    pub seed: u64,
}

/// Outcome probabilities (00, 01, 10, 11) of one sequence from |00⟩.
pub fn run_sequence<R: Rng + ?Sized>(
    catalogue: &CliffordCatalogue,
    seq: &SlerbSequence,
    errors: &[AnalyticNoiseChannel],
    rng: &mut R,
) -> Result<[f64; 4]> {
    let sources = errors.iter().map(ErrorSource::new).collect::<Result<Vec<_>>>()?;
    let cliffords: Vec<M4> = catalogue.entries().iter().map(|e| to_static(&e.full_unitary)).collect();
    run_cached(&cliffords, &sources, seq, rng)
}

fn run_cached<R: Rng + ?Sized>(
    cliffords: &[M4],
    sources: &[ErrorSource],
    seq: &SlerbSequence,
    rng: &mut R,
) -> Result<[f64; 4]> {
    let mut psi = Vector4::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
    for &id in &seq.clifford_ids {
        psi = cliffords[id] * psi;
        for s in sources {
            psi = s.draw(rng)? * psi;
        }
    }
    Ok([
        psi[0].norm_sqr(),
        psi[1].norm_sqr(),
        psi[2].norm_sqr(),
        psi[3].norm_sqr(),
    ])
}

/// Simulates `circuits` random sequences per length. Circuit `k` at length
/// index `i` uses its own generator derived from the master seed, so results
/// do not depend on thread scheduling.
pub fn simulate_clifford_mc(catalogue: &CliffordCatalogue, cfg: &CliffordMcConfig) -> Result<PopulationCurve> {
    if cfg.circuits == 0 {
        return Err(SlerbError::InvalidCurve("need at least one circuit per length".into()));
    }
    let sources = cfg.errors.iter().map(ErrorSource::new).collect::<Result<Vec<_>>>()?;
    let cliffords: Vec<M4> = catalogue.entries().iter().map(|e| to_static(&e.full_unitary)).collect();
    let points = cfg
        .lengths
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let stage_seed = derive_seed(cfg.seed, "clifford_mc", i as u64);
            (0..cfg.circuits)
                .into_par_iter()
                .map(|k| {
                    let mut rng = stage_rng(stage_seed, "circuit", k as u64);
                    let seq = sample_sequence(catalogue, l, &mut rng);
                    let probs = run_cached(&cliffords, &sources, &seq, &mut rng)?;
                    Ok(Randomization {
                        target: seq.target,
                        outcome: make_outcome(probs, cfg.shots, &mut rng),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    PopulationCurve::new(cfg.lengths.clone(), points, cfg.shots, Some(cfg.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msgates::build_clifford_catalogue;

    #[test]
    fn errorless_sequences_survive() {
        let cat = build_clifford_catalogue().unwrap();
        let cfg = CliffordMcConfig {
            lengths: vec![0, 1, 5, 20],
            circuits: 16,
            shots: 0,
            errors: vec![],
            seed: 3,
        };
        let curve = simulate_clifford_mc(&cat, &cfg).unwrap();
        for i in 0..curve.n_lengths() {
            for p in curve.populations(i) {
                assert!((p.p_survival - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cat = build_clifford_catalogue().unwrap();
        let cfg = CliffordMcConfig {
            lengths: vec![0, 3, 9],
            circuits: 8,
            shots: 20,
            errors: vec![AnalyticNoiseChannel::Leakage {
                alpha: 0.1,
                random_sign: true,
            }],
            seed: 11,
        };
        assert_eq!(
            simulate_clifford_mc(&cat, &cfg).unwrap(),
            simulate_clifford_mc(&cat, &cfg).unwrap()
        );
    }

    #[test]
    fn conserving_error_never_leaks() {
        let cat = build_clifford_catalogue().unwrap();
        let cfg = CliffordMcConfig {
            lengths: vec![1, 10, 40],
            circuits: 8,
            shots: 0,
            errors: vec![AnalyticNoiseChannel::RbConserving { alpha: 0.2 }],
            seed: 5,
        };
        let curve = simulate_clifford_mc(&cat, &cfg).unwrap();
        for i in 0..curve.n_lengths() {
            assert!(curve.populations(i).iter().all(|p| p.p_leak < 1e-12));
        }
    }
}
