//! Simulation and analysis of subspace leakage error randomized benchmarking
//! (SLERB) for two-qubit Mølmer–Sørensen gates.
//!
//! * [`qcore`]: dense complex linear algebra, superoperators, fidelities.
//! * [`msgates`]: MS unitaries, the Clifford catalogue, sequence synthesis.
//! * [`grouprep`]: the 96-element benchmarking group, twirls, irreps, decays.
//! * [`errmodel`]: transfer-matrix population model and error channels.
//! * [`clifford_mc`]: state-vector Monte Carlo of Clifford sequences.
//! * [`dynsim`]: spin-motion dynamics of the MS interaction.
//! * [`fitkit`]: decay fitting, bootstrap intervals, estimators.
//! * [`campaign`]: the random-unitary estimator campaign.

pub mod campaign;
pub mod clifford_mc;
pub mod dynsim;
pub mod errmodel;
pub mod error;
pub mod fitkit;
pub mod grouprep;
pub mod msgates;
pub mod qcore;
pub mod seeding;

pub use error::{Result, SlerbError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
