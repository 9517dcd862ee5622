use std::sync::OnceLock;

use proptest::prelude::*;
use slerb_core::clifford_mc::run_sequence;
use slerb_core::errmodel::*;
use slerb_core::fitkit::{fit_slerb, FitModel, PopulationCurve};
use slerb_core::grouprep::{irrep_projectors, off_block_norm, slerb_group, twirl, BenchmarkGroup};
use slerb_core::msgates::{build_clifford_catalogue, sample_sequence_seeded, CliffordCatalogue};
use slerb_core::qcore::{unitarity_deviation, unitary_to_process};
use slerb_core::seeding::{derive_seed, rng_from_seed};

fn group() -> &'static BenchmarkGroup {
    static G: OnceLock<BenchmarkGroup> = OnceLock::new();
    G.get_or_init(|| slerb_group().unwrap())
}

fn catalogue() -> &'static CliffordCatalogue {
    static C: OnceLock<CliffordCatalogue> = OnceLock::new();
    C.get_or_init(|| build_clifford_catalogue().unwrap())
}

fn rates() -> impl Strategy<Value = TransferRates> {
    (0.0..0.05f64, 0.0..0.05f64).prop_map(|(a, b)| TransferRates::new(a, b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn three_routes_agree(r in rates(), l in 0u32..500) {
        let a = analytic_populations(&r, l);
        let m = matrix_power_populations(&r, l);
        let e = markov_eigendecomposition(&r).populations(l);
        prop_assert!(a.max_abs_diff(&m) < 1e-12);
        prop_assert!(a.max_abs_diff(&e) < 1e-12);
    }

    #[test]
    fn populations_stay_normalized(r in rates(), s in 0.0..0.2f64, l in 0u32..1000) {
        for p in [analytic_populations(&r, l), analytic_populations_spam(&r, s, l)] {
            prop_assert!((p.total() - 1.0).abs() < 1e-12);
            prop_assert!(p.is_valid());
        }
    }

    #[test]
    fn zero_spam_reduces_to_plain_model(r in rates(), l in 0u32..500) {
        prop_assert!(analytic_populations_spam(&r, 0.0, l).max_abs_diff(&analytic_populations(&r, l)) < 1e-14);
    }

    #[test]
    fn estimators_increase_with_each_rate(r in rates(), d in 1e-6..1e-3f64) {
        let base = per_gate_errors(&r);
        let more_rb = per_gate_errors(&TransferRates::new(r.eps_rb + d, r.eps_leak).unwrap());
        let more_leak = per_gate_errors(&TransferRates::new(r.eps_rb, r.eps_leak + d).unwrap());
        prop_assert!(more_rb.transfer > base.transfer && more_rb.group > base.group);
        prop_assert!(more_leak.transfer > base.transfer && more_leak.group > base.group);
    }

    #[test]
    fn error_unitaries_are_unitary(alpha in -1.0..1.0f64, sigma2 in 0.0..0.1f64, seed: u64) {
        let mut rng = rng_from_seed(seed);
        for ch in [
            AnalyticNoiseChannel::RbConserving { alpha },
            AnalyticNoiseChannel::Leakage { alpha, random_sign: true },
            AnalyticNoiseChannel::RandomPauliGaussian { sigma2 },
            AnalyticNoiseChannel::FixedPauli { pauli: [1, 3], alpha },
        ] {
            let u = make_error_unitary(&ch, &mut rng).unwrap();
            prop_assert!(unitarity_deviation(u.matrix()) < 1e-10);
        }
    }

    #[test]
    fn errorless_sequences_invert(l in 0usize..60, seed: u64) {
        let seq = sample_sequence_seeded(catalogue(), l, seed);
        let p = run_sequence(catalogue(), &seq, &[], &mut rng_from_seed(0)).unwrap();
        prop_assert!((p[seq.target.state().index()] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn seeds_split_by_stage_and_index(master: u64, i in 0u64..1000) {
        prop_assert_eq!(derive_seed(master, "a", i), derive_seed(master, "a", i));
        prop_assert_ne!(derive_seed(master, "a", i), derive_seed(master, "b", i));
        prop_assert_ne!(derive_seed(master, "a", i), derive_seed(master, "a", i + 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn noiseless_fit_round_trips(eps_rb in 1e-4..1e-2f64, eps_leak in 1e-4..1e-2f64) {
        let r = TransferRates::new(eps_rb, eps_leak).unwrap();
        let lengths = [0, 1, 2, 4, 8, 16, 32, 64, 128, 200];
        let curve = PopulationCurve::from_model(&lengths, 4, |l| analytic_populations(&r, l as u32));
        let fit = fit_slerb(&curve, FitModel::NoSpam).unwrap();
        prop_assert!((fit.eps_rb.value - eps_rb).abs() < 1e-8);
        prop_assert!((fit.eps_leak.value - eps_leak).abs() < 1e-8);
    }

    #[test]
    fn twirl_is_block_diagonal_and_idempotent(sigma2 in 1e-4..0.05f64, seed: u64) {
        let u = make_error_unitary(&AnalyticNoiseChannel::RandomPauliGaussian { sigma2 }, &mut rng_from_seed(seed)).unwrap();
        let t = twirl(&unitary_to_process(&u).unwrap(), group());
        prop_assert!(off_block_norm(&t, &irrep_projectors()) < 1e-8);
        prop_assert!(t.trace_preservation_deviation() < 1e-9);
        let tt = twirl(&t, group());
        prop_assert!((tt.matrix() - t.matrix()).norm() < 1e-9);
    }
}
