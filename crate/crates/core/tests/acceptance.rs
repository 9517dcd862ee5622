//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::Matrix3;
use rand::Rng;
use slerb_core::campaign::{linear_lengths, random_unitary_campaign, CampaignConfig};
use slerb_core::clifford_mc::{simulate_clifford_mc, CliffordMcConfig};
use slerb_core::dynsim::{
    classify_error_channel, simulate_hamiltonian_curve, CarrierParams, ErrorInjection, HamiltonianSimulator,
    MsGateParams, ResetPolicy,
};
use slerb_core::errmodel::{
    analytic_populations, analytic_populations_spam, make_error_unitary, markov_eigendecomposition,
    matrix_power_populations, per_gate_errors, rates_from_alpha, reorder_survival_leak_flip, AnalyticNoiseChannel,
    TransferRates,
};
use slerb_core::fitkit::{
    asymptote_diagnostic, estimators_from_decays, fit_slerb, fit_with_bootstrap, FitModel, PopulationCurve,
};
use slerb_core::grouprep::{irrep_projectors, off_block_norm, slerb_group, twirl};
use slerb_core::msgates::build_clifford_catalogue;
use slerb_core::qcore::{identity, max_abs, unitary_to_process};
use slerb_core::seeding::{rng_from_seed, stage_rng};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_group_and_catalogue() -> Outcome {
    let start = Instant::now();
    let group = slerb_group().map_err(|e| e.to_string())?;
    let cat = build_clifford_catalogue().map_err(|e| e.to_string())?;
    let projectors = irrep_projectors();
    let ranks: Vec<usize> = projectors.iter().map(|p| p.rank()).collect();
    let sum = projectors
        .iter()
        .fold(identity(16) * slerb_core::qcore::c(0.0, 0.0), |acc, p| {
            acc + &p.projector
        });
    let completeness = max_abs(&(sum - identity(16)));
    let secs = start.elapsed().as_secs_f64();
    let ok = group.order() == 96
        && cat.len() == 24
        && cat.avg_pulses() == (13, 6)
        && ranks == vec![3, 3, 1, 1, 4, 4]
        && completeness < 1e-9
        && secs < 10.0;
    check(
        ok,
        format!(
            "|G| = {}, catalogue = {}, avg pulses = {}/{}, ranks = {:?}, |ΣΠ − I| = {:.1e}, {:.2} s",
            group.order(),
            cat.len(),
            cat.avg_pulses().0,
            cat.avg_pulses().1,
            ranks,
            completeness,
            secs
        ),
    )
}

fn c2_clifford_monte_carlo() -> Outcome {
    let alpha = PI / 60.0;
    let cat = build_clifford_catalogue().map_err(|e| e.to_string())?;
    let (rates, _) = rates_from_alpha(alpha, alpha).map_err(|e| e.to_string())?;
    let lengths: Vec<usize> = (0..=20).map(|k| 25 * k).collect();
    let cfg = CliffordMcConfig {
        lengths: lengths.clone(),
        circuits: 5000,
        shots: 0,
        errors: vec![
            AnalyticNoiseChannel::Leakage {
                alpha,
                random_sign: true,
            },
            AnalyticNoiseChannel::RbConserving { alpha },
        ],
        seed: 2024,
    };
    let curve = simulate_clifford_mc(&cat, &cfg).map_err(|e| e.to_string())?;
    let worst = curve
        .mean_populations()
        .iter()
        .zip(&lengths)
        .map(|(p, &l)| p.max_abs_diff(&matrix_power_populations(&rates, l as u32)))
        .fold(0.0, f64::max);
    check(
        worst < 0.02,
        format!(
            "max |MC − (I+T)^l P0| = {worst:.4} over {} lengths (bound 0.02)",
            lengths.len()
        ),
    )
}

fn ms_lengths() -> Vec<usize> {
    vec![0, 1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024]
}

fn c3_hamiltonian_asymptotes() -> Outcome {
    let cat = build_clifford_catalogue().map_err(|e| e.to_string())?;
    let lengths = ms_lengths();
    let run = |inj: ErrorInjection, seed: u64| -> Result<PopulationCurve, String> {
        let sim = HamiltonianSimulator::new(MsGateParams::default(), inj).map_err(|e| e.to_string())?;
        simulate_hamiltonian_curve(&cat, &sim, &lengths, 50, 0, ResetPolicy::ResetEachGate, seed)
            .map_err(|e| e.to_string())
    };

    let a = run(
        ErrorInjection {
            fractional_rabi_offset: 0.05,
            ..Default::default()
        },
        31,
    )?;
    let fit_a = fit_slerb(&a, FitModel::NoSpam).map_err(|e| e.to_string())?;
    let blind_a = fit_slerb(&a, FitModel::BlindRb).map_err(|e| e.to_string())?;
    let asym_a = blind_a.params.asymptotes();
    let ok_a =
        fit_a.eps_leak.value < 1e-5 && (asym_a.p_survival - 0.5).abs() < 0.03 && (asym_a.p_flip - 0.5).abs() < 0.03;

    let b = run(
        ErrorInjection {
            fractional_detuning_offset: -0.07,
            ..Default::default()
        },
        32,
    )?;
    let (fit_b, _) = fit_with_bootstrap(&b, FitModel::NoSpam, 200, 33).map_err(|e| e.to_string())?;
    let diag = asymptote_diagnostic(&b).map_err(|e| e.to_string())?;
    let sigma = fit_b.eps_leak.std.unwrap_or(f64::INFINITY);
    let z = fit_b.eps_leak.value / sigma;
    let ok_b = diag.asymptotes.as_array().iter().all(|x| (x - 1.0 / 3.0).abs() < 0.03) && z > 5.0;
    check(
        ok_a && ok_b,
        format!(
            "(a) ε_leak = {:.1e}, asymptotes S/F = {:.3}/{:.3}; (b) asymptotes = {:.3}/{:.3}/{:.3}, ε_leak = {:.3e} ({:.1}σ)",
            fit_a.eps_leak.value,
            asym_a.p_survival,
            asym_a.p_flip,
            diag.asymptotes.p_survival,
            diag.asymptotes.p_flip,
            diag.asymptotes.p_leak,
            fit_b.eps_leak.value,
            z
        ),
    )
}

fn c4_estimator_identities() -> Outcome {
    let r = TransferRates::new(3.2e-4, 2.2e-4).map_err(|e| e.to_string())?;
    let pair = per_gate_errors(&r);
    let closed_t = 6.0 / 13.0 * (6.0 / 5.0 * 3.2e-4 + 4.0 / 5.0 * 2.2e-4);
    let closed_g = 6.0 / 13.0 * (4.0 / 5.0 * 3.2e-4 + 29.0 / 20.0 * 2.2e-4);
    let from_decays = estimators_from_decays(r.q_rb(), r.q_leak());
    let exact = (pair.transfer - closed_t).abs() < 1e-12
        && (pair.group - closed_g).abs() < 1e-12
        && (from_decays.eps_2q_transfer - closed_t).abs() < 1e-12
        && (from_decays.eps_2q_group - closed_g).abs() < 1e-12;
    let printed = (pair.transfer - 2.58e-4).abs() < 5e-7 && (pair.group - 2.65e-4).abs() < 5e-7;
    let paper = (pair.transfer - 2.6e-4).abs() <= 0.2e-4 && (pair.group - 2.7e-4).abs() <= 0.2e-4;
    check(
        exact && printed && paper,
        format!("transfer ε_2Q = {:.4e}, group ε_2Q = {:.4e}", pair.transfer, pair.group),
    )
}

fn c5_random_unitary_campaign() -> Outcome {
    let group = slerb_group().map_err(|e| e.to_string())?;
    let cfg = CampaignConfig {
        n_channels: 1000,
        sigma2: 0.01,
        lengths: linear_lengths(100, 30),
        seed: 7,
    };
    let res = random_unitary_campaign(&group, &cfg).map_err(|e| e.to_string())?;
    let within = |x: f64, target: f64| (x - target).abs() <= 0.05;
    let ok = within(res.group.mean_e, 0.16)
        && within(res.group.std_e, 0.12)
        && within(res.transfer.mean_e, 0.22)
        && within(res.transfer.std_e, 0.15);
    check(
        ok,
        format!(
            "group e_F = {:.3} ± {:.3}, transfer e_F = {:.3} ± {:.3}, corr {:.3}/{:.3}, {} fitted, {} failed",
            res.group.mean_e,
            res.group.std_e,
            res.transfer.mean_e,
            res.transfer.std_e,
            res.group.correlation,
            res.transfer.correlation,
            res.rows.len(),
            res.n_failed
        ),
    )
}

fn c6_markov_equivalence() -> Outcome {
    let mut rng = rng_from_seed(6);
    let mut worst: f64 = 0.0;
    let mut eig_ok = true;
    for _ in 0..50 {
        let er = rng.random_range(0.0..0.05);
        let el = rng.random_range(0.0..0.05);
        let r = TransferRates::new(er, el).map_err(|e| e.to_string())?;
        let dec = markov_eigendecomposition(&r);
        eig_ok &= (dec.eigenvalues[0] - 1.0).abs() < 1e-15
            && (dec.eigenvalues[1] - (1.0 - 2.0 * er - el)).abs() < 1e-15
            && (dec.eigenvalues[2] - (1.0 - 3.0 * el)).abs() < 1e-15;
        for l in 0..=500u32 {
            let a = analytic_populations(&r, l);
            worst = worst
                .max(a.max_abs_diff(&dec.populations(l)))
                .max(a.max_abs_diff(&matrix_power_populations(&r, l)));
        }
    }
    let dec = markov_eigendecomposition(&TransferRates::new(1e-3, 2e-3).map_err(|e| e.to_string())?);
    let p3 = Matrix3::new(1.0, -2.0, 1.0, -2.0, 4.0, -2.0, 1.0, -2.0, 1.0) / 6.0;
    let p2 = Matrix3::new(1.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0) / 2.0;
    let p3_dev = (reorder_survival_leak_flip(&dec.projectors[2]) - p3).amax();
    let p2_dev = (reorder_survival_leak_flip(&dec.projectors[1]) - p2).amax();
    check(
        worst < 1e-12 && eig_ok && p3_dev < 1e-15 && p2_dev < 1e-15,
        format!("max route difference {worst:.1e} over 50 rate pairs × 501 lengths; |P₃ − closed form| = {p3_dev:.0e}"),
    )
}

fn c7_fit_coverage() -> Outcome {
    let truth = [3.2e-4, 2.2e-4, 5.9e-3];
    let r = TransferRates::new(truth[0], truth[1]).map_err(|e| e.to_string())?;
    let lengths = vec![0, 1, 2, 4, 8, 16, 32, 50, 75, 100, 150, 200];
    let reps = 100;
    let mut hits = [0usize; 3];
    for k in 0..reps {
        let mut rng = stage_rng(77, "coverage", k);
        let curve = PopulationCurve::sample_from_model(&lengths, 50, 50, &mut rng, |l| {
            analytic_populations_spam(&r, truth[2], l as u32)
        });
        let (fit, _) = fit_with_bootstrap(&curve, FitModel::WithSpam, 400, 1000 + k).map_err(|e| e.to_string())?;
        let est = [fit.eps_rb, fit.eps_leak, fit.eps_spam.expect("spam model")];
        for i in 0..3 {
            if est[i].contains(truth[i]) {
                hits[i] += 1;
            }
        }
    }
    let cov: Vec<f64> = hits.iter().map(|&h| h as f64 / reps as f64).collect();
    check(
        cov.iter().all(|&c| c >= 0.6),
        format!(
            "truth inside 68% CI: ε_RB {:.0}%, ε_leak {:.0}%, ε_SPAM {:.0}% of {reps} repetitions (need ≥ 60%)",
            100.0 * cov[0],
            100.0 * cov[1],
            100.0 * cov[2]
        ),
    )
}

fn c8_error_table() -> Outcome {
    let base = MsGateParams::default();
    let carrier = MsGateParams {
        carrier: Some(CarrierParams::new(2.0 * PI * 6.67)),
        ..Default::default()
    };
    let rows: Vec<(&str, ErrorInjection, MsGateParams, [bool; 4])> = vec![
        (
            "global qubit frequency",
            ErrorInjection {
                global_qubit_freq_offset: 0.05,
                ..Default::default()
            },
            base,
            [true, true, false, false],
        ),
        (
            "motional (mode frequency)",
            ErrorInjection {
                fractional_detuning_offset: -0.02,
                ..Default::default()
            },
            base,
            [true, true, false, false],
        ),
        (
            "global Rabi",
            ErrorInjection {
                fractional_rabi_offset: 0.05,
                ..Default::default()
            },
            base,
            [true, false, false, false],
        ),
        (
            "differential Rabi",
            ErrorInjection {
                coupling_asymmetry: 0.05,
                ..Default::default()
            },
            base,
            [true, false, false, false],
        ),
        (
            "carrier phase, equal carrier Rabi",
            ErrorInjection {
                carrier_phase_offset: 0.02,
                ..Default::default()
            },
            carrier,
            [true, true, false, false],
        ),
        (
            "differential qubit frequency",
            ErrorInjection {
                differential_qubit_freq_shift: 0.05,
                ..Default::default()
            },
            base,
            [true, false, false, true],
        ),
        (
            "carrier phase, differential carrier Rabi",
            ErrorInjection {
                carrier_phase_offset: 0.02,
                differential_carrier_rabi: 0.02,
                ..Default::default()
            },
            carrier,
            [true, true, true, true],
        ),
    ];
    let mark = |f: &[bool; 4]| f.iter().map(|&b| if b { '✓' } else { '✗' }).collect::<String>();
    let mut failed = Vec::new();
    let mut lines = Vec::new();
    for (name, inj, params, expected) in rows {
        let flags = classify_error_channel(&inj, &params).map_err(|e| e.to_string())?;
        let confined = expected[2] || expected[3] || flags.singlet_after_sequence < 1e-7;
        let ok = flags.flags == expected && confined;
        lines.push(format!(
            "      {name}: got {} expected {} (populations {:.1e} {:.1e} {:.1e} {:.1e}; 20-gate singlet {:.1e})",
            mark(&flags.flags),
            mark(&expected),
            flags.populations[0],
            flags.populations[1],
            flags.populations[2],
            flags.populations[3],
            flags.singlet_after_sequence
        ));
        if !ok {
            failed.push(name);
        }
    }
    let detail = format!("{} of 7 rows reproduced\n{}", 7 - failed.len(), lines.join("\n"));
    check(failed.is_empty(), detail)
}

fn c9_motional_policies() -> Outcome {
    let cat = build_clifford_catalogue().map_err(|e| e.to_string())?;
    let sim = HamiltonianSimulator::new(
        MsGateParams::default(),
        ErrorInjection {
            fractional_detuning_offset: -0.01,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let lengths = vec![0, 1, 2, 4, 8, 16, 32, 64, 128, 200];
    let mut e2q = Vec::new();
    for policy in [ResetPolicy::ResetEachGate, ResetPolicy::Persist] {
        let curve = simulate_hamiltonian_curve(&cat, &sim, &lengths, 50, 0, policy, 99).map_err(|e| e.to_string())?;
        let fit = fit_slerb(&curve, FitModel::NoSpam).map_err(|e| e.to_string())?;
        e2q.push(fit.estimates.eps_2q_transfer);
    }
    let band = e2q.iter().all(|e| (e - 2.5e-4).abs() <= 0.25 * 2.5e-4);
    let agree = (e2q[0] - e2q[1]).abs() <= 0.1 * e2q[0].max(e2q[1]);
    check(
        band && agree,
        format!(
            "ε_2Q reset = {:.3e}, persist = {:.3e} (target 2.5e-4 ± 25%, mutual 10%)",
            e2q[0], e2q[1]
        ),
    )
}

fn c10_twirl_suite() -> Outcome {
    let group = slerb_group().map_err(|e| e.to_string())?;
    let projectors = irrep_projectors();
    let mut rng = rng_from_seed(10);
    let ch = AnalyticNoiseChannel::RandomPauliGaussian { sigma2: 0.1 };
    let (mut off, mut tr, mut idem): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..20 {
        let u = make_error_unitary(&ch, &mut rng).map_err(|e| e.to_string())?;
        let lam = unitary_to_process(&u).map_err(|e| e.to_string())?;
        let tw = twirl(&lam, &group);
        off = off.max(off_block_norm(&tw, &projectors));
        tr = tr.max((tw.matrix().trace() - lam.matrix().trace()).norm());
        idem = idem.max(max_abs(&(twirl(&tw, &group).matrix() - tw.matrix())));
    }
    check(
        off < 1e-8 && tr < 1e-10 && idem < 1e-10,
        format!("off-block {off:.1e}, trace change {tr:.1e}, re-twirl change {idem:.1e} over 20 channels"),
    )
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("C1 group and catalogue structure", c1_group_and_catalogue),
        (
            "C2 Clifford-level Monte Carlo vs transfer matrix",
            c2_clifford_monte_carlo,
        ),
        ("C3 Hamiltonian-level asymptotes", c3_hamiltonian_asymptotes),
        ("C4 estimator identities at fitted rates", c4_estimator_identities),
        ("C5 random-unitary campaign", c5_random_unitary_campaign),
        ("C6 Markov/analytic equivalence", c6_markov_equivalence),
        ("C7 fit round-trip coverage with SPAM", c7_fit_coverage),
        ("C8 error-table classification", c8_error_table),
        ("C9 motional reset vs persist", c9_motional_policies),
        ("C10 twirl and Schur suite", c10_twirl_suite),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("[PASS] {name} ({secs:.1} s): {d}"),
            Err(d) => {
                failures += 1;
                println!("[FAIL] {name} ({secs:.1} s): {d}");
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
