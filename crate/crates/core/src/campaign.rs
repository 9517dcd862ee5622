//! Random-unitary campaign: exact twirled-channel curves for Gaussian-Pauli
//! error unitaries, blind fits and the two fidelity estimators compared with
//! the true channel fidelity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::errmodel::{make_error_unitary, AnalyticNoiseChannel, PopulationVector};
use crate::error::{Result, SlerbError};
use crate::fitkit::{
    blind_rb_combos, estimators_from_decays, mean_std, relative_error, PopulationCurve, Randomization,
};
use crate::grouprep::{twirl, BenchmarkGroup};
use crate::qcore::{c, process_fidelity, unitary_to_process, CMatrix, FidelityReport, GateUnitary, ProcessMatrix};
use crate::seeding::stage_rng;

/// Exact populations of the twirled channel applied `l` times to |00⟩, for
/// every requested length.
pub fn twirled_populations(twirled: &ProcessMatrix, lengths: &[usize]) -> Vec<PopulationVector> {
    let mut rho = CMatrix::zeros(4, 4);
    rho[(0, 0)] = c(1.0, 0.0);
    let l_max = lengths.iter().copied().max().unwrap_or(0);
    let mut out = Vec::with_capacity(lengths.len());
    let mut next = lengths.iter().peekable();
    for l in 0..=l_max {
        while next.peek() == Some(&&l) {
            next.next();
            out.push(PopulationVector::new(
                rho[(0, 0)].re,
                rho[(3, 3)].re,
                rho[(1, 1)].re + rho[(2, 2)].re,
            ));
        }
        rho = twirled.apply(&rho);
    }
    out
}

/// Exact curve (one randomization per length) for a fixed error unitary.
pub fn twirled_curve(group: &BenchmarkGroup, error: &GateUnitary, lengths: &[usize]) -> Result<PopulationCurve> {
    let twirled = twirl(&unitary_to_process(error)?, group);
    let points = twirled_populations(&twirled, lengths)
        .into_iter()
        .map(|p| vec![Randomization::from_populations(p)])
        .collect();
    PopulationCurve::new(lengths.to_vec(), points, 0, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub index: usize,
    pub true_fidelity: f64,
    pub group_fidelity: f64,
    pub transfer_fidelity: f64,
    pub e_group: f64,
    pub e_transfer: f64,
    pub q_rb: f64,
    pub q_leak: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    pub mean_e: f64,
    pub std_e: f64,
    /// Pearson correlation of estimated against true average infidelity.
    pub correlation: f64,
    /// Least-squares slope of estimated against true average infidelity.
    pub slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub rows: Vec<CampaignRow>,
    pub n_failed: usize,
    pub group: EstimatorStats,
    pub transfer: EstimatorStats,
    pub mean_true_fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub n_channels: usize,
    pub sigma2: f64,
    pub lengths: Vec<usize>,
    pub seed: u64,
}

/// `n` evenly spaced integer lengths from 0 to `l_max`, deduplicated.
pub fn linear_lengths(l_max: usize, n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n)
        .map(|k| (k as f64 * l_max as f64 / (n - 1) as f64).round() as usize)
        .collect();
    v.dedup();
    v
}

/// Relative error of an estimated average infidelity; zero when both vanish.
fn infidelity_error(estimated: f64, truth: f64) -> f64 {
    let (ie, it) = (1.0 - estimated, 1.0 - truth);
    if it.abs() < 1e-14 && ie.abs() < 1e-12 {
        0.0
    } else {
        relative_error(ie, it)
    }
}

fn campaign_row(group: &BenchmarkGroup, error: &GateUnitary, lengths: &[usize], index: usize) -> Result<CampaignRow> {
    let curve = twirled_curve(group, error, lengths)?;
    let fit = blind_rb_combos(&curve)?;
    let est = estimators_from_decays(fit.q_rb, fit.q_leak);
    let truth = FidelityReport::from_process_fidelity(process_fidelity(&unitary_to_process(error)?)?, 4);
    let (fg, ft) = (est.group.average_fidelity, est.transfer.average_fidelity);
    Ok(CampaignRow {
        index,
        true_fidelity: truth.average_fidelity,
        group_fidelity: fg,
        transfer_fidelity: ft,
        e_group: infidelity_error(fg, truth.average_fidelity),
        e_transfer: infidelity_error(ft, truth.average_fidelity),
        q_rb: fit.q_rb,
        q_leak: fit.q_leak,
    })
}

fn regression(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, sx) = mean_std(x);
    let (my, sy) = mean_std(y);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() - 1) as f64;
    let corr = if sx > 0.0 && sy > 0.0 {
        cov / (sx * sy)
    } else {
        f64::NAN
    };
    let slope = if sx > 0.0 { cov / (sx * sx) } else { f64::NAN };
    (corr, slope)
}

fn stats(rows: &[CampaignRow], est: impl Fn(&CampaignRow) -> (f64, f64)) -> EstimatorStats {
    let e: Vec<f64> = rows.iter().map(|r| est(r).0).collect();
    let truth: Vec<f64> = rows.iter().map(|r| 1.0 - r.true_fidelity).collect();
    let estimated: Vec<f64> = rows.iter().map(|r| 1.0 - est(r).1).collect();
    let (mean_e, std_e) = mean_std(&e);
    let (correlation, slope) = regression(&truth, &estimated);
    EstimatorStats {
        mean_e,
        std_e,
        correlation,
        slope,
    }
}

/// Runs the campaign. Channel `k` draws its unitary from its own derived
/// generator; channels whose fit fails are counted and dropped.
pub fn random_unitary_campaign(group: &BenchmarkGroup, cfg: &CampaignConfig) -> Result<CampaignResult> {
    if cfg.n_channels < 10 {
        return Err(SlerbError::InvalidCurve(format!(
            "campaign needs at least 10 channels, got {}",
            cfg.n_channels
        )));
    }
    let channel = AnalyticNoiseChannel::RandomPauliGaussian { sigma2: cfg.sigma2 };
    let outcomes: Vec<Result<CampaignRow>> = (0..cfg.n_channels)
        .into_par_iter()
        .map(|k| {
            let mut rng = stage_rng(cfg.seed, "campaign", k as u64);
            let u = make_error_unitary(&channel, &mut rng)?;
            campaign_row(group, &u, &cfg.lengths, k)
        })
        .collect();
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut n_failed = 0;
    for o in outcomes {
        match o {
            Ok(r) => rows.push(r),
            Err(SlerbError::FitFailed(_)) => n_failed += 1,
            Err(e) => return Err(e),
        }
    }
    if rows.len() < 2 {
        return Err(SlerbError::FitFailed("fewer than two channels fitted".into()));
    }
    let group_stats = stats(&rows, |r| (r.e_group, r.group_fidelity));
    let transfer_stats = stats(&rows, |r| (r.e_transfer, r.transfer_fidelity));
    let mean_true_fidelity = mean_std(&rows.iter().map(|r| r.true_fidelity).collect::<Vec<_>>()).0;
    Ok(CampaignResult {
        rows,
        n_failed,
        group: group_stats,
        transfer: transfer_stats,
        mean_true_fidelity,
    })
}
