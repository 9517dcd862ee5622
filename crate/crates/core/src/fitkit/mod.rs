//! Decay-model fitting for SLERB population curves: joint symmetric fits with
//! and without SPAM, blind-RB combinations, bootstrap intervals, asymptote
//! diagnostics and the two fidelity estimators.

pub mod curve;
pub mod lm;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use curve::{make_outcome, mean_std, sample_counts, Outcome, PopulationCurve, Randomization};
pub use lm::{levenberg_marquardt, LmOptions, LmResult};

use crate::errmodel::{transfer_clifford_infidelity, PopulationVector, TransferRates};
use crate::error::{Result, SlerbError};
use crate::grouprep::extended_fidelity;
use crate::msgates::per_gate_error;
use crate::qcore::FidelityReport;
use crate::seeding::stage_rng;

/// Floor on per-length variances used for weights.
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Floor applied to series before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-6;
const EPS_RB_MAX: f64 = 0.499;
const EPS_LEAK_MAX: f64 = 0.333;
const EPS_SPAM_MAX: f64 = 0.499;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    NoSpam,
    WithSpam,
    BlindRb,
    GeneralThreeExp,
}

impl std::str::FromStr for FitModel {
    type Err = SlerbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no_spam" => Ok(Self::NoSpam),
            "with_spam" => Ok(Self::WithSpam),
            "blind_rb" => Ok(Self::BlindRb),
            "general_three_exp" => Ok(Self::GeneralThreeExp),
            other => Err(SlerbError::Parse(format!("unknown fit model '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// 68% interval.
    pub ci: Option<[f64; 2]>,
    pub std: Option<f64>,
}

impl Estimate {
    pub fn point(value: f64) -> Self {
        Self {
            value,
            ci: None,
            std: None,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci.is_some_and(|[lo, hi]| lo <= x && x <= hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum FitParams {
    /// Symmetric transfer model, SPAM folded into the offsets.
    Symmetric { eps_rb: f64, eps_leak: f64, eps_spam: f64 },
    /// `S+F = a + b q_leak^l`, `S−F = c q_rb^l`.
    Blind {
        a: f64,
        b: f64,
        q_leak: f64,
        c: f64,
        q_rb: f64,
    },
    /// `S+F = a + b q₊^l + d q₋^l`, `S−F = c q_rb^l`.
    ThreeExp {
        a: f64,
        b: f64,
        q_plus: f64,
        d: f64,
        q_minus: f64,
        c: f64,
        q_rb: f64,
    },
}

impl FitParams {
    pub fn predict(&self, l: usize) -> PopulationVector {
        let pw = |q: f64| q.powi(l as i32);
        let (sum, diff) = match *self {
            FitParams::Symmetric {
                eps_rb,
                eps_leak,
                eps_spam,
            } => {
                let r = TransferRates { eps_rb, eps_leak };
                return crate::errmodel::analytic_populations_spam(&r, eps_spam, l as u32);
            }
            FitParams::Blind { a, b, q_leak, c, q_rb } => (a + b * pw(q_leak), c * pw(q_rb)),
            FitParams::ThreeExp {
                a,
                b,
                q_plus,
                d,
                q_minus,
                c,
                q_rb,
            } => (a + b * pw(q_plus) + d * pw(q_minus), c * pw(q_rb)),
        };
        PopulationVector::new((sum + diff) / 2.0, (sum - diff) / 2.0, 1.0 - sum)
    }

    /// The `l → ∞` limit; decay bases of modulus one are kept.
    pub fn asymptotes(&self) -> PopulationVector {
        let lim = |q: f64| if q.abs() < 1.0 - 1e-15 { 0.0 } else { 1.0 };
        let (sum, diff) = match *self {
            FitParams::Symmetric {
                eps_rb,
                eps_leak,
                eps_spam,
            } => {
                let s = eps_spam;
                let r = TransferRates { eps_rb, eps_leak };
                let (a, b) = (lim(r.q_rb()), lim(r.q_leak()));
                let sum = 2.0 * (1.0 - s) / 3.0 + (1.0 - 4.0 * s) / 3.0 * b;
                (sum, (1.0 - 2.0 * s) * a)
            }
            FitParams::Blind { a, b, q_leak, c, q_rb } => (a + b * lim(q_leak), c * lim(q_rb)),
            FitParams::ThreeExp {
                a,
                b,
                q_plus,
                d,
                q_minus,
                c,
                q_rb,
            } => (a + b * lim(q_plus) + d * lim(q_minus), c * lim(q_rb)),
        };
        PopulationVector::new((sum + diff) / 2.0, (sum - diff) / 2.0, 1.0 - sum)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorPair {
    pub transfer: FidelityReport,
    pub group: FidelityReport,
    pub eps_2q_transfer: f64,
    pub eps_2q_group: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: FitModel,
    pub params: FitParams,
    pub eps_rb: Estimate,
    pub eps_leak: Estimate,
    pub eps_spam: Option<Estimate>,
    pub q_rb: f64,
    pub q_leak_plus: f64,
    pub q_leak_minus: Option<f64>,
    pub residuals: ResidualStats,
    pub estimates: EstimatorPair,
    pub eps_2q_transfer: Estimate,
    pub eps_2q_group: Estimate,
    /// Set when a series had to be clipped before a log-linear initial guess.
    pub clipped: bool,
}

impl DecayFit {
    pub fn predict(&self, l: usize) -> PopulationVector {
        self.params.predict(l)
    }

    pub fn rates(&self) -> TransferRates {
        TransferRates {
            eps_rb: self.eps_rb.value,
            eps_leak: self.eps_leak.value,
        }
    }

    /// Scalar quantities carried through the bootstrap, by name.
    pub fn summary(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![("eps_rb", self.eps_rb.value), ("eps_leak", self.eps_leak.value)];
        if let Some(s) = self.eps_spam {
            v.push(("eps_spam", s.value));
        }
        v.push(("eps_2q_transfer", self.eps_2q_transfer.value));
        v.push(("eps_2q_group", self.eps_2q_group.value));
        v
    }

    fn estimate_mut(&mut self, name: &str) -> Option<&mut Estimate> {
        match name {
            "eps_rb" => Some(&mut self.eps_rb),
            "eps_leak" => Some(&mut self.eps_leak),
            "eps_spam" => self.eps_spam.as_mut(),
            "eps_2q_transfer" => Some(&mut self.eps_2q_transfer),
            "eps_2q_group" => Some(&mut self.eps_2q_group),
            _ => None,
        }
    }
}

/// Both estimators from the fitted decay bases.
pub fn estimate_all(fit: &DecayFit) -> EstimatorPair {
    estimators_from_decays(fit.q_rb, fit.q_leak_plus)
}

pub fn estimators_from_decays(q_rb: f64, q_leak: f64) -> EstimatorPair {
    let rates = TransferRates::from_decays(q_rb, q_leak);
    let transfer = FidelityReport::from_average_fidelity(1.0 - transfer_clifford_infidelity(&rates), 4);
    let group = extended_fidelity(q_rb, q_leak);
    EstimatorPair {
        transfer,
        group,
        eps_2q_transfer: per_gate_error(transfer.average_infidelity()),
        eps_2q_group: per_gate_error(group.average_infidelity()),
    }
}

/// `|f̂ − f| / f`.
pub fn relative_error(f_hat: f64, f_true: f64) -> f64 {
    (f_hat - f_true).abs() / f_true
}

struct Series {
    l: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

fn series(curve: &PopulationCurve, f: impl Fn(&PopulationVector) -> f64) -> Series {
    let stats = curve.series_stats(f);
    let mut s = Series {
        l: Vec::with_capacity(stats.len()),
        y: Vec::with_capacity(stats.len()),
        w: Vec::with_capacity(stats.len()),
    };
    for (i, (m, sd)) in stats.into_iter().enumerate() {
        let r = curve.points[i].len() as f64;
        s.l.push(curve.lengths[i] as f64);
        s.y.push(m);
        s.w.push((r / (sd * sd).max(VARIANCE_FLOOR)).sqrt());
    }
    s
}

fn check_curve(curve: &PopulationCurve) -> Result<()> {
    curve.validate()?;
    if curve.n_lengths() < 4 {
        return Err(SlerbError::InvalidCurve(format!(
            "need at least 4 distinct lengths, got {}",
            curve.n_lengths()
        )));
    }
    Ok(())
}

/// `(q^l, d q^l / d q)` with the `l = 0` derivative taken as zero.
fn pow_and_deriv(q: f64, l: f64) -> (f64, f64) {
    let li = l as i32;
    if li == 0 {
        (1.0, 0.0)
    } else {
        (q.powi(li), l * q.powi(li - 1))
    }
}

/// Weighted least-squares slope/intercept of `ln(max(y, floor))` against `l`.
fn log_linear(l: &[f64], y: &[f64]) -> (f64, f64, bool) {
    let mut clipped = false;
    let ly: Vec<f64> = y
        .iter()
        .map(|&v| {
            if v < LOG_FLOOR {
                clipped = true;
            }
            v.max(LOG_FLOOR).ln()
        })
        .collect();
    let n = l.len() as f64;
    let ml = l.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = l.iter().map(|x| (x - ml).powi(2)).sum();
    let sxy: f64 = l.iter().zip(&ly).map(|(x, y)| (x - ml) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope.min(0.0).exp(), (my - slope * ml).exp(), clipped)
}

fn symmetric_guess(curve: &PopulationCurve, with_spam: bool) -> ([f64; 3], bool) {
    let means = curve.mean_populations();
    let l: Vec<f64> = curve.lengths.iter().map(|&x| x as f64).collect();
    let s0 = if with_spam && curve.lengths[0] == 0 {
        (means[0].p_leak / 2.0).clamp(0.0, EPS_SPAM_MAX)
    } else {
        0.0
    };
    let diff: Vec<f64> = means.iter().map(|p| p.p_survival - p.p_flip).collect();
    let leak_base: Vec<f64> = means
        .iter()
        .map(|p| ((1.0 + 2.0 * s0) - 3.0 * p.p_leak) / (1.0 - 4.0 * s0))
        .collect();
    let (q_rb, _, c1) = log_linear(&l, &diff);
    let (q_leak, _, c2) = log_linear(&l, &leak_base);
    let eps_leak = ((1.0 - q_leak) / 3.0).clamp(0.0, EPS_LEAK_MAX);
    let eps_rb = ((1.0 - q_rb - eps_leak) / 2.0).clamp(0.0, EPS_RB_MAX);
    ([eps_rb, eps_leak, s0], c1 || c2)
}

fn fit_symmetric(curve: &PopulationCurve, with_spam: bool) -> Result<(FitParams, LmResult, bool)> {
    let s = series(curve, |p| p.p_survival);
    let f = series(curve, |p| p.p_flip);
    let k = series(curve, |p| p.p_leak);
    let n = s.l.len();
    let np = if with_spam { 3 } else { 2 };
    let model = |p: &[f64]| {
        let (er, el) = (p[0], p[1]);
        let sp = if with_spam { p[2] } else { 0.0 };
        let mut r = DVector::zeros(3 * n);
        let mut j = DMatrix::zeros(3 * n, np);
        for i in 0..n {
            let l = s.l[i];
            let (a, da) = pow_and_deriv(1.0 - 2.0 * er - el, l);
            let (b, db) = pow_and_deriv(1.0 - 3.0 * el, l);
            let ca = 0.5 * (1.0 - 2.0 * sp);
            let cb = (1.0 - 4.0 * sp) / 6.0;
            let base = (1.0 - sp) / 3.0;
            let ps = base + ca * a + cb * b;
            let pf = base - ca * a + cb * b;
            let pk = (1.0 + 2.0 * sp) / 3.0 - 2.0 * cb * b;
            r[i] = s.w[i] * (ps - s.y[i]);
            r[n + i] = f.w[i] * (pf - f.y[i]);
            r[2 * n + i] = k.w[i] * (pk - k.y[i]);
            // ∂/∂ε_RB, ∂/∂ε_leak, ∂/∂ε_SPAM
            j[(i, 0)] = s.w[i] * ca * da * -2.0;
            j[(n + i, 0)] = f.w[i] * -ca * da * -2.0;
            j[(i, 1)] = s.w[i] * (-ca * da - 3.0 * cb * db);
            j[(n + i, 1)] = f.w[i] * (ca * da - 3.0 * cb * db);
            j[(2 * n + i, 1)] = k.w[i] * (6.0 * cb * db);
            if with_spam {
                j[(i, 2)] = s.w[i] * (-1.0 / 3.0 - a - 2.0 / 3.0 * b);
                j[(n + i, 2)] = f.w[i] * (-1.0 / 3.0 + a - 2.0 / 3.0 * b);
                j[(2 * n + i, 2)] = k.w[i] * (2.0 / 3.0 + 4.0 / 3.0 * b);
            }
        }
        (r, j)
    };
    let (guess, clipped) = symmetric_guess(curve, with_spam);
    let lower = [0.0, 0.0, 0.0];
    let upper = [EPS_RB_MAX, EPS_LEAK_MAX, EPS_SPAM_MAX];
    let res = levenberg_marquardt(model, &guess[..np], &lower[..np], &upper[..np], &LmOptions::default());
    let params = FitParams::Symmetric {
        eps_rb: res.params[0],
        eps_leak: res.params[1],
        eps_spam: if with_spam { res.params[2] } else { 0.0 },
    };
    Ok((params, res, clipped))
}

/// Fit of `a + b q^l` to a series.
fn fit_offset_exp(s: &Series) -> (LmResult, bool) {
    let n = s.l.len();
    let (lo, hi) =
        s.y.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let model = |p: &[f64]| {
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, 3);
        for i in 0..n {
            let (e, de) = pow_and_deriv(p[2], s.l[i]);
            r[i] = s.w[i] * (p[0] + p[1] * e - s.y[i]);
            j[(i, 0)] = s.w[i];
            j[(i, 1)] = s.w[i] * e;
            j[(i, 2)] = s.w[i] * p[1] * de;
        }
        (r, j)
    };
    if hi - lo < 1e-12 {
        let res = levenberg_marquardt(
            model,
            &[s.y[0], 0.0, 1.0],
            &[s.y[0], 0.0, 1.0],
            &[s.y[0], 0.0, 1.0],
            &LmOptions::default(),
        );
        return (res, false);
    }
    let last = *s.y.last().unwrap();
    let a0 = if last < 2.0 / 3.0 {
        last - 0.05 * (hi - lo)
    } else {
        2.0 / 3.0
    };
    let shifted: Vec<f64> = s.y.iter().map(|y| y - a0).collect();
    let (q0, b0, clipped) = log_linear(&s.l, &shifted);
    let res = levenberg_marquardt(
        model,
        &[a0, b0.min(2.0), q0.clamp(0.0, 1.0)],
        &[-0.5, -2.0, 0.0],
        &[2.0, 2.0, 1.0],
        &LmOptions::default(),
    );
    (res, clipped)
}

/// Fit of `c q^l`.
fn fit_pure_exp(s: &Series) -> (LmResult, bool) {
    let n = s.l.len();
    let model = |p: &[f64]| {
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, 2);
        for i in 0..n {
            let (e, de) = pow_and_deriv(p[1], s.l[i]);
            r[i] = s.w[i] * (p[0] * e - s.y[i]);
            j[(i, 0)] = s.w[i] * e;
            j[(i, 1)] = s.w[i] * p[0] * de;
        }
        (r, j)
    };
    let (q0, c0, clipped) = log_linear(&s.l, &s.y);
    let res = levenberg_marquardt(
        model,
        &[c0.min(2.0), q0.min(1.0)],
        &[-2.0, 0.0],
        &[2.0, 1.0],
        &LmOptions::default(),
    );
    (res, clipped)
}

/// Fit of `a + b q₊^l + d q₋^l`, started from a single-exponential fit.
fn fit_two_exp(s: &Series, start: &[f64]) -> LmResult {
    let n = s.l.len();
    let model = |p: &[f64]| {
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, 5);
        for i in 0..n {
            let (e1, d1) = pow_and_deriv(p[2], s.l[i]);
            let (e2, d2) = pow_and_deriv(p[4], s.l[i]);
            r[i] = s.w[i] * (p[0] + p[1] * e1 + p[3] * e2 - s.y[i]);
            j[(i, 0)] = s.w[i];
            j[(i, 1)] = s.w[i] * e1;
            j[(i, 2)] = s.w[i] * p[1] * d1;
            j[(i, 3)] = s.w[i] * e2;
            j[(i, 4)] = s.w[i] * p[3] * d2;
        }
        (r, j)
    };
    let x0 = [start[0], 0.9 * start[1], start[2], 0.1 * start[1], start[2].powi(3)];
    levenberg_marquardt(
        model,
        &x0,
        &[-0.5, -2.0, 0.0, -2.0, 0.0],
        &[2.0, 2.0, 1.0, 2.0, 1.0],
        &LmOptions::default(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlindRbFit {
    /// `(a, b, q_leak)` of `S+F = a + b q_leak^l`.
    pub plus: [f64; 3],
    pub plus_std: Option<[f64; 3]>,
    /// `(c, q_rb)` of `S−F = c q_rb^l`.
    pub minus: [f64; 2],
    pub q_rb: f64,
    pub q_leak: f64,
    pub clipped: bool,
    pub chi2: f64,
    pub converged: bool,
}

/// Fits the survival ± flip combinations separately.
pub fn blind_rb_combos(curve: &PopulationCurve) -> Result<BlindRbFit> {
    check_curve(curve)?;
    let plus = series(curve, |p| p.p_survival + p.p_flip);
    let minus = series(curve, |p| p.p_survival - p.p_flip);
    let (rp, c1) = fit_offset_exp(&plus);
    let (rm, c2) = fit_pure_exp(&minus);
    let plus_std = rp.std_errors().map(|s| [s[0], s[1], s[2]]);
    Ok(BlindRbFit {
        plus: [rp.params[0], rp.params[1], rp.params[2]],
        plus_std,
        minus: [rm.params[0], rm.params[1]],
        q_rb: rm.params[1],
        q_leak: rp.params[2],
        clipped: c1 || c2,
        chi2: rp.chi2 + rm.chi2,
        converged: rp.converged && rm.converged,
    })
}

fn assemble(
    model: FitModel,
    params: FitParams,
    q_leak_minus: Option<f64>,
    residuals: ResidualStats,
    clipped: bool,
) -> DecayFit {
    let (q_rb, q_leak_plus, eps_spam) = match params {
        FitParams::Symmetric {
            eps_rb,
            eps_leak,
            eps_spam,
        } => {
            let r = TransferRates { eps_rb, eps_leak };
            let spam = (model == FitModel::WithSpam).then(|| Estimate::point(eps_spam));
            (r.q_rb(), r.q_leak(), spam)
        }
        FitParams::Blind { q_rb, q_leak, .. } => (q_rb, q_leak, None),
        FitParams::ThreeExp { q_rb, q_plus, .. } => (q_rb, q_plus, None),
    };
    let rates = TransferRates::from_decays(q_rb, q_leak_plus);
    let estimates = estimators_from_decays(q_rb, q_leak_plus);
    DecayFit {
        model,
        params,
        eps_rb: Estimate::point(rates.eps_rb),
        eps_leak: Estimate::point(rates.eps_leak),
        eps_spam,
        q_rb,
        q_leak_plus,
        q_leak_minus,
        residuals,
        estimates,
        eps_2q_transfer: Estimate::point(estimates.eps_2q_transfer),
        eps_2q_group: Estimate::point(estimates.eps_2q_group),
        clipped,
    }
}

/// Joint weighted least-squares fit of a decay model to a curve.
pub fn fit_slerb(curve: &PopulationCurve, model: FitModel) -> Result<DecayFit> {
    check_curve(curve)?;
    let n = curve.n_lengths();
    match model {
        FitModel::NoSpam | FitModel::WithSpam => {
            let with_spam = model == FitModel::WithSpam;
            let (params, res, clipped) = fit_symmetric(curve, with_spam)?;
            if !res.converged {
                return Err(SlerbError::FitFailed(format!(
                    "symmetric fit stopped after {} iterations, chi2 {:.3e}",
                    res.iterations, res.chi2
                )));
            }
            let stats = ResidualStats {
                chi2: res.chi2,
                dof: (3 * n).saturating_sub(res.params.len()),
                iterations: res.iterations,
                converged: res.converged,
            };
            let mut fit = assemble(model, params.clone(), None, stats, clipped);
            if let FitParams::Symmetric { eps_rb, eps_leak, .. } = params {
                fit.eps_rb.value = eps_rb;
                fit.eps_leak.value = eps_leak;
            }
            Ok(fit)
        }
        FitModel::BlindRb => {
            let b = blind_rb_combos(curve)?;
            let params = FitParams::Blind {
                a: b.plus[0],
                b: b.plus[1],
                q_leak: b.plus[2],
                c: b.minus[0],
                q_rb: b.minus[1],
            };
            let stats = ResidualStats {
                chi2: b.chi2,
                dof: (2 * n).saturating_sub(5),
                iterations: 0,
                converged: b.converged,
            };
            Ok(assemble(model, params, None, stats, b.clipped))
        }
        FitModel::GeneralThreeExp => {
            let b = blind_rb_combos(curve)?;
            let plus = series(curve, |p| p.p_survival + p.p_flip);
            let res = fit_two_exp(&plus, &b.plus);
            let p = &res.params;
            // Larger base is reported as q₊.
            let (bp, qp, dm, qm) = if p[2] >= p[4] {
                (p[1], p[2], p[3], p[4])
            } else {
                (p[3], p[4], p[1], p[2])
            };
            let params = FitParams::ThreeExp {
                a: p[0],
                b: bp,
                q_plus: qp,
                d: dm,
                q_minus: qm,
                c: b.minus[0],
                q_rb: b.minus[1],
            };
            let stats = ResidualStats {
                chi2: res.chi2,
                dof: (2 * n).saturating_sub(7),
                iterations: res.iterations,
                converged: res.converged && b.converged,
            };
            Ok(assemble(model, params, Some(qm), stats, b.clipped))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub std: Vec<f64>,
    pub n_resamples: usize,
    pub n_failed: usize,
}

impl BootstrapSummary {
    pub fn interval(&self, name: &str) -> Option<[f64; 2]> {
        let k = self.names.iter().position(|n| n == name)?;
        Some([self.lower[k], self.upper[k]])
    }

    pub fn std_of(&self, name: &str) -> Option<f64> {
        let k = self.names.iter().position(|n| n == name)?;
        Some(self.std[k])
    }
}

/// Linear-interpolated percentile of sorted data, `q ∈ [0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Non-parametric bootstrap over randomizations; reports the 16th and 84th
/// percentiles of each summary quantity.
pub fn bootstrap_ci(
    curve: &PopulationCurve,
    fitter: impl Fn(&PopulationCurve) -> Result<DecayFit> + Sync,
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapSummary> {
    if curve.points.iter().any(|p| p.len() < 2) {
        return Err(SlerbError::InvalidCurve(
            "bootstrap needs at least 2 randomizations per length".into(),
        ));
    }
    let names: Vec<String> = fitter(curve)?.summary().iter().map(|(n, _)| n.to_string()).collect();
    let draws: Vec<Option<Vec<f64>>> = (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stage_rng(seed, "bootstrap", i as u64);
            let sample = curve.resample(&mut rng);
            fitter(&sample)
                .ok()
                .map(|f| f.summary().iter().map(|(_, v)| *v).collect())
        })
        .collect();
    let ok: Vec<&Vec<f64>> = draws.iter().flatten().collect();
    if ok.is_empty() {
        return Err(SlerbError::FitFailed("every bootstrap resample failed".into()));
    }
    let mut summary = BootstrapSummary {
        names: names.clone(),
        lower: Vec::new(),
        upper: Vec::new(),
        std: Vec::new(),
        n_resamples,
        n_failed: n_resamples - ok.len(),
    };
    for k in 0..names.len() {
        let mut xs: Vec<f64> = ok.iter().map(|v| v[k]).collect();
        xs.sort_by(f64::total_cmp);
        summary.lower.push(percentile(&xs, 0.16));
        summary.upper.push(percentile(&xs, 0.84));
        summary.std.push(mean_std(&xs).1);
    }
    Ok(summary)
}

/// Point fit plus bootstrap intervals attached to every estimate. Intervals
/// are widened where needed so they bracket the point estimate.
pub fn fit_with_bootstrap(
    curve: &PopulationCurve,
    model: FitModel,
    n_resamples: usize,
    seed: u64,
) -> Result<(DecayFit, BootstrapSummary)> {
    let mut fit = fit_slerb(curve, model)?;
    let boot = bootstrap_ci(curve, |c| fit_slerb(c, model), n_resamples, seed)?;
    for (k, name) in boot.names.iter().enumerate() {
        if let Some(e) = fit.estimate_mut(name) {
            e.ci = Some([boot.lower[k].min(e.value), boot.upper[k].max(e.value)]);
            e.std = Some(boot.std[k]);
        }
    }
    Ok((fit, boot))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryVerdict {
    SymmetricConsistent,
    AntisymmetricFlagged,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteReport {
    pub verdict: SymmetryVerdict,
    pub asymptotes: PopulationVector,
    pub sigma: [f64; 3],
    /// `q_leak^{l_max}` of the fitted leakage decay.
    pub depth: f64,
}

/// Fits free asymptotes from the survival+flip series and tests them against 1/3.
pub fn asymptote_diagnostic(curve: &PopulationCurve) -> Result<AsymptoteReport> {
    let b = blind_rb_combos(curve)?;
    let [a, amp, q] = b.plus;
    let l_max = *curve.lengths.last().unwrap() as i32;
    let depth = if amp.abs() < 1e-12 { 1.0 } else { q.powi(l_max) };
    let sigma_a = b.plus_std.map_or(f64::INFINITY, |s| s[0]).max(1e-12);
    let asymptotes = PopulationVector::new(a / 2.0, a / 2.0, 1.0 - a);
    let sigma = [sigma_a / 2.0, sigma_a / 2.0, sigma_a];
    let verdict = if depth >= 0.1 {
        SymmetryVerdict::Inconclusive
    } else if asymptotes
        .as_array()
        .iter()
        .zip(sigma)
        .all(|(x, s)| (x - 1.0 / 3.0).abs() <= 3.0 * s)
    {
        SymmetryVerdict::SymmetricConsistent
    } else {
        SymmetryVerdict::AntisymmetricFlagged
    };
    Ok(AsymptoteReport {
        verdict,
        asymptotes,
        sigma,
        depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::errmodel::{analytic_populations, analytic_populations_spam, matrix_power_populations};
    use crate::seeding::rng_from_seed;
    use approx::assert_abs_diff_eq;

    fn lengths() -> Vec<usize> {
        vec![0, 1, 2, 4, 8, 16, 32, 64, 100, 150, 200]
    }

    #[test]
    fn exact_recovery_from_matrix_powers() {
        let r = TransferRates::new(3.2e-4, 2.2e-4).unwrap();
        let curve = PopulationCurve::from_model(&lengths(), 3, |l| matrix_power_populations(&r, l as u32));
        let fit = fit_slerb(&curve, FitModel::NoSpam).unwrap();
        assert_abs_diff_eq!(fit.eps_rb.value, 3.2e-4, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.eps_leak.value, 2.2e-4, epsilon = 1e-10);
    }

    #[test]
    fn zero_error_curve() {
        let curve = PopulationCurve::from_model(&lengths(), 2, |_| PopulationVector::initial());
        let fit = fit_slerb(&curve, FitModel::NoSpam).unwrap();
        assert!(fit.eps_rb.value.abs() < 1e-9);
        assert!(fit.eps_leak.value.abs() < 1e-9);
        let e = estimate_all(&fit);
        assert!(e.eps_2q_transfer.abs() < 1e-9 && e.eps_2q_group.abs() < 1e-9);
    }

    #[test]
    fn spam_model_recovery() {
        let r = TransferRates::new(3.2e-4, 2.2e-4).unwrap();
        let curve = PopulationCurve::from_model(&lengths(), 2, |l| analytic_populations_spam(&r, 5.9e-3, l as u32));
        let fit = fit_slerb(&curve, FitModel::WithSpam).unwrap();
        assert_abs_diff_eq!(fit.eps_rb.value, 3.2e-4, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.eps_leak.value, 2.2e-4, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.eps_spam.unwrap().value, 5.9e-3, epsilon = 1e-9);
    }

    #[test]
    fn blind_combos_match_symmetric_bases() {
        let r = TransferRates::new(2e-3, 1e-3).unwrap();
        let curve = PopulationCurve::from_model(&lengths(), 2, |l| analytic_populations(&r, l as u32));
        let b = blind_rb_combos(&curve).unwrap();
        assert_abs_diff_eq!(b.q_leak, r.q_leak(), epsilon = 1e-8);
        assert_abs_diff_eq!(b.q_rb, r.q_rb(), epsilon = 1e-8);
        let r0 = TransferRates::new(2e-3, 0.0).unwrap();
        let curve = PopulationCurve::from_model(&lengths(), 2, |l| analytic_populations(&r0, l as u32));
        let means = curve.mean_populations();
        assert!(means.iter().all(|p| (p.p_survival + p.p_flip - 1.0).abs() < 1e-12));
        let b = blind_rb_combos(&curve).unwrap();
        assert_abs_diff_eq!(b.plus[0] + b.plus[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn three_exp_model_runs() {
        let r = TransferRates::new(2e-3, 1e-3).unwrap();
        let curve = PopulationCurve::from_model(&lengths(), 2, |l| analytic_populations(&r, l as u32));
        let fit = fit_slerb(&curve, FitModel::GeneralThreeExp).unwrap();
        for &l in &lengths() {
            assert!(fit.predict(l).max_abs_diff(&analytic_populations(&r, l as u32)) < 1e-6);
        }
    }

    #[test]
    fn estimator_values() {
        let rates = TransferRates::new(3.2e-4, 2.2e-4).unwrap();
        let e = estimators_from_decays(rates.q_rb(), rates.q_leak());
        assert_abs_diff_eq!(
            e.eps_2q_transfer,
            6.0 / 13.0 * (1.2 * 3.2e-4 + 0.8 * 2.2e-4),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            e.eps_2q_group,
            6.0 / 13.0 * (0.8 * 3.2e-4 + 1.45 * 2.2e-4),
            epsilon = 1e-12
        );
        let r = TransferRates::new(1e-3, 1e-3).unwrap();
        let e = estimators_from_decays(r.q_rb(), r.q_leak());
        assert_abs_diff_eq!(e.eps_2q_transfer, 9.2308e-4, epsilon = 1e-7);
        assert_abs_diff_eq!(e.eps_2q_group, 1.0385e-3, epsilon = 1e-7);
    }

    #[test]
    fn relative_error_values() {
        assert_eq!(relative_error(0.7, 0.7), 0.0);
        assert_abs_diff_eq!(relative_error(0.9, 1.0), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn rejects_short_curves() {
        let curve = PopulationCurve::from_model(&[0, 1, 2], 2, |_| PopulationVector::initial());
        assert!(matches!(
            fit_slerb(&curve, FitModel::NoSpam),
            Err(SlerbError::InvalidCurve(_))
        ));
    }

    #[test]
    fn identical_randomizations_give_zero_width() {
        let r = TransferRates::new(1e-3, 1e-3).unwrap();
        let curve = PopulationCurve::from_model(&lengths(), 4, |l| analytic_populations(&r, l as u32));
        let boot = bootstrap_ci(&curve, |c| fit_slerb(c, FitModel::NoSpam), 20, 1).unwrap();
        for k in 0..boot.names.len() {
            assert!(boot.upper[k] - boot.lower[k] < 1e-12);
        }
    }

    #[test]
    fn asymptote_verdicts() {
        let deep: Vec<usize> = vec![0, 10, 25, 50, 100, 200, 400, 700, 1000];
        let r = TransferRates::new(1e-3, 5e-3).unwrap();
        let mut rng = rng_from_seed(8);
        let curve =
            PopulationCurve::sample_from_model(&deep, 50, 100, &mut rng, |l| analytic_populations(&r, l as u32));
        let rep = asymptote_diagnostic(&curve).unwrap();
        assert_eq!(rep.verdict, SymmetryVerdict::SymmetricConsistent);

        let r0 = TransferRates::new(1e-3, 0.0).unwrap();
        let curve = PopulationCurve::from_model(&deep, 4, |l| analytic_populations(&r0, l as u32));
        assert_eq!(
            asymptote_diagnostic(&curve).unwrap().verdict,
            SymmetryVerdict::Inconclusive
        );
    }

    #[test]
    fn singlet_pumping_toy_is_flagged() {
        // Uniform mixing over {target, flip, Ψ⁺, Ψ⁻} settles at (1/4, 1/4, 1/2).
        let e = 5e-3;
        let m = nalgebra::Matrix4::from_fn(|i, j| if i == j { 1.0 - 3.0 * e } else { e });
        let deep: Vec<usize> = vec![0, 10, 25, 50, 100, 200, 400, 700, 1000];
        let mut rng = rng_from_seed(21);
        let curve = PopulationCurve::sample_from_model(&deep, 50, 100, &mut rng, |l| {
            let p = m.pow(l as u32) * nalgebra::Vector4::new(1.0, 0.0, 0.0, 0.0);
            PopulationVector::new(p[0], p[1], p[2] + p[3])
        });
        let rep = asymptote_diagnostic(&curve).unwrap();
        assert_eq!(rep.verdict, SymmetryVerdict::AntisymmetricFlagged);
        assert_abs_diff_eq!(rep.asymptotes.p_leak, 0.5, epsilon = 0.02);
    }
}
