//! Box-bounded Levenberg–Marquardt for small least-squares problems.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct LmOptions {
    pub max_iter: usize,
    pub ftol: f64,
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            ftol: 1e-15,
            xtol: 1e-15,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Sum of squared weighted residuals.
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_residuals: usize,
    /// `JᵀJ` at the solution.
    pub jtj: DMatrix<f64>,
}

impl LmResult {
    /// Covariance `(JᵀJ)⁻¹`, inflated by the reduced χ² when it exceeds 1.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let dof = self.n_residuals.saturating_sub(self.params.len()).max(1) as f64;
        let scale = (self.chi2 / dof).max(1.0);
        self.jtj.clone().pseudo_inverse(1e-300).ok().map(|c| c * scale)
    }

    pub fn std_errors(&self) -> Option<Vec<f64>> {
        self.covariance()
            .map(|c| (0..self.params.len()).map(|i| c[(i, i)].max(0.0).sqrt()).collect())
    }
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Minimizes `Σ r_i(x)²` with `lower ≤ x ≤ upper`. `model` returns the residual
/// vector and its Jacobian.
pub fn levenberg_marquardt(
    model: impl Fn(&[f64]) -> (DVector<f64>, DMatrix<f64>),
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &LmOptions,
) -> LmResult {
    let mut x = x0.to_vec();
    clamp(&mut x, lower, upper);
    let (mut r, mut j) = model(&x);
    let mut cost = r.norm_squared();
    let mut jtj = j.transpose() * &j;
    let mut lambda = 1e-3 * (0..x.len()).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(1e-30);
    let mut converged = false;
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        let mut g = j.transpose() * &r;
        let mut a = jtj.clone();
        for i in 0..x.len() {
            a[(i, i)] += lambda * jtj[(i, i)].max(1e-30);
        }
        // Parameters pinned at a bound with the descent direction pointing
        // outward are held fixed for this step.
        for i in 0..x.len() {
            if (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0) {
                for k in 0..x.len() {
                    a[(i, k)] = 0.0;
                    a[(k, i)] = 0.0;
                }
                a[(i, i)] = 1.0;
                g[i] = 0.0;
            }
        }
        let step = match a.clone().cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => match a.lu().solve(&(-&g)) {
                Some(s) => s,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            },
        };
        let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        clamp(&mut trial, lower, upper);
        let moved: f64 = trial
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs() / (b.abs() + opts.xtol))
            .fold(0.0, f64::max);
        let (rt, jt) = model(&trial);
        let trial_cost = rt.norm_squared();
        if trial_cost.is_finite() && trial_cost <= cost {
            let rel = (cost - trial_cost) / cost.max(1e-300);
            x = trial;
            r = rt;
            j = jt;
            jtj = j.transpose() * &j;
            cost = trial_cost;
            lambda = (lambda / 3.0).max(1e-20);
            if rel < opts.ftol || moved < opts.xtol || cost < 1e-300 {
                converged = true;
                break;
            }
        } else {
            if moved < opts.xtol {
                converged = true;
                break;
            }
            lambda *= 4.0;
            if lambda > 1e20 {
                converged = true;
                break;
            }
        }
    }
    LmResult {
        params: x,
        chi2: cost,
        iterations: it,
        converged,
        n_residuals: r.len(),
        jtj,
    }
}
