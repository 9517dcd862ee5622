//! Per-length population records and shot sampling.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::errmodel::PopulationVector;
use crate::error::{Result, SlerbError};
use crate::msgates::{BasisState, Target};

/// Measured outcome of one randomization, indexed by 00, 01, 10, 11.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Counts([u64; 4]),
    Probabilities([f64; 4]),
}

impl Outcome {
    pub fn probabilities(&self) -> [f64; 4] {
        match *self {
            Outcome::Probabilities(p) => p,
            Outcome::Counts(n) => {
                let total: u64 = n.iter().sum();
                let t = total.max(1) as f64;
                [n[0] as f64 / t, n[1] as f64 / t, n[2] as f64 / t, n[3] as f64 / t]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Randomization {
    pub target: Target,
    pub outcome: Outcome,
}

impl Randomization {
    pub fn populations(&self) -> PopulationVector {
        let p = self.outcome.probabilities();
        PopulationVector::new(
            p[self.target.state().index()],
            p[self.target.other().index()],
            p[BasisState::S01.index()] + p[BasisState::S10.index()],
        )
    }

    /// Exact record for a population vector, written in the |00⟩ frame.
    pub fn from_populations(p: PopulationVector) -> Self {
        Self {
            target: Target::Ket00,
            outcome: Outcome::Probabilities([p.p_survival, p.p_leak / 2.0, p.p_leak / 2.0, p.p_flip]),
        }
    }
}

/// Multinomial counts over the four basis outcomes via sequential binomials.
pub fn sample_counts<R: Rng + ?Sized>(probs: [f64; 4], shots: u64, rng: &mut R) -> [u64; 4] {
    let mut counts = [0u64; 4];
    let mut left = shots;
    let mut mass = 1.0;
    for k in 0..3 {
        if left == 0 {
            break;
        }
        let p = if mass > 0.0 {
            (probs[k].max(0.0) / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let n = Binomial::new(left, p).expect("probability in [0,1]").sample(rng);
        counts[k] = n;
        left -= n;
        mass -= probs[k].max(0.0);
    }
    counts[3] = left;
    counts
}

/// Turns exact outcome probabilities into a record, sampling when `shots > 0`.
pub fn make_outcome<R: Rng + ?Sized>(probs: [f64; 4], shots: u64, rng: &mut R) -> Outcome {
    if shots == 0 {
        Outcome::Probabilities(probs)
    } else {
        Outcome::Counts(sample_counts(probs, shots, rng))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationCurve {
    pub lengths: Vec<usize>,
    pub points: Vec<Vec<Randomization>>,
    /// Shots per randomization; 0 means exact probabilities.
    pub shots: u64,
    pub seed: Option<u64>,
}

impl PopulationCurve {
    pub fn new(lengths: Vec<usize>, points: Vec<Vec<Randomization>>, shots: u64, seed: Option<u64>) -> Result<Self> {
        let c = Self {
            lengths,
            points,
            shots,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengths.len() != self.points.len() {
            return Err(SlerbError::InvalidCurve(format!(
                "{} lengths but {} point sets",
                self.lengths.len(),
                self.points.len()
            )));
        }
        if self.lengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SlerbError::InvalidCurve("lengths must be strictly increasing".into()));
        }
        for (l, pts) in self.lengths.iter().zip(&self.points) {
            if pts.is_empty() {
                return Err(SlerbError::InvalidCurve(format!("no randomizations at l={l}")));
            }
            for r in pts {
                let p = r.populations();
                if !p.is_valid() {
                    return Err(SlerbError::InvalidCurve(format!("invalid populations {p:?} at l={l}")));
                }
            }
        }
        Ok(())
    }

    /// A noiseless curve with `r` identical randomizations per length.
    pub fn from_model(lengths: &[usize], r: usize, model: impl Fn(usize) -> PopulationVector) -> Self {
        let points = lengths
            .iter()
            .map(|&l| vec![Randomization::from_populations(model(l)); r])
            .collect();
        Self {
            lengths: lengths.to_vec(),
            points,
            shots: 0,
            seed: None,
        }
    }

    /// Samples `r` randomizations of `shots` shots each from exact populations.
    pub fn sample_from_model<R: Rng + ?Sized>(
        lengths: &[usize],
        r: usize,
        shots: u64,
        rng: &mut R,
        model: impl Fn(usize) -> PopulationVector,
    ) -> Self {
        let points = lengths
            .iter()
            .map(|&l| {
                let p = model(l);
                (0..r)
                    .map(|_| {
                        let target = if rng.random::<bool>() {
                            Target::Ket11
                        } else {
                            Target::Ket00
                        };
                        let mut probs = [0.0; 4];
                        probs[target.state().index()] = p.p_survival;
                        probs[target.other().index()] = p.p_flip;
                        probs[1] = p.p_leak / 2.0;
                        probs[2] = p.p_leak / 2.0;
                        Randomization {
                            target,
                            outcome: make_outcome(probs, shots, rng),
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            lengths: lengths.to_vec(),
            points,
            shots,
            seed: None,
        }
    }

    pub fn n_lengths(&self) -> usize {
        self.lengths.len()
    }

    pub fn populations(&self, i: usize) -> Vec<PopulationVector> {
        self.points[i].iter().map(|r| r.populations()).collect()
    }

    pub fn mean_populations(&self) -> Vec<PopulationVector> {
        (0..self.n_lengths())
            .map(|i| {
                let ps = self.populations(i);
                let n = ps.len() as f64;
                let sum = ps.iter().fold([0.0; 3], |mut acc, p| {
                    for (a, v) in acc.iter_mut().zip(p.as_array()) {
                        *a += v;
                    }
                    acc
                });
                PopulationVector::new(sum[0] / n, sum[1] / n, sum[2] / n)
            })
            .collect()
    }

    /// Mean and sample standard deviation across randomizations of `f(p)`.
    pub fn series_stats(&self, f: impl Fn(&PopulationVector) -> f64) -> Vec<(f64, f64)> {
        (0..self.n_lengths())
            .map(|i| {
                let xs: Vec<f64> = self.populations(i).iter().map(&f).collect();
                mean_std(&xs)
            })
            .collect()
    }

    /// Resamples randomizations with replacement at each length.
    pub fn resample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let points = self
            .points
            .iter()
            .map(|pts| (0..pts.len()).map(|_| pts[rng.random_range(0..pts.len())]).collect())
            .collect();
        Self {
            lengths: self.lengths.clone(),
            points,
            shots: self.shots,
            seed: self.seed,
        }
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts_conserve_shots() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = sample_counts([0.5, 0.1, 0.1, 0.3], 1000, &mut rng);
        assert_eq!(c.iter().sum::<u64>(), 1000);
        assert_eq!(sample_counts([1.0, 0.0, 0.0, 0.0], 50, &mut rng), [50, 0, 0, 0]);
        assert_eq!(sample_counts([0.0, 0.0, 0.0, 1.0], 50, &mut rng), [0, 0, 0, 50]);
    }

    #[test]
    fn multinomial_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = [0.4, 0.05, 0.15, 0.4];
        let n = 20_000u64;
        let mut acc = [0u64; 4];
        for _ in 0..100 {
            let c = sample_counts(p, n / 100, &mut rng);
            for k in 0..4 {
                acc[k] += c[k];
            }
        }
        for k in 0..4 {
            let sd = (n as f64 * p[k] * (1.0 - p[k])).sqrt();
            assert!((acc[k] as f64 - n as f64 * p[k]).abs() < 5.0 * sd);
        }
    }

    #[test]
    fn target_frame_labels() {
        let r = Randomization {
            target: Target::Ket11,
            outcome: Outcome::Counts([10, 3, 2, 85]),
        };
        let p = r.populations();
        assert_eq!(p.p_survival, 0.85);
        assert_eq!(p.p_flip, 0.10);
        assert!((p.p_leak - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_lengths() {
        let c = PopulationCurve::from_model(&[0, 1], 1, |_| PopulationVector::initial());
        assert!(c.validate().is_ok());
        let mut bad = c.clone();
        bad.lengths = vec![1, 1];
        assert!(bad.validate().is_err());
    }
}
