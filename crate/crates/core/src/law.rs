//! Step distributions for walkers, walls and environments.
//!
//! Two families cover everything the estimators need: Gaussian laws (exact
//! closed forms everywhere) and finite-support laws (exact enumeration,
//! exact tilting). Both are closed under exponential tilting, which keeps
//! the tilting module free of quadrature.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A step distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepLaw {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    /// Atoms `(value, probability)`, sorted by value, probabilities summing
    /// to one.
    FiniteSupport {
        atoms: Vec<(f64, f64)>,
    },
}

impl StepLaw {
    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() || !sd.is_finite() || sd <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "gaussian law needs finite mean and sd > 0, got mean={mean} sd={sd}"
            )));
        }
        Ok(StepLaw::Gaussian { mean, sd })
    }

    /// Finite-support law from raw atoms; validates, sorts, merges
    /// duplicates and renormalizes (the input must already sum to one
    /// within 1e-9).
    pub fn finite(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidInput("finite law needs at least one atom".into()));
        }
        for &(v, p) in atoms {
            if !v.is_finite() || !p.is_finite() || p <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "bad atom (value={v}, prob={p}): values finite, probs > 0"
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "atom probabilities sum to {total}, expected 1"
            )));
        }
        let mut sorted = atoms.to_vec();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (v, p) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        for a in &mut merged {
            a.1 /= total;
        }
        Ok(StepLaw::FiniteSupport { atoms: merged })
    }

    /// Two-point law taking `up` with probability `p_up`, else `down`.
    pub fn two_point(up: f64, down: f64, p_up: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_up) || p_up == 0.0 || p_up == 1.0 {
            return Err(Error::InvalidInput(format!(
                "two-point probability must lie strictly in (0,1), got {p_up}"
            )));
        }
        if up == down {
            return Err(Error::InvalidInput("two-point values must differ".into()));
        }
        Self::finite(&[(up, p_up), (down, 1.0 - p_up)])
    }

    /// Fair +/-1 step.
    pub fn rademacher() -> Self {
        StepLaw::two_point(1.0, -1.0, 0.5).unwrap()
    }

    pub fn mean(&self) -> f64 {
        match self {
            StepLaw::Gaussian { mean, .. } => *mean,
            StepLaw::FiniteSupport { atoms } => atoms.iter().map(|(v, p)| v * p).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            StepLaw::Gaussian { sd, .. } => sd * sd,
            StepLaw::FiniteSupport { atoms } => {
                let m = self.mean();
                atoms.iter().map(|(v, p)| p * (v - m) * (v - m)).sum()
            }
        }
    }

    pub fn second_moment(&self) -> f64 {
        let m = self.mean();
        self.variance() + m * m
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Largest attainable step; `None` means unbounded above.
    pub fn sup_support(&self) -> Option<f64> {
        match self {
            StepLaw::Gaussian { .. } => None,
            StepLaw::FiniteSupport { atoms } => Some(atoms.last().unwrap().0),
        }
    }

    /// Smallest attainable step; `None` means unbounded below.
    pub fn inf_support(&self) -> Option<f64> {
        match self {
            StepLaw::Gaussian { .. } => None,
            StepLaw::FiniteSupport { atoms } => Some(atoms.first().unwrap().0),
        }
    }

    pub fn is_finite_support(&self) -> bool {
        matches!(self, StepLaw::FiniteSupport { .. })
    }

    pub fn atoms(&self) -> Option<&[(f64, f64)]> {
        match self {
            StepLaw::FiniteSupport { atoms } => Some(atoms),
            _ => None,
        }
    }

    /// Same law shifted to mean zero.
    pub fn centered(&self) -> StepLaw {
        let m = self.mean();
        match self {
            StepLaw::Gaussian { sd, .. } => StepLaw::Gaussian { mean: 0.0, sd: *sd },
            StepLaw::FiniteSupport { atoms } => StepLaw::FiniteSupport {
                atoms: atoms.iter().map(|(v, p)| (v - m, *p)).collect(),
            },
        }
    }

    /// Upper limit of the tilt parameters this family accepts.
    ///
    /// Chosen so that `E exp(theta_max |X - EX|)` stays O(1) uniformly over
    /// the family: half of `2/scale`, with scale the support radius for
    /// bounded laws and the standard deviation for Gaussians.
    pub fn theta_max(&self) -> f64 {
        match self {
            StepLaw::Gaussian { sd, .. } => 1.0 / sd,
            StepLaw::FiniteSupport { atoms } => {
                let m: f64 = atoms.iter().map(|(v, p)| v * p).sum();
                let radius = atoms
                    .iter()
                    .map(|(v, _)| (v - m).abs())
                    .fold(0.0f64, f64::max);
                if radius == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / radius
                }
            }
        }
    }

    /// Log moment generating function `log E exp(theta X)`.
    pub fn log_mgf(&self, theta: f64) -> f64 {
        match self {
            StepLaw::Gaussian { mean, sd } => theta * mean + 0.5 * theta * theta * sd * sd,
            StepLaw::FiniteSupport { atoms } => {
                let mx = atoms
                    .iter()
                    .map(|(v, _)| theta * v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = atoms.iter().map(|(v, p)| p * (theta * v - mx).exp()).sum();
                mx + s.ln()
            }
        }
    }

    /// Mean of the law tilted by `theta` (the logarithmic derivative of the
    /// moment generating function).
    pub fn tilted_mean(&self, theta: f64) -> f64 {
        match self {
            StepLaw::Gaussian { mean, sd } => mean + theta * sd * sd,
            StepLaw::FiniteSupport { atoms } => {
                let mx = atoms
                    .iter()
                    .map(|(v, _)| theta * v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = atoms.iter().map(|(v, p)| p * (theta * v - mx).exp()).sum();
                let s: f64 = atoms
                    .iter()
                    .map(|(v, p)| v * p * (theta * v - mx).exp())
                    .sum();
                s / z
            }
        }
    }

    /// Third central moment of the law tilted by `theta`; used to bound how
    /// far the tilted mean can drift from its linearization.
    pub fn tilted_third_central_moment(&self, theta: f64) -> f64 {
        match self {
            // tilting shifts a Gaussian without changing central moments
            StepLaw::Gaussian { .. } => 0.0,
            StepLaw::FiniteSupport { atoms } => {
                let mx = atoms
                    .iter()
                    .map(|(v, _)| theta * v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = atoms.iter().map(|(v, p)| p * (theta * v - mx).exp()).sum();
                let m = self.tilted_mean(theta);
                atoms
                    .iter()
                    .map(|(v, p)| {
                        let d = v - m;
                        p * (theta * v - mx).exp() * d * d * d
                    })
                    .sum::<f64>()
                    / z
            }
        }
    }

    /// The tilted law itself (family is closed under tilting).
    pub fn tilted(&self, theta: f64) -> StepLaw {
        match self {
            StepLaw::Gaussian { mean, sd } => StepLaw::Gaussian {
                mean: mean + theta * sd * sd,
                sd: *sd,
            },
            StepLaw::FiniteSupport { atoms } => {
                let mx = atoms
                    .iter()
                    .map(|(v, _)| theta * v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut new: Vec<(f64, f64)> = atoms
                    .iter()
                    .map(|(v, p)| (*v, p * (theta * v - mx).exp()))
                    .collect();
                let z: f64 = new.iter().map(|a| a.1).sum();
                for a in &mut new {
                    a.1 /= z;
                }
                StepLaw::FiniteSupport { atoms: new }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            StepLaw::Gaussian { mean, sd } => {
                Normal::new(*mean, *sd).unwrap().sample(rng)
            }
            StepLaw::FiniteSupport { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                atoms.last().unwrap().0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rademacher_moments() {
        let l = StepLaw::rademacher();
        assert_abs_diff_eq!(l.mean(), 0.0);
        assert_abs_diff_eq!(l.variance(), 1.0);
        assert_eq!(l.sup_support(), Some(1.0));
        assert_eq!(l.inf_support(), Some(-1.0));
        assert_abs_diff_eq!(l.theta_max(), 1.0);
    }

    #[test]
    fn fair_sign_tilted_mean_is_tanh() {
        let l = StepLaw::rademacher();
        for theta in [0.05, 0.2, 0.5, 0.9] {
            assert_abs_diff_eq!(l.tilted_mean(theta), theta.tanh(), epsilon = 1e-14);
            assert_abs_diff_eq!(
                l.log_mgf(theta),
                theta.cosh().ln(),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn tilted_fair_sign_probability() {
        // theta = 0.5 puts e^0.5/(e^0.5 + e^-0.5) = 0.731058... on +1
        let t = StepLaw::rademacher().tilted(0.5);
        let atoms = t.atoms().unwrap();
        let p_up = atoms.iter().find(|a| a.0 == 1.0).unwrap().1;
        assert_abs_diff_eq!(p_up, 0.7310585786300049, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_tilt_shifts_mean_only() {
        let l = StepLaw::gaussian(0.0, 1.0).unwrap();
        let t = l.tilted(0.7);
        match t {
            StepLaw::Gaussian { mean, sd } => {
                assert_abs_diff_eq!(mean, 0.7);
                assert_abs_diff_eq!(sd, 1.0);
            }
            _ => panic!("gaussian family not closed under tilt"),
        }
        assert_abs_diff_eq!(l.log_mgf(0.7), 0.5 * 0.49, epsilon = 1e-15);
    }

    #[test]
    fn log_mgf_at_zero_vanishes() {
        for l in [
            StepLaw::rademacher(),
            StepLaw::gaussian(0.3, 2.0).unwrap(),
            StepLaw::two_point(2.0, -1.0, 1.0 / 3.0).unwrap(),
        ] {
            assert_abs_diff_eq!(l.log_mgf(0.0), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn centered_two_point_has_zero_mean() {
        let l = StepLaw::two_point(2.0, -1.0, 0.25).unwrap().centered();
        assert_abs_diff_eq!(l.mean(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sample_moments_match() {
        let l = StepLaw::two_point(1.5, -0.5, 0.25).unwrap();
        let mut rng = RngStream::new(3, 1).rng();
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| l.sample(&mut rng)).collect();
        let m = crate::stats::mean(&xs);
        let v = crate::stats::sample_var(&xs);
        assert_abs_diff_eq!(m, l.mean(), epsilon = 0.01);
        assert_abs_diff_eq!(v, l.variance(), epsilon = 0.02);
    }

    #[test]
    fn invalid_constructions_rejected() {
        assert!(StepLaw::gaussian(0.0, 0.0).is_err());
        assert!(StepLaw::gaussian(f64::NAN, 1.0).is_err());
        assert!(StepLaw::finite(&[(0.0, 0.7)]).is_err());
        assert!(StepLaw::two_point(1.0, -1.0, 0.0).is_err());
    }
}
