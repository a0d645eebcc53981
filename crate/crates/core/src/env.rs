//! Random-environment step models.
//!
//! Each model draws, independently per time step, a step law for the walker.
//! Averaging the step against its own law splits the walk into a centered
//! part `B` (what the walker does given the environment) and a wall `W`
//! built from the conditional means with flipped sign:
//!
//! `S_n = sum X_j`,  `W_n = -sum E(X_j | law_j)`,  `B_n = S_n + W_n`.
//!
//! Staying nonnegative for `S` is then the same event as `B` staying above
//! the frozen wall `W`, which is how environment runs reduce to wall runs.
//! The strength of the environment is summarized by the variance ratio
//! `Var(W_1) / Var(B_1)`; the three families below sweep that ratio from
//! zero to large values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::StepLaw;
use crate::rng::RngStream;

/// A family of i.i.d. random step laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnvModel {
    /// Step `N(m_n, step_sd^2)` with `m_n ~ N(0, mean_sd^2)`.
    /// `mean_sd = 0` degenerates to a deterministic Gaussian walk (no wall).
    GaussianRandomMean { mean_sd: f64, step_sd: f64 },
    /// Step +/-1 with `P(+1) = p_n`, where `p_n` is `p_low` or `1 - p_low`
    /// with equal probability. The symmetric pair keeps the wall increments
    /// centered.
    TwoPointRandomBias { p_low: f64 },
    /// Step `c_n + xi_n` with `xi_n` a fair sign and `c_n = +/-shift` with
    /// equal probability.
    ShiftedSignMixture { shift: f64 },
}

impl EnvModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EnvModel::GaussianRandomMean { mean_sd, step_sd } => {
                if !mean_sd.is_finite() || mean_sd < 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "mean spread {mean_sd} must be finite >= 0"
                    )));
                }
                if !step_sd.is_finite() || step_sd <= 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "step spread {step_sd} must be finite > 0"
                    )));
                }
            }
            EnvModel::TwoPointRandomBias { p_low } => {
                if !p_low.is_finite() || p_low <= 0.0 || p_low >= 1.0 {
                    return Err(Error::InvalidModel(format!(
                        "bias probability {p_low} must lie strictly in (0,1)"
                    )));
                }
            }
            EnvModel::ShiftedSignMixture { shift } => {
                if !shift.is_finite() || shift < 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "shift {shift} must be finite >= 0"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Variance of one wall increment `W_1 = -E(X_1 | law)`.
    pub fn var_w(&self) -> f64 {
        match *self {
            EnvModel::GaussianRandomMean { mean_sd, .. } => mean_sd * mean_sd,
            EnvModel::TwoPointRandomBias { p_low } => {
                let v = 1.0 - 2.0 * p_low; // conditional mean is +/-(1-2p)
                v * v
            }
            EnvModel::ShiftedSignMixture { shift } => shift * shift,
        }
    }

    /// Variance of one centered increment `B_1 = X_1 - E(X_1 | law)`.
    pub fn var_b(&self) -> f64 {
        match *self {
            EnvModel::GaussianRandomMean { step_sd, .. } => step_sd * step_sd,
            EnvModel::TwoPointRandomBias { p_low } => {
                let v = 1.0 - 2.0 * p_low;
                1.0 - v * v
            }
            EnvModel::ShiftedSignMixture { .. } => 1.0,
        }
    }

    /// `sqrt(Var W_1 / Var B_1)`: the wall-to-walker dispersion ratio that
    /// plays the role of the wall scaling parameter for plain walls.
    pub fn dispersion_ratio(&self) -> f64 {
        (self.var_w() / self.var_b()).sqrt()
    }

    /// Draw the environment for `n` steps and assemble its wall.
    pub fn sample(&self, n: usize, stream: RngStream) -> Result<EnvRealization> {
        self.validate()?;
        let mut rng = stream.rng();
        let mut laws = Vec::with_capacity(n);
        let mut wall = Vec::with_capacity(n + 1);
        wall.push(0.0);
        for _ in 0..n {
            let law = match *self {
                EnvModel::GaussianRandomMean { mean_sd, step_sd } => {
                    let m = if mean_sd > 0.0 {
                        StepLaw::gaussian(0.0, mean_sd)?.sample(&mut rng)
                    } else {
                        0.0
                    };
                    StepLaw::gaussian(m, step_sd)?
                }
                EnvModel::TwoPointRandomBias { p_low } => {
                    let p = if rng.random::<bool>() { p_low } else { 1.0 - p_low };
                    StepLaw::two_point(1.0, -1.0, p)?
                }
                EnvModel::ShiftedSignMixture { shift } => {
                    let c = if rng.random::<bool>() { shift } else { -shift };
                    if shift == 0.0 {
                        StepLaw::rademacher()
                    } else {
                        StepLaw::two_point(c + 1.0, c - 1.0, 0.5)?
                    }
                }
            };
            wall.push(wall.last().unwrap() - law.mean());
            laws.push(law);
        }
        Ok(EnvRealization {
            model: self.clone(),
            laws,
            wall,
        })
    }
}

use rand::Rng;

/// One frozen draw of an environment: the per-step laws and the wall they
/// induce.
#[derive(Debug, Clone)]
pub struct EnvRealization {
    pub model: EnvModel,
    /// Step law of `X_k` for `k = 1..=n` (index 0 is step 1).
    pub laws: Vec<StepLaw>,
    /// `W_0 = 0, W_1, ..., W_n` with `W_k = -sum_{j<=k} E(X_j | law_j)`.
    pub wall: Vec<f64>,
}

impl EnvRealization {
    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }

    /// Law of the centered increment `B_k - B_{k-1}` (1-based step index).
    pub fn centered_law(&self, k: usize) -> StepLaw {
        self.laws[k - 1].centered()
    }

    /// Sample one centered path `B_0 = 0, B_1, ..., B_n` given the frozen
    /// environment.
    pub fn sample_b_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut path = Vec::with_capacity(self.len() + 1);
        let mut b = 0.0;
        path.push(b);
        for law in &self.laws {
            b += law.sample(rng) - law.mean();
            path.push(b);
        }
        path
    }

    /// Smallest tilt ceiling across the realized (centered) step laws.
    pub fn theta_max(&self) -> f64 {
        self.laws
            .iter()
            .map(|l| l.centered().theta_max())
            .fold(f64::INFINITY, f64::min)
    }
}
