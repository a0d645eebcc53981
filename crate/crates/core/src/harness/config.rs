//! Declarative experiment descriptions with a stable on-disk format.
//!
//! A config names everything a run depends on — walker, wall ensemble,
//! estimator, schedule, fit — so that re-running the same file reproduces
//! the same numbers bit for bit.

use serde::{Deserialize, Serialize};

use crate::analysis::FitScale;
use crate::error::{Error, Result};
use crate::law::StepLaw;
use crate::paths::OuParams;
use crate::survival::{EndWindow, Schedule, Walker};
use crate::walls::{WallKind, WallSpec};

/// Schema identifier written into every config file.
pub const CONFIG_SCHEMA: &str = "randwall.config.v1";

/// Which walker the experiment runs above the wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProcessKind {
    /// Brownian motion with variance `var_rate * t`.
    Bm { var_rate: f64 },
    /// Mean-reverting diffusion with rate `mu` and noise scale `sigma`.
    Ou { mu: f64, sigma: f64 },
    /// Random walk with the given step law, at integer times.
    Rw { law: StepLaw },
    /// Random walk in the same environment that generates the wall: the
    /// walker takes the centered steps of the wall's environment model.
    /// Requires an `Environment` wall whose centered law is the same at
    /// every step.
    RwEnv,
}

/// Estimator selection with its budget knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EstimatorChoice {
    /// Deterministic density-evolution grid.
    Grid { points_per_sd: f64, span_sds: f64, bridge: bool },
    /// Sequential Monte Carlo with systematic resampling.
    Smc { particles: usize, bridge: bool },
    /// Direct Monte Carlo over full paths.
    Direct { samples: usize, bridge: bool },
}

impl EstimatorChoice {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EstimatorChoice::Grid { points_per_sd, span_sds, .. } => {
                if !(points_per_sd.is_finite() && points_per_sd >= 1.0) {
                    return Err(Error::Config(format!(
                        "points_per_sd {points_per_sd} must be >= 1"
                    )));
                }
                if !(span_sds.is_finite() && span_sds >= 2.0) {
                    return Err(Error::Config(format!("span_sds {span_sds} must be >= 2")));
                }
                Ok(())
            }
            EstimatorChoice::Smc { particles, .. } => {
                if particles < 100 {
                    return Err(Error::Config(format!("particles {particles} must be >= 100")));
                }
                Ok(())
            }
            EstimatorChoice::Direct { samples, .. } => {
                if samples < 100 {
                    return Err(Error::Config(format!("samples {samples} must be >= 100")));
                }
                Ok(())
            }
        }
    }
}

/// How the decay exponent is read off the survival curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitCfg {
    pub scale: FitScale,
    /// Inclusive fit window `[lo, hi]` on the horizon axis.
    pub window_lo: f64,
    pub window_hi: f64,
}

impl FitCfg {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_lo.is_finite() && self.window_hi.is_finite()) {
            return Err(Error::Config("fit window bounds must be finite".into()));
        }
        if !(self.window_lo > 0.0 && self.window_lo < self.window_hi) {
            return Err(Error::Config(format!(
                "fit window ({}, {}) must satisfy 0 < lo < hi",
                self.window_lo, self.window_hi
            )));
        }
        Ok(())
    }
}

/// A complete, serializable experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Must equal [`CONFIG_SCHEMA`].
    pub schema: String,
    /// Free-form label; becomes part of the output metadata.
    pub name: String,
    pub process: ProcessKind,
    pub wall: WallSpec,
    /// Walker start position (relative to the wall start at 0).
    pub x0: f64,
    pub schedule: Schedule,
    /// Readout horizons, strictly increasing.
    pub horizons: Vec<f64>,
    pub estimator: EstimatorChoice,
    /// Optional end-position window shared by all readouts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<EndWindow>,
    pub fit: FitCfg,
    /// Number of independent wall draws (quenched replicas).
    pub n_walls: usize,
    /// Master seed; wall `w` derives all its randomness from `(seed, w)`.
    pub seed: u64,
}

impl ExperimentConfig {
    /// A ready-to-edit Brownian-above-Brownian-wall template.
    pub fn template() -> Self {
        ExperimentConfig {
            schema: CONFIG_SCHEMA.to_string(),
            name: "bm-above-bm-wall".to_string(),
            process: ProcessKind::Bm { var_rate: 1.0 },
            wall: WallSpec::new(WallKind::ScaledBrownian { beta: 1.0 }),
            x0: 1.0,
            schedule: Schedule::OctaveDoubling { first_horizon: 1.0, steps_per_octave: 64 },
            horizons: (6..=12).map(|k| (1u64 << k) as f64).collect(),
            estimator: EstimatorChoice::Grid {
                points_per_sd: 6.0,
                span_sds: 10.0,
                bridge: true,
            },
            window: None,
            fit: FitCfg { scale: FitScale::LogTime, window_lo: 256.0, window_hi: 4096.0 },
            n_walls: 8,
            seed: 1,
        }
    }

    /// The walker implied by `process` (and, for `RwEnv`, by the wall).
    pub fn walker(&self) -> Result<Walker> {
        match &self.process {
            ProcessKind::Bm { var_rate } => Ok(Walker::Brownian { var_rate: *var_rate }),
            ProcessKind::Ou { mu, sigma } => {
                Ok(Walker::Ou { params: OuParams::new(*mu, *sigma)? })
            }
            ProcessKind::Rw { law } => Ok(Walker::DiscreteStep { law: law.clone() }),
            ProcessKind::RwEnv => match &self.wall.kind {
                WallKind::Environment { model } => match *model {
                    crate::env::EnvModel::GaussianRandomMean { step_sd, .. } => {
                        // Centered steps are N(0, step_sd^2) at every time, so
                        // the walker is the unit-clock Gaussian walk.
                        Ok(Walker::Brownian { var_rate: step_sd * step_sd })
                    }
                    _ => Err(Error::Config(
                        "RwEnv needs an environment whose centered step law is \
                         time-homogeneous (GaussianRandomMean)"
                            .into(),
                    )),
                },
                _ => Err(Error::Config("RwEnv requires an Environment wall".into())),
            },
        }
    }

    /// Check internal consistency without running anything.
    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!(
                "schema '{}' not recognized (expected '{CONFIG_SCHEMA}')",
                self.schema
            )));
        }
        if self.name.is_empty() {
            return Err(Error::Config("name must be nonempty".into()));
        }
        self.wall.validate()?;
        self.schedule.validate()?;
        self.estimator.validate()?;
        self.fit.validate()?;
        let walker = self.walker()?;
        walker.validate()?;
        if !self.x0.is_finite() {
            return Err(Error::Config(format!("x0 {} must be finite", self.x0)));
        }
        if self.horizons.is_empty() {
            return Err(Error::Config("horizons must be nonempty".into()));
        }
        for pair in self.horizons.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(Error::Config(format!(
                    "horizons must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        let hmax = *self.horizons.last().unwrap();
        if !(hmax.is_finite() && self.horizons[0] > 0.0) {
            return Err(Error::Config("horizons must be finite and positive".into()));
        }
        if self.n_walls == 0 {
            return Err(Error::Config("n_walls must be >= 1".into()));
        }
        if self.fit.window_hi > hmax {
            return Err(Error::Config(format!(
                "fit window upper bound {} exceeds the largest horizon {hmax}",
                self.fit.window_hi
            )));
        }
        // Clock compatibility: integer-time walls and discrete walkers need
        // the integer schedule.
        let integer_wall = self.wall.kind.integer_times();
        let discrete_walker = matches!(walker, Walker::DiscreteStep { .. });
        let integer_schedule = matches!(self.schedule, Schedule::UniformInteger);
        if (integer_wall || discrete_walker) && !integer_schedule {
            return Err(Error::Config(
                "integer-time walls and discrete walkers require the uniform \
                 integer schedule"
                    .into(),
            ));
        }
        if integer_schedule {
            for &h in &self.horizons {
                if h.fract() != 0.0 {
                    return Err(Error::Config(format!(
                        "integer schedule requires integer horizons, got {h}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Serialize to TOML (the on-disk format).
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("config serialization failed: {e}")))
    }

    /// Parse from TOML and validate.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Hex SHA-256 of the canonical TOML form; recorded with every run.
    pub fn content_hash(&self) -> Result<String> {
        use sha2::{Digest, Sha256};
        let text = self.to_toml()?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
