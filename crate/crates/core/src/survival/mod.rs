//! Survival-probability estimators.
//!
//! Four estimators share one contract: given a walker model, a frozen wall
//! realization, a start, a step schedule and read-out horizons, produce a
//! [`SurvivalCurve`] of `(horizon, log survival probability)` entries.
//!
//! * [`grid`] — deterministic density propagation on an adaptive grid; the
//!   workhorse for long horizons and small probabilities.
//! * [`smc`] — particle population with killing and resampling; same runs,
//!   independent errors.
//! * [`direct`] — plain Monte Carlo over full paths; cheap sanity checks at
//!   short horizons.
//! * [`brute`] — exact enumeration for finite-support walkers at tiny
//!   horizons; the ground truth the others are tested against.

pub mod brute;
pub mod direct;
pub mod grid;
pub mod smc;

pub use brute::{brute_force_survival, fkg_brute_check, FkgReport, IncreasingEvent};
pub use direct::direct_mc_survival;
pub use grid::{grid_survival, GridOpts};
pub use smc::smc_survival;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::StepLaw;
use crate::paths::OuParams;

/// Which estimator produced an entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    Grid,
    Smc,
    Direct,
    Brute,
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Estimator::Grid => "grid",
            Estimator::Smc => "smc",
            Estimator::Direct => "direct",
            Estimator::Brute => "brute",
        };
        f.write_str(s)
    }
}

/// One read-out: log survival probability at a horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEntry {
    pub horizon: f64,
    #[serde(with = "crate::stats::extended_float")]
    pub log_p: f64,
    pub stderr: f64,
    pub estimator: Estimator,
    /// All mass/particles were killed before this horizon.
    pub died: bool,
    /// Too few effective samples behind this entry to trust it.
    pub low_ess: bool,
}

/// Read-outs for one (wall, start) run, in increasing horizon order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub entries: Vec<SurvivalEntry>,
}

impl SurvivalCurve {
    pub fn horizons(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.horizon).collect()
    }

    pub fn log_ps(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.log_p).collect()
    }

    pub fn stderrs(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.stderr).collect()
    }

    /// True when the run lost all probability mass at some point.
    pub fn died(&self) -> bool {
        self.entries.iter().any(|e| e.died)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The walker process being constrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Walker {
    /// Brownian motion with variance `var_rate * t`.
    Brownian { var_rate: f64 },
    /// Mean-reverting diffusion.
    Ou { params: OuParams },
    /// Random walk with the given step law at integer times.
    DiscreteStep { law: StepLaw },
}

impl Walker {
    pub fn validate(&self) -> Result<()> {
        match self {
            Walker::Brownian { var_rate } => {
                if !var_rate.is_finite() || *var_rate <= 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "variance rate {var_rate} must be finite > 0"
                    )));
                }
                Ok(())
            }
            Walker::Ou { params } => OuParams::new(params.mu, params.sigma).map(|_| ()),
            Walker::DiscreteStep { law } => {
                if law.variance() <= 0.0 {
                    return Err(Error::InvalidModel(
                        "walker step law must have positive variance".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Walker::DiscreteStep { .. })
    }

    /// Variance accumulated over a step of length `dt` from position `x`
    /// (position only matters for the mean, so this is position-free).
    pub fn step_var(&self, dt: f64) -> f64 {
        match self {
            Walker::Brownian { var_rate } => var_rate * dt,
            Walker::Ou { params } => params.transition(0.0, dt).1,
            Walker::DiscreteStep { law } => law.variance() * dt,
        }
    }
}

/// How the endpoint window bounds scale with the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowScale {
    /// Bounds `(a sqrt(N), b sqrt(N))` on the walker displacement above the
    /// wall anchor — the diffusive normalization.
    SqrtHorizon,
    /// Fixed bounds `(a, b)` on the position above the wall anchor.
    Constant,
}

/// Open endpoint window: besides surviving, the walker must end strictly
/// inside the interval at the read-out horizon. The reference level is the
/// raw wall value at the horizon (overlays excluded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndWindow {
    #[serde(with = "crate::stats::extended_float")]
    pub a: f64,
    #[serde(with = "crate::stats::extended_float")]
    pub b: f64,
    pub scale: WindowScale,
}

impl EndWindow {
    pub fn new(a: f64, b: f64, scale: WindowScale) -> Result<Self> {
        if a.is_nan() || b.is_nan() || !(a < b) {
            return Err(Error::InvalidSpec(format!(
                "window bounds must satisfy a < b, got ({a}, {b})"
            )));
        }
        Ok(EndWindow { a, b, scale })
    }

    /// Absolute position bounds `(lo, hi)` at horizon `n`, given the start
    /// `x0` and the wall anchor (raw wall value at `n`).
    pub fn position_bounds(&self, x0: f64, anchor: f64, n: f64) -> (f64, f64) {
        match self.scale {
            WindowScale::SqrtHorizon => {
                let s = n.sqrt();
                (x0 + anchor + self.a * s, x0 + anchor + self.b * s)
            }
            WindowScale::Constant => (anchor + self.a, anchor + self.b),
        }
    }

    /// Whether an absolute position lies strictly inside the window.
    pub fn contains(&self, pos: f64, x0: f64, anchor: f64, n: f64) -> bool {
        let (lo, hi) = self.position_bounds(x0, anchor, n);
        pos > lo && pos < hi
    }
}

/// Time-stepping schemes shared by the grid, particle and direct estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// Step count `steps_per_octave` from 0 to `first_horizon`, then again
    /// over each doubling `[H, 2H]`; step size grows with the horizon so the
    /// cost of reaching horizon `T` is logarithmic in `T`.
    OctaveDoubling { first_horizon: f64, steps_per_octave: usize },
    /// One step per integer time; the native clock of discrete walkers.
    UniformInteger,
    /// Fixed step `dt`; the native clock for saturating (mean-reverting)
    /// runs where late times matter as much as early ones.
    UniformContinuous { dt: f64 },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::OctaveDoubling { first_horizon, steps_per_octave } => {
                if !first_horizon.is_finite() || *first_horizon <= 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "first horizon {first_horizon} must be finite > 0"
                    )));
                }
                if *steps_per_octave == 0 {
                    return Err(Error::InvalidSpec("steps per octave must be >= 1".into()));
                }
                Ok(())
            }
            Schedule::UniformInteger => Ok(()),
            Schedule::UniformContinuous { dt } => {
                if !dt.is_finite() || *dt <= 0.0 {
                    return Err(Error::InvalidSpec(format!("dt {dt} must be finite > 0")));
                }
                Ok(())
            }
        }
    }

    /// All step times from 0 through (at least) `horizon`, inclusive of 0.
    pub fn times(&self, horizon: f64) -> Result<Vec<f64>> {
        self.validate()?;
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidInput(format!("horizon {horizon} must be finite > 0")));
        }
        let mut ts = vec![0.0];
        match self {
            Schedule::OctaveDoubling { first_horizon, steps_per_octave } => {
                let m = *steps_per_octave as f64;
                // first block: 0 -> H0
                for k in 1..=*steps_per_octave {
                    ts.push(first_horizon * k as f64 / m);
                }
                // then [H, 2H] blocks until the horizon is covered
                let mut h = *first_horizon;
                while last(&ts) < horizon * (1.0 - 1e-12) {
                    let dt = h / m;
                    let base = h;
                    for k in 1..=*steps_per_octave {
                        ts.push(base + dt * k as f64);
                    }
                    h *= 2.0;
                    if ts.len() > 4_000_000 {
                        return Err(Error::SizeLimit(
                            "schedule would exceed 4e6 steps".into(),
                        ));
                    }
                }
            }
            Schedule::UniformInteger => {
                let n = horizon.round();
                if (horizon - n).abs() > 1e-9 || n < 1.0 {
                    return Err(Error::InvalidInput(format!(
                        "integer schedule needs an integer horizon >= 1, got {horizon}"
                    )));
                }
                for k in 1..=(n as u64) {
                    ts.push(k as f64);
                }
                if ts.len() > 4_000_000 {
                    return Err(Error::SizeLimit("schedule would exceed 4e6 steps".into()));
                }
            }
            Schedule::UniformContinuous { dt } => {
                let n = (horizon / dt).round();
                if (horizon - n * dt).abs() > 1e-9 * horizon.max(1.0) {
                    return Err(Error::InvalidInput(format!(
                        "horizon {horizon} is not a multiple of dt {dt}"
                    )));
                }
                if n > 4_000_000.0 {
                    return Err(Error::SizeLimit("schedule would exceed 4e6 steps".into()));
                }
                for k in 1..=(n as u64) {
                    ts.push(k as f64 * dt);
                }
            }
        }
        Ok(ts)
    }

    /// Indices into `times(horizon)` at which each requested horizon lands;
    /// errors when a horizon is not a scheduled time.
    pub fn readout_indices(times: &[f64], horizons: &[f64]) -> Result<Vec<usize>> {
        if horizons.is_empty() {
            return Err(Error::InvalidInput("need at least one read-out horizon".into()));
        }
        if horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("horizons must strictly increase".into()));
        }
        let mut idx = Vec::with_capacity(horizons.len());
        let mut from = 0usize;
        for &h in horizons {
            let tol = 1e-9 * h.max(1.0);
            match times[from..].iter().position(|&t| (t - h).abs() <= tol) {
                Some(off) => {
                    idx.push(from + off);
                    from += off;
                }
                None => {
                    return Err(Error::InvalidInput(format!(
                        "horizon {h} is not a scheduled step time"
                    )))
                }
            }
        }
        Ok(idx)
    }
}

fn last(ts: &[f64]) -> f64 {
    *ts.last().unwrap()
}
