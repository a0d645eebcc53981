//! Numerical laboratory for survival probabilities of random processes
//! constrained to stay above frozen ("quenched") random walls, and for the
//! decay exponents of those probabilities.
//!
//! The central objects are a walker (Brownian motion, Ornstein-Uhlenbeck
//! process, or a discrete-step random walk) and a wall realized once per
//! replica and then held fixed while the walker's survival probability above
//! it is computed. Survival curves are estimated several independent ways --
//! deterministic density-grid propagation, sequential Monte Carlo with
//! resampling, direct path sampling, and exhaustive enumeration on small
//! discrete instances -- and the estimators are required to agree where their
//! domains overlap.
//!
//! Module map:
//!
//! | module       | contents                                                      |
//! |--------------|---------------------------------------------------------------|
//! | [`rng`]      | splittable, schedule-independent random streams               |
//! | [`law`]      | step distributions: Gaussian and finite-support               |
//! | [`paths`]    | time grids, path samples, exact BM/OU sampling, bridge factor |
//! | [`env`]      | random-environment step models and their walls                |
//! | [`walls`]    | wall specifications, realization, feasibility, perturbations  |
//! | [`survival`] | grid / particle / direct / brute-force survival estimators    |
//! | [`excursions`] | wall excursion decomposition and per-block log-probabilities |
//! | [`spectral`] | Dirichlet eigenvalue of the two-sided OU generator on a wedge |
//! | [`tilt`]     | exponential tilting, moment brackets, rare-growth estimator   |
//! | [`analysis`] | exponent fits, replica aggregation, comparison verdicts       |
//! | [`stats`]    | small shared statistics helpers                               |
//! | [`harness`]  | experiment configs, parallel runner, validation suites        |

pub mod analysis;
pub mod env;
pub mod error;
pub mod excursions;
pub mod harness;
pub mod law;
pub mod paths;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod survival;
pub mod tilt;
pub mod walls;

pub use error::{Error, Result};
