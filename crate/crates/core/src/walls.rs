//! Wall specifications, realization, feasibility screening and the
//! perturbation overlay.
//!
//! A wall is realized once from `(spec, stream)` and then frozen: every
//! estimator that receives the realization sees exactly the same barrier.
//! Realization is a pure function of the `WallSpec` and the stream, so replicas
//! are reproducible bit-for-bit and scale relations (e.g. doubling a wall
//! amplitude) can be checked by re-realizing with the same stream.

use serde::{Deserialize, Serialize};

use crate::env::EnvModel;
use crate::error::{Error, Result};
use crate::law::StepLaw;
use crate::paths::{sample_bm, sample_ou, OuParams, PathSample, TimeGrid};
use crate::rng::RngStream;

/// What kind of barrier to realize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WallKind {
    /// The flat barrier at zero.
    Zero,
    /// `beta` times a standard Brownian path started at 0.
    ScaledBrownian { beta: f64 },
    /// `beta` times a mean-reverting path started at 0.
    ScaledOu { mu: f64, sigma: f64, beta: f64 },
    /// `beta` times a random walk with the given step law, at integer times.
    RandomWalk { step: StepLaw, beta: f64 },
    /// Independent draws of `law` at integer times (no accumulation);
    /// the value at time 0 is 0.
    Iid { law: StepLaw },
    /// Wall induced by a random environment (cumulative minus-conditional-
    /// means), at integer times.
    Environment { model: EnvModel },
}

impl WallKind {
    /// True for kinds defined at integer times only.
    pub fn integer_times(&self) -> bool {
        matches!(
            self,
            WallKind::RandomWalk { .. } | WallKind::Iid { .. } | WallKind::Environment { .. }
        )
    }

    fn validate(&self) -> Result<()> {
        match self {
            WallKind::Zero => Ok(()),
            WallKind::ScaledBrownian { beta } => {
                if !beta.is_finite() {
                    return Err(Error::InvalidSpec(format!("wall scale {beta} must be finite")));
                }
                Ok(())
            }
            WallKind::ScaledOu { mu, sigma, beta } => {
                OuParams::new(*mu, *sigma).map_err(|e| Error::InvalidSpec(e.to_string()))?;
                if !beta.is_finite() {
                    return Err(Error::InvalidSpec(format!("wall scale {beta} must be finite")));
                }
                Ok(())
            }
            WallKind::RandomWalk { beta, .. } => {
                if !beta.is_finite() {
                    return Err(Error::InvalidSpec(format!("wall scale {beta} must be finite")));
                }
                Ok(())
            }
            WallKind::Iid { .. } | WallKind::Environment { .. } => Ok(()),
        }
    }
}

/// Additive overlay `f(t)` applied on top of the realized wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Perturbation {
    /// `f(t) = amplitude * t^(1/2 - eps)` with `eps` in (0, 1/2), so the
    /// overlay grows but stays below the diffusive scale. `f(0) = 0`.
    PowerLaw { amplitude: f64, eps: f64 },
    /// Piecewise-linear table `(t, f)`; queries must stay within the table.
    Table { points: Vec<(f64, f64)> },
}

impl Perturbation {
    pub fn validate(&self) -> Result<()> {
        match self {
            Perturbation::PowerLaw { amplitude, eps } => {
                if !amplitude.is_finite() {
                    return Err(Error::InvalidSpec(format!(
                        "overlay amplitude {amplitude} must be finite"
                    )));
                }
                if !eps.is_finite() || *eps <= 0.0 || *eps >= 0.5 {
                    return Err(Error::InvalidSpec(format!(
                        "overlay exponent gap {eps} must lie in (0, 1/2)"
                    )));
                }
                Ok(())
            }
            Perturbation::Table { points } => validate_table(points, "overlay"),
        }
    }

    /// Evaluate the overlay at `t >= 0`.
    pub fn at(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidInput(format!("overlay query time {t} must be >= 0")));
        }
        match self {
            Perturbation::PowerLaw { amplitude, eps } => {
                if t == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(amplitude * t.powf(0.5 - eps))
                }
            }
            Perturbation::Table { points } => table_at(points, t, "overlay"),
        }
    }
}

/// Positive starting headroom `g(t)`, evaluated at the run's final horizon.
/// Must be bounded away from zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Offset {
    Constant { value: f64 },
    Table { points: Vec<(f64, f64)> },
}

impl Offset {
    pub fn validate(&self) -> Result<()> {
        match self {
            Offset::Constant { value } => {
                if !value.is_finite() || *value <= 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "offset {value} must be finite > 0"
                    )));
                }
                Ok(())
            }
            Offset::Table { points } => {
                validate_table(points, "offset")?;
                if points.iter().any(|&(_, v)| v <= 0.0) {
                    return Err(Error::InvalidSpec(
                        "offset table values must stay > 0".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        match self {
            Offset::Constant { value } => Ok(*value),
            Offset::Table { points } => table_at(points, t, "offset"),
        }
    }
}

fn validate_table(points: &[(f64, f64)], what: &str) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidSpec(format!("{what} table must be nonempty")));
    }
    if points
        .iter()
        .any(|&(t, v)| !t.is_finite() || !v.is_finite() || t < 0.0)
    {
        return Err(Error::InvalidSpec(format!(
            "{what} table entries must be finite with t >= 0"
        )));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidSpec(format!(
            "{what} table times must strictly increase"
        )));
    }
    Ok(())
}

fn table_at(points: &[(f64, f64)], t: f64, what: &str) -> Result<f64> {
    let first = points.first().unwrap();
    let last = points.last().unwrap();
    if t < first.0 || t > last.0 {
        return Err(Error::OutOfRange(format!(
            "{what} table covers [{}, {}], queried at {t}",
            first.0, last.0
        )));
    }
    let idx = points.partition_point(|&(pt, _)| pt <= t);
    if idx == points.len() {
        return Ok(last.1);
    }
    let (t0, v0) = points[idx - 1];
    let (t1, v1) = points[idx];
    let frac = (t - t0) / (t1 - t0);
    Ok(v0 * (1.0 - frac) + v1 * frac)
}

/// Complete wall description: kind plus optional overlay and offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallSpec {
    pub kind: WallKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Offset>,
}

impl WallSpec {
    pub fn new(kind: WallKind) -> Self {
        WallSpec { kind, perturbation: None, offset: None }
    }

    pub fn with_perturbation(mut self, p: Perturbation) -> Self {
        self.perturbation = Some(p);
        self
    }

    pub fn with_offset(mut self, o: Offset) -> Self {
        self.offset = Some(o);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if let Some(p) = &self.perturbation {
            p.validate()?;
        }
        if let Some(o) = &self.offset {
            o.validate()?;
        }
        Ok(())
    }
}

/// A frozen draw of a wall: values on a grid, with the overlay recorded but
/// *not* folded into the stored values (so the raw wall can be reused under
/// different overlays and anchors).
#[derive(Debug, Clone, PartialEq)]
pub struct WallRealization {
    pub spec: WallSpec,
    pub path: PathSample,
}

impl WallRealization {
    pub fn grid(&self) -> &TimeGrid {
        &self.path.grid
    }

    /// Raw (scaled) wall value, overlay excluded.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        self.path.value_at(t)
    }

    /// Wall value plus overlay: the barrier the walker must stay above.
    pub fn barrier_at(&self, t: f64) -> Result<f64> {
        apply_perturbation(self, t)
    }

    pub fn horizon(&self) -> f64 {
        self.path.grid.last()
    }

    /// Largest wall value over the whole realized grid.
    pub fn max_value(&self) -> f64 {
        self.path.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest wall value over the whole realized grid.
    pub fn min_value(&self) -> f64 {
        self.path.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Barrier value at time `t`: realized wall plus overlay. Errors if `t`
/// falls outside the realized horizon or the overlay table.
pub fn apply_perturbation(wall: &WallRealization, t: f64) -> Result<f64> {
    let base = wall.path.value_at(t)?;
    let f = match &wall.spec.perturbation {
        Some(p) => p.at(t)?,
        None => 0.0,
    };
    Ok(base + f)
}

/// Realize a wall on an explicit grid. Integer-time kinds require the grid
/// `0, 1, 2, ...`; continuous kinds accept any grid starting at 0.
pub fn realize_wall_on(spec: &WallSpec, grid: &TimeGrid, stream: RngStream) -> Result<WallRealization> {
    spec.validate()?;
    if grid.first() != 0.0 {
        return Err(Error::InvalidInput("wall grids must start at time 0".into()));
    }
    if spec.kind.integer_times() {
        for (i, &t) in grid.times().iter().enumerate() {
            if (t - i as f64).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "this wall kind lives on integer times; grid point {i} is {t}"
                )));
            }
        }
    }
    let mut rng = stream.rng();
    let values = match &spec.kind {
        WallKind::Zero => vec![0.0; grid.len()],
        WallKind::ScaledBrownian { beta } => {
            // the underlying standard path is drawn independently of beta,
            // so re-realizing with a different scale reuses the same draws
            let base = sample_bm(grid, 0.0, &mut rng)?;
            base.values.iter().map(|v| beta * v).collect()
        }
        WallKind::ScaledOu { mu, sigma, beta } => {
            let p = OuParams::new(*mu, *sigma)?;
            let base = sample_ou(p, grid, 0.0, &mut rng)?;
            base.values.iter().map(|v| beta * v).collect()
        }
        WallKind::RandomWalk { step, beta } => {
            let mut acc = 0.0;
            let mut vals = Vec::with_capacity(grid.len());
            vals.push(0.0);
            for _ in 1..grid.len() {
                acc += step.sample(&mut rng);
                vals.push(beta * acc);
            }
            vals
        }
        WallKind::Iid { law } => {
            let mut vals = Vec::with_capacity(grid.len());
            vals.push(0.0);
            for _ in 1..grid.len() {
                vals.push(law.sample(&mut rng));
            }
            vals
        }
        WallKind::Environment { model } => {
            let n = grid.len() - 1;
            let e = model.sample(n, stream)?;
            e.wall
        }
    };
    Ok(WallRealization {
        spec: spec.clone(),
        path: PathSample::new(grid.clone(), values)?,
    })
}

/// Realize a wall up to `horizon` on the kind's default grid: integer times
/// for discrete kinds, a uniform grid with step 2^-6 for continuous ones.
pub fn realize_wall(spec: &WallSpec, horizon: f64, stream: RngStream) -> Result<WallRealization> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(Error::InvalidInput(format!("horizon {horizon} must be finite > 0")));
    }
    let grid = if spec.kind.integer_times() {
        let n = horizon.round();
        if (horizon - n).abs() > 1e-9 || n < 1.0 {
            return Err(Error::InvalidInput(format!(
                "integer-time wall kinds need an integer horizon >= 1, got {horizon}"
            )));
        }
        TimeGrid::uniform(0.0, 1.0, n as usize)?
    } else {
        let dt = 1.0 / 64.0;
        let steps = (horizon / dt).ceil() as usize;
        TimeGrid::uniform(0.0, dt, steps.max(1))?
    };
    realize_wall_on(spec, &grid, stream)
}

/// Feasibility status of "walker above wall forever".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeasibilityStatus {
    /// Every realization admits surviving paths from every positive start.
    AlwaysFeasible,
    /// Realization-dependent: some walls block this start, others do not.
    FeasibleAtX,
    /// Every realization blocks this start after finitely many steps.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub status: FeasibilityStatus,
    /// For `Infeasible`: the first step index at which even the best walker
    /// path must be below the wall.
    pub witness: Option<u64>,
    pub detail: String,
}

/// Screen a (walker law, wall spec, start) triple for feasibility by
/// comparing attainable suprema, before realizing anything.
///
/// The governing comparison is between the walker's largest step and the
/// wall's largest per-step growth: if the walker's top step dominates, every
/// wall prefix can be matched and the status is `AlwaysFeasible` (independent
/// of the start). Otherwise the wall can outrun the walker; if it *must* do
/// so (deterministic growth above the walker's top step) the status is
/// `Infeasible` with a witness index, else it depends on the realization.
pub fn check_feasibility(b_law: &StepLaw, spec: &WallSpec, x: f64) -> Result<Feasibility> {
    spec.validate()?;
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::InvalidInput(format!("start {x} must be finite > 0")));
    }
    let b_sup = b_law.sup_support();
    // Unbounded walker steps clear any finite wall prefix with positive
    // probability.
    let Some(b) = b_sup else {
        return Ok(Feasibility {
            status: FeasibilityStatus::AlwaysFeasible,
            witness: None,
            detail: "walker step unbounded above".into(),
        });
    };

    // Largest and smallest per-step wall growth (None = unbounded above).
    let (w_sup, w_inf): (Option<f64>, f64) = match &spec.kind {
        WallKind::Zero => (Some(0.0), 0.0),
        WallKind::ScaledBrownian { beta } | WallKind::ScaledOu { beta, .. } => {
            if *beta == 0.0 {
                (Some(0.0), 0.0)
            } else {
                (None, f64::NEG_INFINITY)
            }
        }
        WallKind::RandomWalk { step, beta } => scaled_support(step, *beta),
        WallKind::Environment { model } => {
            // wall increments are minus conditional means
            match model {
                EnvModel::GaussianRandomMean { mean_sd, .. } => {
                    if *mean_sd == 0.0 {
                        (Some(0.0), 0.0)
                    } else {
                        (None, f64::NEG_INFINITY)
                    }
                }
                EnvModel::TwoPointRandomBias { p_low } => {
                    let v = (1.0 - 2.0 * p_low).abs();
                    (Some(v), -v)
                }
                EnvModel::ShiftedSignMixture { shift } => (Some(*shift), -shift),
            }
        }
        WallKind::Iid { law } => {
            // non-cumulative wall: certain blocking only when even the
            // smallest wall value exceeds the walker's reach at some step
            let li = law.inf_support().unwrap_or(f64::NEG_INFINITY);
            if li.is_finite() {
                // best walker position at step n is x + n b; find the first
                // n >= 1 with x + n b < li, if any
                let blocked: Option<u64> = if b >= 0.0 {
                    // reach is nondecreasing: only n = 1 can block
                    (x + b < li).then_some(1)
                } else {
                    // reach decreases without bound: blocks once n > (x - li)/(-b)
                    Some((((x - li) / -b).floor().max(0.0) as u64) + 1)
                };
                if let Some(n) = blocked {
                    return Ok(Feasibility {
                        status: FeasibilityStatus::Infeasible,
                        witness: Some(n),
                        detail: format!(
                            "wall floor {li} exceeds best walker position by step {n}"
                        ),
                    });
                }
            }
            let ls = law.sup_support();
            return Ok(match ls {
                Some(l) if l <= x.min(x + b) => Feasibility {
                    status: FeasibilityStatus::AlwaysFeasible,
                    witness: None,
                    detail: "wall ceiling within walker reach at every step".into(),
                },
                _ => Feasibility {
                    status: FeasibilityStatus::FeasibleAtX,
                    witness: None,
                    detail: "wall draws can exceed the walker's reach".into(),
                },
            });
        }
    };

    match w_sup {
        Some(w) if b >= w => Ok(Feasibility {
            status: FeasibilityStatus::AlwaysFeasible,
            witness: None,
            detail: format!("walker top step {b} dominates wall growth {w}"),
        }),
        Some(w) => {
            if w_inf >= w - 1e-15 {
                // deterministic per-step growth above the walker's top step
                let n = (x / (w - b)).floor() as u64 + 1;
                Ok(Feasibility {
                    status: FeasibilityStatus::Infeasible,
                    witness: Some(n),
                    detail: format!(
                        "wall climbs {w} per step against walker top step {b}; blocked by step {n}"
                    ),
                })
            } else {
                Ok(Feasibility {
                    status: FeasibilityStatus::FeasibleAtX,
                    witness: None,
                    detail: format!(
                        "wall growth can reach {w} > walker top step {b}; realization-dependent"
                    ),
                })
            }
        }
        None => Ok(Feasibility {
            status: FeasibilityStatus::FeasibleAtX,
            witness: None,
            detail: format!("wall growth unbounded above walker top step {b}"),
        }),
    }
}

fn scaled_support(step: &StepLaw, beta: f64) -> (Option<f64>, f64) {
    if beta == 0.0 {
        return (Some(0.0), 0.0);
    }
    let (sup, inf) = (step.sup_support(), step.inf_support());
    if beta > 0.0 {
        (
            sup.map(|s| beta * s),
            inf.map(|i| beta * i).unwrap_or(f64::NEG_INFINITY),
        )
    } else {
        (
            inf.map(|i| beta * i),
            sup.map(|s| beta * s).unwrap_or(f64::NEG_INFINITY),
        )
    }
}

/// First index `n` with `x + n * b_sup < wall[n]` on a realized wall given
/// the walker's top step, i.e. the first time even the best walker path is
/// blocked. `None` when no prefix blocks (or the walker is unbounded).
pub fn first_blocking_index(wall_values: &[f64], b_sup: Option<f64>, x: f64) -> Option<usize> {
    let b = b_sup?;
    wall_values
        .iter()
        .enumerate()
        .find(|&(n, &w)| x + n as f64 * b < w)
        .map(|(n, _)| n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn stream() -> RngStream {
        RngStream::new(21, 4)
    }

    #[test]
    fn realization_is_reproducible() {
        let spec = WallSpec::new(WallKind::ScaledBrownian { beta: 1.0 });
        let a = realize_wall(&spec, 8.0, stream()).unwrap();
        let b = realize_wall(&spec, 8.0, stream()).unwrap();
        assert_eq!(a.path.values, b.path.values);
    }

    #[test]
    fn scale_factor_is_exact_across_realizations() {
        // same stream, doubled scale: values double exactly because the
        // underlying draws are scale-independent
        let one = realize_wall(&WallSpec::new(WallKind::ScaledBrownian { beta: 1.0 }), 4.0, stream())
            .unwrap();
        let two = realize_wall(&WallSpec::new(WallKind::ScaledBrownian { beta: 2.0 }), 4.0, stream())
            .unwrap();
        for (a, b) in one.path.values.iter().zip(&two.path.values) {
            assert_abs_diff_eq!(2.0 * a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn iid_wall_draws_are_uncorrelated() {
        let spec = WallSpec::new(WallKind::Iid {
            law: StepLaw::gaussian(0.0, 1.0).unwrap(),
        });
        let w = realize_wall(&spec, 4096.0, stream()).unwrap();
        let v = &w.path.values[1..]; // skip the fixed 0 at t=0
        let n = v.len();
        let m = crate::stats::mean(v);
        let var = crate::stats::sample_var(v);
        let lag1: f64 = v
            .windows(2)
            .map(|p| (p[0] - m) * (p[1] - m))
            .sum::<f64>()
            / ((n - 1) as f64 * var);
        assert!(lag1.abs() < 0.05, "lag-1 autocorrelation {lag1} too large");
    }

    #[test]
    fn power_overlay_example_value() {
        // amplitude 1, eps 0.1: overlay at t = 16 is 16^0.4
        let spec = WallSpec::new(WallKind::Zero)
            .with_perturbation(Perturbation::PowerLaw { amplitude: 1.0, eps: 0.1 });
        let w = realize_wall(&spec, 32.0, stream()).unwrap();
        let b = apply_perturbation(&w, 16.0).unwrap();
        assert_abs_diff_eq!(b, 3.0314331330207964, epsilon = 1e-10);
        // overlay vanishes at zero and the raw wall is untouched
        assert_abs_diff_eq!(apply_perturbation(&w, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(w.value_at(16.0).unwrap(), 0.0);
    }

    #[test]
    fn overlay_beyond_horizon_errors() {
        let spec = WallSpec::new(WallKind::Zero);
        let w = realize_wall(&spec, 8.0, stream()).unwrap();
        assert!(matches!(apply_perturbation(&w, 9.0), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn zero_scale_walls_are_flat() {
        for kind in [
            WallKind::ScaledBrownian { beta: 0.0 },
            WallKind::RandomWalk { step: StepLaw::rademacher(), beta: 0.0 },
        ] {
            let w = realize_wall(&WallSpec::new(kind), 16.0, stream()).unwrap();
            assert!(w.path.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn integer_kinds_reject_fractional_grids() {
        let spec = WallSpec::new(WallKind::Iid { law: StepLaw::rademacher() });
        let grid = TimeGrid::uniform(0.0, 0.5, 8).unwrap();
        assert!(realize_wall_on(&spec, &grid, stream()).is_err());
        assert!(realize_wall(&spec, 3.5, stream()).is_err());
    }

    #[test]
    fn feasibility_unbounded_walker_always() {
        let law = StepLaw::gaussian(0.0, 1.0).unwrap();
        let spec = WallSpec::new(WallKind::ScaledBrownian { beta: 3.0 });
        let f = check_feasibility(&law, &spec, 1.0).unwrap();
        assert_eq!(f.status, FeasibilityStatus::AlwaysFeasible);
    }

    #[test]
    fn feasibility_matched_supports_always() {
        // +/-1 walker against a +/-1 wall: top steps equal
        let law = StepLaw::rademacher();
        let spec = WallSpec::new(WallKind::RandomWalk { step: StepLaw::rademacher(), beta: 1.0 });
        let f = check_feasibility(&law, &spec, 1.0).unwrap();
        assert_eq!(f.status, FeasibilityStatus::AlwaysFeasible);
    }

    #[test]
    fn feasibility_outrunning_wall_infeasible_with_witness() {
        // wall climbs exactly 2 per step, walker tops out at 1: from x the
        // walker is caught at step floor(x) + 1
        let law = StepLaw::rademacher();
        let spec = WallSpec::new(WallKind::RandomWalk {
            step: StepLaw::finite(&[(2.0, 1.0)]).unwrap(),
            beta: 1.0,
        });
        let f = check_feasibility(&law, &spec, 2.5).unwrap();
        assert_eq!(f.status, FeasibilityStatus::Infeasible);
        assert_eq!(f.witness, Some(3));
    }

    #[test]
    fn feasibility_wide_wall_depends_on_realization() {
        // wall steps +/-2 against a +/-1 walker: blockable but not forced
        let law = StepLaw::rademacher();
        let spec = WallSpec::new(WallKind::RandomWalk {
            step: StepLaw::two_point(2.0, -2.0, 0.5).unwrap(),
            beta: 1.0,
        });
        let f = check_feasibility(&law, &spec, 1.0).unwrap();
        assert_eq!(f.status, FeasibilityStatus::FeasibleAtX);
    }

    #[test]
    fn blocking_index_matches_exhaustive_search() {
        // exhaustive check on all +/-1 walker paths: a surviving path up to
        // N exists iff no prefix blocks, and the first blocking index found
        // by the helper is exactly where exhaustive search first fails
        let wall_sets: Vec<Vec<f64>> = vec![
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],        // climbs 1/step
            vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],       // climbs 2/step
            vec![0.0, -1.0, 3.0, 0.0, 6.5, 1.0],       // jagged
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0],        // flat
        ];
        for wall in wall_sets {
            for x in [0.5, 1.0, 2.5] {
                let n = wall.len() - 1;
                // exhaustive: deepest step reachable with all prefixes above
                let mut reachable_depth = None;
                'outer: for mask in 0u32..(1 << n) {
                    let mut pos = x;
                    for i in 0..n {
                        pos += if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                        if pos < wall[i + 1] {
                            continue 'outer;
                        }
                    }
                    reachable_depth = Some(n);
                    break;
                }
                let witness = first_blocking_index(&wall, Some(1.0), x);
                match witness {
                    None => assert_eq!(
                        reachable_depth,
                        Some(n),
                        "helper says feasible but enumeration disagrees (wall {wall:?}, x {x})"
                    ),
                    Some(_) => assert_eq!(
                        reachable_depth, None,
                        "helper says blocked but a path survives (wall {wall:?}, x {x})"
                    ),
                }
            }
        }
    }

    #[test]
    fn spec_validation_rejects_bad_overlays() {
        assert!(Perturbation::PowerLaw { amplitude: 1.0, eps: 0.0 }.validate().is_err());
        assert!(Perturbation::PowerLaw { amplitude: 1.0, eps: 0.5 }.validate().is_err());
        assert!(Offset::Constant { value: 0.0 }.validate().is_err());
        assert!(Offset::Table { points: vec![(0.0, 1.0), (1.0, -0.5)] }
            .validate()
            .is_err());
        assert!(Perturbation::Table { points: vec![] }.validate().is_err());
    }
}
