//! Exact survival probabilities by exhaustive path enumeration, and the
//! positive-association checker built on top of it.
//!
//! Only finite-support walkers at short horizons are enumerable; the step
//! budget is capped so a misconfigured call fails fast instead of hanging.
//! Within its domain the result is exact up to float rounding, which makes
//! this module the ground truth for the sampling and grid estimators.

use rand::Rng;

use crate::error::{Error, Result};
use crate::law::StepLaw;

use super::EndWindow;

/// Hard cap on `atoms^steps` for enumeration.
const MAX_PATHS_LOG2: f64 = 26.0;

fn check_size(n_atoms: usize, steps: usize) -> Result<()> {
    let log2 = steps as f64 * (n_atoms as f64).log2();
    if log2 > MAX_PATHS_LOG2 {
        return Err(Error::SizeLimit(format!(
            "{n_atoms}^{steps} paths exceed the 2^{MAX_PATHS_LOG2} enumeration budget"
        )));
    }
    Ok(())
}

/// Exact probability that the walk `x0 + B_n` stays at or above
/// `wall_values[n]` for all `n`, optionally ending inside `window` (whose
/// reference level is the final wall value).
pub fn brute_force_survival(
    law: &StepLaw,
    wall_values: &[f64],
    x0: f64,
    window: Option<&EndWindow>,
) -> Result<f64> {
    let atoms = law
        .atoms()
        .ok_or_else(|| Error::InvalidSpec("enumeration needs a finite-support law".into()))?;
    if wall_values.is_empty() {
        return Err(Error::InvalidInput("wall must have a value at time 0".into()));
    }
    let n = wall_values.len() - 1;
    check_size(atoms.len(), n)?;
    if x0 < wall_values[0] - 1e-9 {
        return Ok(0.0);
    }
    if n == 0 {
        return Ok(1.0);
    }
    Ok(dfs(atoms, wall_values, x0, x0, 1, window))
}

/// Survival mass of the subtree rooted at `pos` before step `k`. Summing
/// bottom-up (each node adds its few children's totals, scaled by the atom
/// probability) keeps the rounding error at O(depth * eps); one flat
/// accumulator over millions of leaves drifts far above the exactness
/// tolerance the enumeration is held to.
fn dfs(
    atoms: &[(f64, f64)],
    wall: &[f64],
    x0: f64,
    pos: f64,
    k: usize,
    window: Option<&EndWindow>,
) -> f64 {
    let n = wall.len() - 1;
    let mut sum = 0.0;
    for &(a, p) in atoms {
        let next = pos + a;
        if next < wall[k] - 1e-9 {
            continue;
        }
        if k == n {
            let inside = match window {
                Some(win) => win.contains(next, x0, wall[n], n as f64),
                None => true,
            };
            if inside {
                sum += p;
            }
        } else {
            sum += p * dfs(atoms, wall, x0, next, k + 1, window);
        }
    }
    sum
}

/// A coordinatewise-nondecreasing event of the walk `(B_1, ..., B_n)`.
#[derive(Debug, Clone, PartialEq)]
pub enum IncreasingEvent {
    /// `B_time >= level`, `time` counted from 1.
    CoordAtLeast { time: usize, level: f64 },
    /// Every coordinate at least `level`.
    AllCoordsAtLeast { level: f64 },
    /// `sum_k weights[k] * B_{k+1} >= level` with nonnegative weights.
    WeightedSumAtLeast { weights: Vec<f64>, level: f64 },
    /// Both events; increasing events are closed under intersection.
    Intersection(Box<IncreasingEvent>, Box<IncreasingEvent>),
}

impl IncreasingEvent {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            IncreasingEvent::CoordAtLeast { time, level } => {
                if *time == 0 || *time > n {
                    return Err(Error::InvalidEvent(format!(
                        "coordinate {time} out of range 1..={n}"
                    )));
                }
                if !level.is_finite() {
                    return Err(Error::InvalidEvent("level must be finite".into()));
                }
                Ok(())
            }
            IncreasingEvent::AllCoordsAtLeast { level } => {
                if !level.is_finite() {
                    return Err(Error::InvalidEvent("level must be finite".into()));
                }
                Ok(())
            }
            IncreasingEvent::WeightedSumAtLeast { weights, level } => {
                if weights.len() != n {
                    return Err(Error::InvalidEvent(format!(
                        "need {n} weights, got {}",
                        weights.len()
                    )));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(Error::InvalidEvent(
                        "weights must be finite and nonnegative".into(),
                    ));
                }
                if !level.is_finite() {
                    return Err(Error::InvalidEvent("level must be finite".into()));
                }
                Ok(())
            }
            IncreasingEvent::Intersection(a, b) => {
                a.validate(n)?;
                b.validate(n)
            }
        }
    }

    /// Evaluate on the centered trajectory `b[k] = B_{k+1}`.
    pub fn eval(&self, b: &[f64]) -> bool {
        match self {
            IncreasingEvent::CoordAtLeast { time, level } => b[time - 1] >= *level,
            IncreasingEvent::AllCoordsAtLeast { level } => b.iter().all(|v| v >= level),
            IncreasingEvent::WeightedSumAtLeast { weights, level } => {
                let s: f64 = weights.iter().zip(b).map(|(w, v)| w * v).sum();
                s >= *level
            }
            IncreasingEvent::Intersection(a, c) => a.eval(b) && c.eval(b),
        }
    }

    /// Draw a random increasing event sized for an `n`-step walk whose
    /// typical displacement scale is `scale`.
    pub fn random<R: Rng>(n: usize, scale: f64, rng: &mut R) -> IncreasingEvent {
        let leaf = |rng: &mut R| match rng.random_range(0..3u8) {
            0 => IncreasingEvent::CoordAtLeast {
                time: rng.random_range(1..=n),
                level: rng.random_range(-2.0..1.0) * scale,
            },
            1 => IncreasingEvent::AllCoordsAtLeast {
                level: rng.random_range(-2.0..0.3) * scale,
            },
            _ => IncreasingEvent::WeightedSumAtLeast {
                weights: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
                level: rng.random_range(-1.0..1.0) * scale * n as f64 / 2.0,
            },
        };
        if rng.random_bool(0.25) {
            IncreasingEvent::Intersection(Box::new(leaf(rng)), Box::new(leaf(rng)))
        } else {
            leaf(rng)
        }
    }
}

/// Exact positive-association report for two increasing events under the
/// walk law conditioned on staying above the wall.
#[derive(Debug, Clone, PartialEq)]
pub struct FkgReport {
    /// P(survive): the conditioning event.
    pub p_survive: f64,
    /// Conditional probabilities given survival.
    pub p_a: f64,
    pub p_b: f64,
    pub p_ab: f64,
    /// `p_ab >= p_a * p_b` up to rounding slack.
    pub ok: bool,
}

/// Enumerate all paths and check `P(A and B | survive) >=
/// P(A | survive) P(B | survive)` exactly.
pub fn fkg_brute_check(
    law: &StepLaw,
    wall_values: &[f64],
    x0: f64,
    a: &IncreasingEvent,
    b: &IncreasingEvent,
) -> Result<FkgReport> {
    let atoms = law
        .atoms()
        .ok_or_else(|| Error::InvalidSpec("enumeration needs a finite-support law".into()))?;
    if wall_values.len() < 2 {
        return Err(Error::InvalidInput("need at least one step".into()));
    }
    let n = wall_values.len() - 1;
    a.validate(n)?;
    b.validate(n)?;
    check_size(atoms.len(), n)?;
    if x0 < wall_values[0] - 1e-9 {
        return Err(Error::InvalidInput(
            "start below the wall: conditioning event is empty".into(),
        ));
    }

    let mut traj = vec![0.0; n];
    let acc = fkg_dfs(atoms, wall_values, x0, x0, 1, a, b, &mut traj);
    if acc.z <= 0.0 {
        return Err(Error::InvalidInput(
            "no surviving paths: conditioning event is empty".into(),
        ));
    }
    let p_a = acc.za / acc.z;
    let p_b = acc.zb / acc.z;
    let p_ab = acc.zab / acc.z;
    Ok(FkgReport {
        p_survive: acc.z,
        p_a,
        p_b,
        p_ab,
        ok: p_ab >= p_a * p_b - 1e-12,
    })
}

#[derive(Default)]
struct FkgAcc {
    z: f64,
    za: f64,
    zb: f64,
    zab: f64,
}

impl FkgAcc {
    fn add_scaled(&mut self, p: f64, o: &FkgAcc) {
        self.z += p * o.z;
        self.za += p * o.za;
        self.zb += p * o.zb;
        self.zab += p * o.zab;
    }
}

/// Subtree totals, summed bottom-up for the same rounding control as
/// [`dfs`]; all four components share one traversal order, so exact
/// equalities between them (e.g. an almost-sure event) survive in float.
fn fkg_dfs(
    atoms: &[(f64, f64)],
    wall: &[f64],
    x0: f64,
    pos: f64,
    k: usize,
    a: &IncreasingEvent,
    b: &IncreasingEvent,
    traj: &mut Vec<f64>,
) -> FkgAcc {
    let n = wall.len() - 1;
    let mut acc = FkgAcc::default();
    for &(step, p) in atoms {
        let next = pos + step;
        if next < wall[k] - 1e-9 {
            continue;
        }
        traj[k - 1] = next - x0;
        if k == n {
            acc.z += p;
            let ia = a.eval(traj);
            let ib = b.eval(traj);
            if ia {
                acc.za += p;
            }
            if ib {
                acc.zb += p;
            }
            if ia && ib {
                acc.zab += p;
            }
        } else {
            let sub = fkg_dfs(atoms, wall, x0, next, k + 1, a, b, traj);
            acc.add_scaled(p, &sub);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::survival::WindowScale;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_step_walk_above_zero() {
        // from 1, the paths (2,3) (2,1) (0,1) survive; (0,-1) does not
        let law = StepLaw::rademacher();
        let wall = [0.0, 0.0, 0.0];
        let p = brute_force_survival(&law, &wall, 1.0, None).unwrap();
        assert_abs_diff_eq!(p, 0.75);
        // additionally requiring a strictly positive displacement keeps
        // only (2,3)
        let win = EndWindow::new(0.0, f64::INFINITY, WindowScale::SqrtHorizon).unwrap();
        let p = brute_force_survival(&law, &wall, 1.0, Some(&win)).unwrap();
        assert_abs_diff_eq!(p, 0.25);
    }

    #[test]
    fn start_below_wall_is_zero() {
        let law = StepLaw::rademacher();
        assert_eq!(brute_force_survival(&law, &[2.0, 0.0], 1.0, None).unwrap(), 0.0);
    }

    #[test]
    fn zero_steps_is_just_the_start_check() {
        let law = StepLaw::rademacher();
        assert_eq!(brute_force_survival(&law, &[0.5], 1.0, None).unwrap(), 1.0);
        assert_eq!(brute_force_survival(&law, &[1.5], 1.0, None).unwrap(), 0.0);
    }

    #[test]
    fn asymmetric_law_probabilities_add_up() {
        // p(up) = 0.6: survival for two steps above -inf is 1
        let law = StepLaw::two_point(1.0, -1.0, 0.6).unwrap();
        let wall = [-10.0, -10.0, -10.0];
        let p = brute_force_survival(&law, &wall, 0.0, None).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
        // ending at +2 needs two ups
        let win = EndWindow::new(1.0, 3.0, WindowScale::Constant).unwrap();
        let p = brute_force_survival(&law, &wall, 0.0, Some(&win)).unwrap();
        // window is on position above the final wall value -10: (-9, -7)
        // contains nothing
        assert_abs_diff_eq!(p, 0.0);
        let win = EndWindow::new(11.0, 13.0, WindowScale::Constant).unwrap();
        let p = brute_force_survival(&law, &wall, 0.0, Some(&win)).unwrap();
        assert_abs_diff_eq!(p, 0.36, epsilon = 1e-12);
    }

    #[test]
    fn too_many_paths_is_an_error() {
        let law = StepLaw::rademacher();
        let wall = vec![0.0; 31];
        assert!(matches!(
            brute_force_survival(&law, &wall, 1.0, None),
            Err(Error::SizeLimit(_))
        ));
    }

    #[test]
    fn continuous_law_is_rejected() {
        let law = StepLaw::gaussian(0.0, 1.0).unwrap();
        assert!(matches!(
            brute_force_survival(&law, &[0.0, 0.0], 1.0, None),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn association_on_the_free_walk() {
        // two steps, no wall: A = {B_1 >= 0} has probability 1/2,
        // B = {B_2 >= 0} has 3/4, their intersection 1/2 >= 3/8
        let law = StepLaw::rademacher();
        let wall = [-10.0, -10.0, -10.0];
        let a = IncreasingEvent::CoordAtLeast { time: 1, level: 0.0 };
        let b = IncreasingEvent::CoordAtLeast { time: 2, level: 0.0 };
        let r = fkg_brute_check(&law, &wall, 1.0, &a, &b).unwrap();
        assert_abs_diff_eq!(r.p_a, 0.5);
        assert_abs_diff_eq!(r.p_b, 0.75);
        assert_abs_diff_eq!(r.p_ab, 0.5);
        assert!(r.ok);
    }

    #[test]
    fn association_survives_wall_conditioning() {
        let law = StepLaw::rademacher();
        let wall = [0.0, 0.0, 0.0];
        let a = IncreasingEvent::CoordAtLeast { time: 1, level: 0.0 };
        let b = IncreasingEvent::CoordAtLeast { time: 2, level: 1.0 };
        let r = fkg_brute_check(&law, &wall, 1.0, &a, &b).unwrap();
        assert_abs_diff_eq!(r.p_survive, 0.75);
        assert_abs_diff_eq!(r.p_a, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_b, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_ab, 1.0 / 3.0, epsilon = 1e-12);
        assert!(r.ok);
    }

    #[test]
    fn random_event_pairs_are_positively_associated() {
        let law = StepLaw::rademacher();
        let mut rng = RngStream::new(77, 0).rng();
        for trial in 0..40 {
            let n = 6;
            // a random lattice wall the walk can live above
            let mut wall = vec![0.0; n + 1];
            let mut level = -1.0f64;
            for w in wall.iter_mut().skip(1) {
                level += if rng.random_bool(0.4) { 1.0 } else { -1.0 };
                *w = level.min(1.0);
            }
            let a = IncreasingEvent::random(n, (n as f64).sqrt(), &mut rng);
            let b = IncreasingEvent::random(n, (n as f64).sqrt(), &mut rng);
            match fkg_brute_check(&law, &wall, 2.0, &a, &b) {
                Ok(r) => assert!(
                    r.ok,
                    "trial {trial}: P(AB)={} < P(A)P(B)={} for {a:?}, {b:?}",
                    r.p_ab,
                    r.p_a * r.p_b
                ),
                Err(Error::InvalidInput(_)) => {} // empty conditioning is fine
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn malformed_events_are_rejected() {
        let n = 4;
        assert!(IncreasingEvent::CoordAtLeast { time: 0, level: 0.0 }.validate(n).is_err());
        assert!(IncreasingEvent::CoordAtLeast { time: 5, level: 0.0 }.validate(n).is_err());
        assert!(IncreasingEvent::WeightedSumAtLeast {
            weights: vec![0.5, -0.1, 0.2, 0.3],
            level: 0.0
        }
        .validate(n)
        .is_err());
        assert!(IncreasingEvent::WeightedSumAtLeast { weights: vec![1.0; 3], level: 0.0 }
            .validate(n)
            .is_err());
        let ok = IncreasingEvent::Intersection(
            Box::new(IncreasingEvent::AllCoordsAtLeast { level: -1.0 }),
            Box::new(IncreasingEvent::CoordAtLeast { time: 2, level: 0.5 }),
        );
        assert!(ok.validate(n).is_ok());
    }
}
