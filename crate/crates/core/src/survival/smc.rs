//! Particle estimator: a population of walkers with killing and systematic
//! resampling.
//!
//! Particles are unweighted. Each step every particle moves by one kernel
//! draw; particles below the barrier (or losing the within-step bridge coin
//! for diffusive walkers) are killed, and the surviving fraction is folded
//! into a running log-mass. When the population falls below half its target
//! size it is rebuilt to full size by systematic resampling, so deep runs
//! keep resolution while the log-mass keeps track of the actual probability.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::walls::WallRealization;

use super::{EndWindow, Estimator, Schedule, SurvivalCurve, SurvivalEntry, Walker};

/// Fewest effective samples behind a read-out before it is flagged.
pub const LOW_ESS: usize = 10;

pub fn smc_survival(
    walker: &Walker,
    wall: &WallRealization,
    x0: f64,
    schedule: &Schedule,
    horizons: &[f64],
    window: Option<&EndWindow>,
    particles: usize,
    bridge: bool,
    stream: RngStream,
) -> Result<SurvivalCurve> {
    walker.validate()?;
    if particles < 2 {
        return Err(Error::InvalidInput("need at least 2 particles".into()));
    }
    if walker.is_discrete() && !matches!(schedule, Schedule::UniformInteger) {
        return Err(Error::InvalidSpec(
            "finite-support walkers run on the integer schedule".into(),
        ));
    }
    let hmax = *horizons.last().ok_or_else(|| {
        Error::InvalidInput("need at least one read-out horizon".into())
    })?;
    if wall.horizon() < hmax * (1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!(
            "wall realized to {} but read-outs go to {hmax}",
            wall.horizon()
        )));
    }
    let mut times = schedule.times(hmax)?;
    let ro_idx = Schedule::readout_indices(&times, horizons)?;
    times.truncate(ro_idx.last().unwrap() + 1);
    let last = times.len() - 1;
    let barr: Vec<f64> = times
        .iter()
        .map(|&t| wall.barrier_at(t))
        .collect::<Result<_>>()?;

    let discrete = walker.is_discrete();
    let mut curve = SurvivalCurve::default();
    let alive_at_start = if discrete { x0 >= barr[0] - 1e-9 } else { x0 > barr[0] };
    if !alive_at_start {
        for &h in horizons {
            curve.entries.push(dead_entry(h));
        }
        return Ok(curve);
    }

    let bridge_rate = if bridge {
        match walker {
            Walker::Brownian { var_rate } => Some(*var_rate),
            Walker::Ou { params } => Some(params.sigma * params.sigma),
            Walker::DiscreteStep { .. } => None,
        }
    } else {
        None
    };

    let mut rng = stream.rng();
    let mut pop = vec![x0; particles];
    let mut log_mass = 0.0_f64;
    let mut ro_ptr = 0usize;

    for k in 0..last {
        let dt = times[k + 1] - times[k];
        let (b0, b1) = (barr[k], barr[k + 1]);
        let before = pop.len();
        let mut next = Vec::with_capacity(before);
        for &x in &pop {
            let y = match walker {
                Walker::Brownian { var_rate } => {
                    let z: f64 = rng.sample(StandardNormal);
                    x + z * (var_rate * dt).sqrt()
                }
                Walker::Ou { params } => {
                    let (m, v) = params.transition(x, dt);
                    let z: f64 = rng.sample(StandardNormal);
                    m + z * v.sqrt()
                }
                Walker::DiscreteStep { law } => x + law.sample(&mut rng),
            };
            let alive = if discrete { y >= b1 - 1e-9 } else { y > b1 };
            if !alive {
                continue;
            }
            if let Some(rate) = bridge_rate {
                let p = crate::paths::bridge_noncrossing(x - b0, y - b1, dt, rate)?;
                if rng.random::<f64>() >= p {
                    continue;
                }
            }
            next.push(y);
        }
        let alive = next.len();
        if alive == 0 {
            while ro_ptr < ro_idx.len() {
                curve.entries.push(dead_entry(horizons[ro_ptr]));
                ro_ptr += 1;
            }
            return Ok(curve);
        }
        log_mass += (alive as f64 / before as f64).ln();
        pop = next;

        if ro_ptr < ro_idx.len() && k + 1 == ro_idx[ro_ptr] {
            let t = times[k + 1];
            let (log_p, ess) = match window {
                Some(w) => {
                    let anchor = wall.value_at(t)?;
                    let inside = pop
                        .iter()
                        .filter(|&&p| w.contains(p, x0, anchor, t))
                        .count();
                    let lp = if inside == 0 {
                        f64::NEG_INFINITY
                    } else {
                        log_mass + (inside as f64 / pop.len() as f64).ln()
                    };
                    (lp, inside)
                }
                None => (log_mass, pop.len()),
            };
            let stderr = if ess > 0 { 1.0 / (ess as f64).sqrt() } else { f64::INFINITY };
            curve.entries.push(SurvivalEntry {
                horizon: t,
                log_p,
                stderr,
                estimator: Estimator::Smc,
                died: false,
                low_ess: ess < LOW_ESS,
            });
            ro_ptr += 1;
        }

        if pop.len() < particles / 2 {
            pop = systematic_resample(&pop, particles, &mut rng);
        }
    }
    Ok(curve)
}

/// Rebuild an equal-weight population of `target` copies: each survivor is
/// replicated an (almost surely) near-proportional number of times.
fn systematic_resample<R: Rng>(pop: &[f64], target: usize, rng: &mut R) -> Vec<f64> {
    let n = pop.len() as f64;
    let u: f64 = rng.random::<f64>();
    (0..target)
        .map(|i| pop[(((i as f64 + u) * n / target as f64) as usize).min(pop.len() - 1)])
        .collect()
}

fn dead_entry(h: f64) -> SurvivalEntry {
    SurvivalEntry {
        horizon: h,
        log_p: f64::NEG_INFINITY,
        stderr: 0.0,
        estimator: Estimator::Smc,
        died: true,
        low_ess: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::StepLaw;
    use crate::paths::{PathSample, TimeGrid};
    use crate::rng::RngStream;
    use crate::survival::grid::{grid_survival, GridOpts};
    use crate::walls::{realize_wall, WallKind, WallSpec};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn zero_wall(horizon: f64, dt: f64) -> WallRealization {
        let steps = (horizon / dt).round() as usize;
        let grid = TimeGrid::uniform(0.0, dt, steps).unwrap();
        let values = vec![0.0; grid.len()];
        WallRealization {
            spec: WallSpec::new(WallKind::Zero),
            path: PathSample::new(grid, values).unwrap(),
        }
    }

    #[test]
    fn flat_barrier_matches_closed_form() {
        let walker = Walker::Brownian { var_rate: 1.0 };
        let wall = zero_wall(4.0, 1.0 / 32.0);
        let sched = Schedule::UniformContinuous { dt: 1.0 / 32.0 };
        let curve = smc_survival(
            &walker,
            &wall,
            1.0,
            &sched,
            &[4.0],
            None,
            40_000,
            true,
            RngStream::new(11, 0),
        )
        .unwrap();
        let n = Normal::new(0.0, 1.0).unwrap();
        let truth = 2.0 * n.cdf(0.5) - 1.0;
        let got = curve.entries[0].log_p.exp();
        assert!(
            (got - truth).abs() / truth < 0.03,
            "got {got}, want {truth}"
        );
    }

    #[test]
    fn agrees_with_grid_on_a_frozen_wall() {
        let spec = WallSpec::new(WallKind::ScaledBrownian { beta: 0.7 });
        let sched = Schedule::OctaveDoubling { first_horizon: 1.0, steps_per_octave: 16 };
        let grid_times = TimeGrid::from_times(sched.times(64.0).unwrap()).unwrap();
        let wall = crate::walls::realize_wall_on(&spec, &grid_times, RngStream::new(5, 2)).unwrap();
        let walker = Walker::Brownian { var_rate: 1.0 };
        let dense = grid_survival(
            &walker,
            &wall,
            1.0,
            &sched,
            &[64.0],
            None,
            &GridOpts::default(),
        )
        .unwrap();
        let particle = smc_survival(
            &walker,
            &wall,
            1.0,
            &sched,
            &[64.0],
            None,
            30_000,
            true,
            RngStream::new(11, 3),
        )
        .unwrap();
        let (a, b) = (dense.entries[0].log_p, particle.entries[0].log_p);
        assert!(
            (a - b).abs() < 0.15,
            "grid {a} vs particles {b} disagree"
        );
    }

    #[test]
    fn discrete_walk_matches_enumeration() {
        let law = StepLaw::rademacher();
        let spec = WallSpec::new(WallKind::RandomWalk { step: StepLaw::rademacher(), beta: 1.0 });
        let wall = realize_wall(&spec, 6.0, RngStream::new(9, 1)).unwrap();
        let exact = crate::survival::brute::brute_force_survival(
            &law,
            &wall.path.values,
            2.0,
            None,
        )
        .unwrap();
        let curve = smc_survival(
            &Walker::DiscreteStep { law },
            &wall,
            2.0,
            &Schedule::UniformInteger,
            &[6.0],
            None,
            50_000,
            false,
            RngStream::new(13, 4),
        )
        .unwrap();
        let got = curve.entries[0].log_p.exp();
        // ~4 sigma of a binomial proportion at 50k samples
        let sd = (exact * (1.0 - exact) / 50_000.0).sqrt();
        assert!(
            (got - exact).abs() < 4.0 * sd + 1e-12,
            "got {got}, exact {exact}"
        );
    }

    #[test]
    fn resampling_keeps_deep_runs_alive() {
        // survival to 256 under a flat barrier is ~ 0.05; without resampling
        // a 1000-particle population would be close to extinction
        let walker = Walker::Brownian { var_rate: 1.0 };
        let wall = zero_wall(256.0, 0.25);
        let sched = Schedule::UniformContinuous { dt: 0.25 };
        let curve = smc_survival(
            &walker,
            &wall,
            1.0,
            &sched,
            &[256.0],
            None,
            1000,
            true,
            RngStream::new(2, 7),
        )
        .unwrap();
        let e = &curve.entries[0];
        assert!(!e.died && !e.low_ess);
        let truth = {
            let n = Normal::new(0.0, 1.0).unwrap();
            (2.0 * n.cdf(1.0 / 16.0) - 1.0).ln()
        };
        assert!(
            (e.log_p - truth).abs() < 0.2,
            "log_p {} vs {truth}",
            e.log_p
        );
    }

    #[test]
    fn start_below_barrier_dies_immediately() {
        let walker = Walker::Brownian { var_rate: 1.0 };
        let wall = zero_wall(1.0, 0.5);
        let curve = smc_survival(
            &walker,
            &wall,
            -1.0,
            &Schedule::UniformContinuous { dt: 0.5 },
            &[1.0],
            None,
            100,
            true,
            RngStream::new(1, 0),
        )
        .unwrap();
        assert!(curve.entries[0].died);
    }
}
