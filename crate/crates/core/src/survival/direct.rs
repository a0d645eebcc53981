//! Plain Monte Carlo: independent full paths, no population tricks.
//!
//! The estimate at each horizon is a binomial proportion, so this estimator
//! is only useful where survival probabilities are not too small — which is
//! exactly what makes it a trustworthy cross-check for the others.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::walls::WallRealization;

use super::smc::LOW_ESS;
use super::{EndWindow, Estimator, Schedule, SurvivalCurve, SurvivalEntry, Walker};

pub fn direct_mc_survival(
    walker: &Walker,
    wall: &WallRealization,
    x0: f64,
    schedule: &Schedule,
    horizons: &[f64],
    window: Option<&EndWindow>,
    samples: usize,
    bridge: bool,
    stream: RngStream,
) -> Result<SurvivalCurve> {
    walker.validate()?;
    if samples == 0 {
        return Err(Error::InvalidInput("need at least 1 sample".into()));
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
    let anchors: Vec<f64> = ro_idx
        .iter()
        .map(|&i| wall.value_at(times[i]))
        .collect::<Result<_>>()?;

    let discrete = walker.is_discrete();
    let alive_at_start = if discrete { x0 >= barr[0] - 1e-9 } else { x0 > barr[0] };
    let mut curve = SurvivalCurve::default();
    if !alive_at_start {
        for &h in horizons {
            curve.entries.push(SurvivalEntry {
                horizon: h,
                log_p: f64::NEG_INFINITY,
                stderr: 0.0,
                estimator: Estimator::Direct,
                died: true,
                low_ess: true,
            });
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
    let mut counts = vec![0u64; horizons.len()];
    for _ in 0..samples {
        let mut x = x0;
        let mut ro_ptr = 0usize;
        for k in 0..last {
            let dt = times[k + 1] - times[k];
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
            let b1 = barr[k + 1];
            let alive = if discrete { y >= b1 - 1e-9 } else { y > b1 };
            if !alive {
                break;
            }
            if let Some(rate) = bridge_rate {
                let p = crate::paths::bridge_noncrossing(x - barr[k], y - b1, dt, rate)?;
                if rng.random::<f64>() >= p {
                    break;
                }
            }
            x = y;
            if ro_ptr < ro_idx.len() && k + 1 == ro_idx[ro_ptr] {
                let hit = match window {
                    Some(w) => w.contains(x, x0, anchors[ro_ptr], times[k + 1]),
                    None => true,
                };
                if hit {
                    counts[ro_ptr] += 1;
                }
                ro_ptr += 1;
            }
        }
    }

    for (i, &h) in horizons.iter().enumerate() {
        let c = counts[i];
        let p = c as f64 / samples as f64;
        let (log_p, stderr) = if c == 0 {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            // delta-method error of log p for a binomial proportion
            (p.ln(), ((1.0 - p) / (samples as f64 * p)).sqrt())
        };
        curve.entries.push(SurvivalEntry {
            horizon: h,
            log_p,
            stderr,
            estimator: Estimator::Direct,
            died: false,
            low_ess: c < LOW_ESS as u64,
        });
    }
    Ok(curve)
}
