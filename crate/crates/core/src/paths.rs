//! Time grids, sampled paths and exact one-step transitions.
//!
//! Continuous processes are simulated at grid times only. The Gaussian
//! transitions used here are exact in law at those times, so discretization
//! enters solely through what happens *between* grid points; the estimators
//! account for that with the bridge non-crossing factor
//! [`bridge_noncrossing`] instead of grid refinement.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing sequence of sample times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    /// Uniform grid `t0, t0+dt, ..., t0+steps*dt` (`steps+1` points).
    pub fn uniform(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !t0.is_finite() || t0 < 0.0 {
            return Err(Error::InvalidInput(format!("grid start {t0} must be finite >= 0")));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidInput(format!("grid step {dt} must be finite > 0")));
        }
        Ok(TimeGrid {
            times: (0..=steps).map(|i| t0 + i as f64 * dt).collect(),
        })
    }

    /// Grid from explicit times; must be finite, nonnegative, strictly
    /// increasing, nonempty.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidInput("empty time grid".into()));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidInput("grid times must be finite >= 0".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("grid times must strictly increase".into()));
        }
        Ok(TimeGrid { times })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn first(&self) -> f64 {
        self.times[0]
    }

    pub fn last(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Index of the last grid time `<= t`, or an error outside the span.
    pub fn index_at_or_before(&self, t: f64) -> Result<usize> {
        if t < self.first() || t > self.last() {
            return Err(Error::OutOfRange(format!(
                "time {t} outside grid span [{}, {}]",
                self.first(),
                self.last()
            )));
        }
        Ok(match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(i) => i - 1,
        })
    }
}

/// A path sampled on a grid: `values[i]` is the state at `grid.t(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl PathSample {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} points but {} values were supplied",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("path values must be finite".into()));
        }
        Ok(PathSample { grid, values })
    }

    /// Linear interpolation between grid points; errors outside the span.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        let i = self.grid.index_at_or_before(t)?;
        if i + 1 == self.grid.len() {
            return Ok(self.values[i]);
        }
        let (t0, t1) = (self.grid.t(i), self.grid.t(i + 1));
        let frac = (t - t0) / (t1 - t0);
        Ok(self.values[i] * (1.0 - frac) + self.values[i + 1] * frac)
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// Mean-reverting diffusion parameters: reversion rate `mu` and noise scale
/// `sigma`, both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub mu: f64,
    pub sigma: f64,
}

impl OuParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || mu <= 0.0 || !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "reversion and noise scale must be finite > 0, got mu={mu} sigma={sigma}"
            )));
        }
        Ok(OuParams { mu, sigma })
    }

    /// Exact transition over `dt` from state `x`: returns `(mean, variance)`
    /// of the next state, `N(x e^{-mu dt}, sigma^2 (1 - e^{-2 mu dt}) / (2 mu))`.
    pub fn transition(&self, x: f64, dt: f64) -> (f64, f64) {
        let decay = (-self.mu * dt).exp();
        let var = self.sigma * self.sigma * (1.0 - decay * decay) / (2.0 * self.mu);
        (x * decay, var)
    }

    /// Variance of the stationary law `N(0, sigma^2 / (2 mu))`.
    pub fn invariant_var(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.mu)
    }
}

/// Brownian path on `grid` started at `x0` (value at the first grid time).
pub fn sample_bm<R: Rng + ?Sized>(grid: &TimeGrid, x0: f64, rng: &mut R) -> Result<PathSample> {
    if !x0.is_finite() {
        return Err(Error::InvalidInput("start point must be finite".into()));
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut x = x0;
    values.push(x);
    for w in grid.times().windows(2) {
        let dt = w[1] - w[0];
        let z: f64 = StandardNormal.sample(rng);
        x += dt.sqrt() * z;
        values.push(x);
    }
    PathSample::new(grid.clone(), values)
}

/// Mean-reverting path on `grid` started at `x0`, using the exact Gaussian
/// transition for each step (no Euler error at grid times).
pub fn sample_ou<R: Rng + ?Sized>(
    params: OuParams,
    grid: &TimeGrid,
    x0: f64,
    rng: &mut R,
) -> Result<PathSample> {
    if !x0.is_finite() {
        return Err(Error::InvalidInput("start point must be finite".into()));
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut x = x0;
    values.push(x);
    for w in grid.times().windows(2) {
        let (m, v) = params.transition(x, w[1] - w[0]);
        let z: f64 = StandardNormal.sample(rng);
        x = m + v.sqrt() * z;
        values.push(x);
    }
    PathSample::new(grid.clone(), values)
}

/// Deterministic time-change of a Brownian path into a mean-reverting path:
///
/// `X_t = x0 e^{-mu t} + (sigma / sqrt(2 mu)) e^{-mu t} W(e^{2 mu t} - 1)`.
///
/// `bm` must start at time 0 with value 0 and reach at least
/// `e^{2 mu T} - 1` for the last requested output time `T`. Values of `W`
/// between its grid points are linearly interpolated.
pub fn ou_from_bm(
    params: OuParams,
    x0: f64,
    bm: &PathSample,
    out_grid: &TimeGrid,
) -> Result<PathSample> {
    if bm.grid.first() != 0.0 || bm.values[0] != 0.0 {
        return Err(Error::InvalidInput(
            "time-change needs a driving path with W(0) = 0".into(),
        ));
    }
    let horizon_needed = (2.0 * params.mu * out_grid.last()).exp() - 1.0;
    if bm.grid.last() < horizon_needed {
        return Err(Error::OutOfRange(format!(
            "driving path covers [0, {}] but the time-change needs [0, {horizon_needed}]",
            bm.grid.last()
        )));
    }
    let scale = params.sigma / (2.0 * params.mu).sqrt();
    let mut values = Vec::with_capacity(out_grid.len());
    for &t in out_grid.times() {
        let decay = (-params.mu * t).exp();
        let w = bm.value_at((2.0 * params.mu * t).exp() - 1.0)?;
        values.push(x0 * decay + scale * decay * w);
    }
    PathSample::new(out_grid.clone(), values)
}

/// Probability that a Brownian bridge with variance rate `var_rate` over a
/// step of length `dt`, pinned at heights `a > 0` and `b > 0` above a linear
/// barrier, stays above that barrier for the whole step:
/// `1 - exp(-2 a b / (var_rate * dt))`. Zero whenever an endpoint is at or
/// below the barrier.
///
/// This is the exact correction for checking a continuous barrier between
/// two consecutive grid times, which is why engines can take coarse steps
/// without a systematic one-sided bias.
pub fn bridge_noncrossing(a: f64, b: f64, dt: f64, var_rate: f64) -> Result<f64> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidInput(format!("step length {dt} must be finite > 0")));
    }
    if !var_rate.is_finite() || var_rate <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "variance rate {var_rate} must be finite > 0"
        )));
    }
    if a.is_nan() || b.is_nan() {
        return Err(Error::InvalidInput("bridge endpoints must not be NaN".into()));
    }
    if a <= 0.0 || b <= 0.0 {
        return Ok(0.0);
    }
    Ok(-(-2.0 * a * b / (var_rate * dt)).exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::stats::{ks_critical, ks_two_sample, mean, sample_var};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn ou_transition_example() {
        // mu = 1, sigma = 1, x = 2, dt = ln 2: mean 1, variance 3/8
        let p = OuParams::new(1.0, 1.0).unwrap();
        let (m, v) = p.transition(2.0, std::f64::consts::LN_2);
        assert_abs_diff_eq!(m, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.375, epsilon = 1e-12);
    }

    #[test]
    fn bridge_example_value() {
        // a = b = 1, dt = 1, rate 1: 1 - e^{-2}
        let p = bridge_noncrossing(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(p, 0.8646647167633873, epsilon = 1e-12);
    }

    #[test]
    fn bridge_edge_cases() {
        assert_eq!(bridge_noncrossing(0.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(bridge_noncrossing(1.0, -0.5, 1.0, 1.0).unwrap(), 0.0);
        assert!(bridge_noncrossing(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(bridge_noncrossing(1.0, 1.0, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn bridge_in_unit_interval_and_monotone(
            a in 1e-3f64..10.0,
            b in 1e-3f64..10.0,
            dt in 1e-3f64..10.0,
            rate in 1e-3f64..10.0,
        ) {
            let p = bridge_noncrossing(a, b, dt, rate).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            // more headroom never hurts
            let p2 = bridge_noncrossing(a * 2.0, b, dt, rate).unwrap();
            prop_assert!(p2 >= p);
            // longer steps cross more often
            let p3 = bridge_noncrossing(a, b, dt * 2.0, rate).unwrap();
            prop_assert!(p3 <= p);
        }
    }

    #[test]
    fn bm_increment_moments() {
        let grid = TimeGrid::uniform(0.0, 0.25, 16).unwrap();
        let mut rng = RngStream::new(11, 0).rng();
        let finals: Vec<f64> = (0..20_000)
            .map(|_| sample_bm(&grid, 0.0, &mut rng).unwrap().last())
            .collect();
        // B_4 ~ N(0, 4)
        assert_abs_diff_eq!(mean(&finals), 0.0, epsilon = 0.05);
        assert_abs_diff_eq!(sample_var(&finals), 4.0, epsilon = 0.15);
    }

    #[test]
    fn ou_marginal_moments() {
        // from x0 = 2 the state at t is N(2 e^{-t}, (1 - e^{-2t})/2) for mu = sigma = 1
        let p = OuParams::new(1.0, 1.0).unwrap();
        let grid = TimeGrid::uniform(0.0, 0.125, 24).unwrap();
        let mut rng = RngStream::new(12, 0).rng();
        let finals: Vec<f64> = (0..20_000)
            .map(|_| sample_ou(p, &grid, 2.0, &mut rng).unwrap().last())
            .collect();
        let t = 3.0f64;
        assert_abs_diff_eq!(mean(&finals), 2.0 * (-t).exp(), epsilon = 0.02);
        assert_abs_diff_eq!(
            sample_var(&finals),
            (1.0 - (-2.0 * t).exp()) / 2.0,
            epsilon = 0.02
        );
    }

    #[test]
    fn time_change_matches_direct_sampling_in_law() {
        // compare the time-changed construction against direct exact
        // transitions at t = 1 with a two-sample KS test at the 1% level
        let p = OuParams::new(1.0, 1.0).unwrap();
        let t_end = 1.0;
        let x0 = 0.5;
        let n = 10_000;
        let mut rng = RngStream::new(13, 0).rng();

        let bm_horizon = (2.0 * p.mu * t_end).exp() - 1.0;
        let bm_grid = TimeGrid::uniform(0.0, bm_horizon / 512.0, 512).unwrap();
        let out_grid = TimeGrid::from_times(vec![0.0, t_end]).unwrap();
        let mapped: Vec<f64> = (0..n)
            .map(|_| {
                let w = sample_bm(&bm_grid, 0.0, &mut rng).unwrap();
                ou_from_bm(p, x0, &w, &out_grid).unwrap().last()
            })
            .collect();

        let direct_grid = TimeGrid::from_times(vec![0.0, t_end]).unwrap();
        let direct: Vec<f64> = (0..n)
            .map(|_| sample_ou(p, &direct_grid, x0, &mut rng).unwrap().last())
            .collect();

        let d = ks_two_sample(&mapped, &direct);
        assert!(
            d < ks_critical(n, n, 0.01),
            "KS distance {d} exceeds the 1% critical value"
        );
    }

    #[test]
    fn time_change_at_zero_returns_start() {
        let p = OuParams::new(0.7, 1.3).unwrap();
        let bm_grid = TimeGrid::uniform(0.0, 0.5, 8).unwrap();
        let mut rng = RngStream::new(14, 0).rng();
        let w = sample_bm(&bm_grid, 0.0, &mut rng).unwrap();
        let out = TimeGrid::from_times(vec![0.0]).unwrap();
        let x = ou_from_bm(p, 1.25, &w, &out).unwrap();
        assert_abs_diff_eq!(x.values[0], 1.25, epsilon = 1e-14);
    }

    #[test]
    fn time_change_requires_covering_horizon() {
        let p = OuParams::new(1.0, 1.0).unwrap();
        let bm_grid = TimeGrid::uniform(0.0, 0.1, 10).unwrap(); // covers [0,1]
        let mut rng = RngStream::new(15, 0).rng();
        let w = sample_bm(&bm_grid, 0.0, &mut rng).unwrap();
        let out = TimeGrid::from_times(vec![0.0, 1.0]).unwrap(); // needs e^2-1 > 1
        assert!(matches!(
            ou_from_bm(p, 0.0, &w, &out),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::uniform(0.0, 0.0, 4).is_err());
        assert!(TimeGrid::from_times(vec![]).is_err());
        assert!(TimeGrid::from_times(vec![0.0, 0.0]).is_err());
        assert!(TimeGrid::from_times(vec![0.0, -1.0]).is_err());
        let g = TimeGrid::uniform(0.0, 0.5, 4).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.index_at_or_before(1.25).unwrap(), 2);
        assert!(g.index_at_or_before(9.0).is_err());
    }

    #[test]
    fn path_interpolation() {
        let g = TimeGrid::from_times(vec![0.0, 1.0, 3.0]).unwrap();
        let p = PathSample::new(g, vec![0.0, 2.0, -2.0]).unwrap();
        assert_abs_diff_eq!(p.value_at(0.5).unwrap(), 1.0);
        assert_abs_diff_eq!(p.value_at(2.0).unwrap(), 0.0);
        assert_abs_diff_eq!(p.value_at(3.0).unwrap(), -2.0);
        assert!(p.value_at(3.5).is_err());
    }
}
