//! Decomposition of a wall path into macroscopic excursion blocks, and the
//! subadditive (restart-chain) machinery built on the blocks.
//!
//! A block boundary is a return of the wall to zero that follows a crossing
//! of the threshold level: starting from the previous boundary, wait until
//! |Y| reaches the threshold, then cut at the next zero of Y. Block
//! durations and maxima are recorded with interpolated crossing times;
//! boundaries are additionally snapped to grid indices so the survival
//! engines can be anchored at them.
//!
//! The block log-costs `q_{m,n} = -log p_{m,n}` use the worst admissible
//! start (the bottom of the end-window when it is one-sided), which makes
//! the chain inequality `q_{0,n} <= q_{0,m} + q_{m,n}` hold instance by
//! instance and the normalized cost `q_{0,n}/n` converge.

use crate::error::{Error, Result};
use crate::paths::{PathSample, TimeGrid};
use crate::survival::grid::{grid_survival, GridOpts};
use crate::survival::{EndWindow, Schedule, Walker, WindowScale};
use crate::walls::WallRealization;

/// Block decomposition of a wall path.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionDecomposition {
    pub threshold: f64,
    /// Interpolated boundary times `rho_0 = start < rho_1 < ...`; the
    /// number of complete blocks is `rho.len() - 1`.
    pub rho: Vec<f64>,
    /// Grid indices at or just after each boundary (engine anchor points).
    pub rho_index: Vec<usize>,
    /// Last interpolated zero before each `rho_{i+1}` (start of the block's
    /// macroscopic excursion).
    pub tau: Vec<f64>,
    /// Block durations `r_i = rho_{i+1} - rho_i`.
    pub r: Vec<f64>,
    /// Largest wall value over each block.
    pub maxima: Vec<f64>,
}

impl ExcursionDecomposition {
    pub fn n_blocks(&self) -> usize {
        self.r.len()
    }

    pub fn mean_duration(&self) -> f64 {
        crate::stats::mean(&self.r)
    }

    /// The wall sub-path of block `i`, time-shifted to start at 0.
    pub fn segment(&self, wall: &PathSample, i: usize) -> Result<PathSample> {
        if i + 1 >= self.rho_index.len() {
            return Err(Error::OutOfRange(format!(
                "block {i} of {} requested",
                self.n_blocks()
            )));
        }
        let (a, b) = (self.rho_index[i], self.rho_index[i + 1]);
        let t0 = wall.grid.t(a);
        let times: Vec<f64> = (a..=b).map(|k| wall.grid.t(k) - t0).collect();
        let values = wall.values[a..=b].to_vec();
        PathSample::new(TimeGrid::from_times(times)?, values)
    }
}

/// Interpolated zero between grid points `j` and `j+1`.
fn crossing_time(grid: &TimeGrid, values: &[f64], j: usize) -> f64 {
    let (t0, t1) = (grid.t(j), grid.t(j + 1));
    let (y0, y1) = (values[j], values[j + 1]);
    if y0 == 0.0 {
        return t0;
    }
    if y1 == 0.0 || y0 == y1 {
        return t1;
    }
    t0 + (t1 - t0) * y0 / (y0 - y1)
}

/// Split a path at returns to zero that follow a `|Y| >= threshold`
/// crossing. A path that never reaches the threshold yields an empty (but
/// valid) decomposition.
pub fn decompose(path: &PathSample, threshold: f64) -> Result<ExcursionDecomposition> {
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "threshold {threshold} must be finite > 0"
        )));
    }
    let y = &path.values;
    let n = y.len();
    // locate the first zero (paths normally start there)
    let mut start = None;
    for j in 0..n {
        if y[j] == 0.0 {
            start = Some((path.grid.t(j), j));
            break;
        }
        if j + 1 < n && y[j] * y[j + 1] < 0.0 {
            start = Some((crossing_time(&path.grid, y, j), j + 1));
            break;
        }
    }
    let Some((t_start, i_start)) = start else {
        return Err(Error::InvalidInput(
            "path has no zero to anchor the decomposition".into(),
        ));
    };

    let mut rho = vec![t_start];
    let mut rho_index = vec![i_start];
    let mut tau = Vec::new();
    let mut r = Vec::new();
    let mut maxima = Vec::new();

    let mut block_lo = i_start;
    loop {
        // first threshold crossing in the current block
        let Some(sigma) = (block_lo..n).find(|&j| y[j].abs() >= threshold) else {
            break;
        };
        // next zero of Y after sigma
        let sgn = y[sigma].signum();
        let Some(cross) = (sigma..n - 1).find(|&j| y[j + 1] == 0.0 || y[j + 1] * sgn < 0.0)
        else {
            break; // excursion incomplete within the horizon
        };
        let t_rho = crossing_time(&path.grid, y, cross);
        // last zero before the boundary: the crossing into the macroscopic
        // excursion's sign, scanned back from sigma
        let t_tau = (block_lo..sigma)
            .rev()
            .find(|&j| y[j] * sgn <= 0.0)
            .map(|j| crossing_time(&path.grid, y, j))
            .unwrap_or(*rho.last().unwrap());
        let m = y[block_lo..=cross]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let prev = *rho.last().unwrap();
        rho.push(t_rho);
        rho_index.push(cross + 1);
        tau.push(t_tau);
        r.push(t_rho - prev);
        maxima.push(m);
        block_lo = cross + 1;
    }

    Ok(ExcursionDecomposition { threshold, rho, rho_index, tau, r, maxima })
}

/// Log-cost `q_{m,n} = -log p_{m,n}` of one span of blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockLogProb {
    pub m: usize,
    pub n: usize,
    /// `-log` of the worst-start windowed survival over `[rho_m, rho_n]`;
    /// `+inf` when the engine loses all mass.
    pub q: f64,
}

/// Wall sub-realization over `[rho_index[m], rho_index[n]]`, time-shifted
/// to start at 0. Refuses walls with overlays (the overlay would re-anchor).
fn slice_wall(wall: &WallRealization, i0: usize, i1: usize) -> Result<WallRealization> {
    if wall.spec.perturbation.is_some() {
        return Err(Error::InvalidSpec(
            "block analysis requires an overlay-free wall".into(),
        ));
    }
    let t0 = wall.path.grid.t(i0);
    let times: Vec<f64> = (i0..=i1)
        .map(|k| wall.path.grid.t(k) - t0)
        .collect();
    let values = wall.path.values[i0..=i1].to_vec();
    Ok(WallRealization {
        spec: wall.spec.clone(),
        path: PathSample::new(TimeGrid::from_times(times)?, values)?,
    })
}

fn wall_dt(wall: &WallRealization) -> Result<f64> {
    let ts = wall.path.grid.times();
    let dt = ts[1] - ts[0];
    for w in ts.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(Error::InvalidInput(
                "block analysis requires a uniform wall grid".into(),
            ));
        }
    }
    Ok(dt)
}

/// Worst-start windowed survival cost across blocks `m..n`.
///
/// The end-window `(a, b)` is relative to the wall value at the block
/// boundary (which is ~0 by construction). With `b = inf` the worst start
/// is exactly `wall + a`; for finite `b` an interior grid of starts is
/// scanned and the largest cost is reported.
pub fn block_logprob(
    wall: &WallRealization,
    dec: &ExcursionDecomposition,
    m: usize,
    n: usize,
    interval: (f64, f64),
    walker: &Walker,
    opts: &GridOpts,
) -> Result<BlockLogProb> {
    if n <= m || n > dec.n_blocks() {
        return Err(Error::InvalidInput(format!(
            "need m < n <= {}, got ({m}, {n})",
            dec.n_blocks()
        )));
    }
    let (a, b) = interval;
    if !(a < b) || !a.is_finite() {
        return Err(Error::InvalidInput(format!(
            "interval ({a}, {b}) must have finite a < b"
        )));
    }
    let piece = slice_wall(wall, dec.rho_index[m], dec.rho_index[n])?;
    let dt = wall_dt(&piece)?;
    let horizon = piece.horizon();
    let window = EndWindow::new(a, b, WindowScale::Constant)?;
    let base = piece.path.values[0];
    let starts: Vec<f64> = if b.is_infinite() {
        vec![base + a]
    } else {
        (1..=7).map(|k| base + a + (b - a) * k as f64 / 8.0).collect()
    };
    let mut q: f64 = 0.0;
    for x in starts {
        let curve = grid_survival(
            walker,
            &piece,
            x,
            &Schedule::UniformContinuous { dt },
            &[horizon],
            Some(&window),
            opts,
        )?;
        let lp = curve.entries[0].log_p;
        let qx = if lp == f64::NEG_INFINITY { f64::INFINITY } else { -lp };
        q = q.max(qx);
    }
    Ok(BlockLogProb { m, n, q: q.max(0.0) })
}

/// The normalized-cost sequence `q_{0,n}/n` and the decay-rate estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct KingmanTrend {
    /// `(n, q_{0,n}/n)` along the requested block counts.
    pub q_over_n: Vec<(usize, f64)>,
    /// Last normalized cost: the per-block rate estimate.
    pub gamma_tilde: f64,
    /// Empirical mean block duration.
    pub mean_r: f64,
    /// Per-unit-time decay rate: `q_{0,nmax} / (rho_nmax - rho_0)`.
    pub gamma_rate: f64,
    /// False when the decomposition had fewer blocks than requested.
    pub complete: bool,
}

/// One sweep from the worst start with read-outs at each block boundary.
pub fn kingman_trend(
    wall: &WallRealization,
    dec: &ExcursionDecomposition,
    walker: &Walker,
    interval: (f64, f64),
    n_list: &[usize],
    opts: &GridOpts,
) -> Result<KingmanTrend> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(Error::InvalidInput(
            "block counts must be strictly increasing and >= 1".into(),
        ));
    }
    let (a, b) = interval;
    if !b.is_infinite() {
        return Err(Error::InvalidInput(
            "the single-sweep trend needs a one-sided window (b = inf)".into(),
        ));
    }
    let complete = *n_list.last().unwrap() <= dec.n_blocks();
    let usable: Vec<usize> = n_list
        .iter()
        .cloned()
        .filter(|&n| n <= dec.n_blocks())
        .collect();
    if usable.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no complete blocks to analyze (have {})",
            dec.n_blocks()
        )));
    }
    let i0 = dec.rho_index[0];
    let piece = slice_wall(wall, i0, dec.rho_index[*usable.last().unwrap()])?;
    let dt = wall_dt(&piece)?;
    let t0 = wall.path.grid.t(i0);
    let horizons: Vec<f64> = usable
        .iter()
        .map(|&n| wall.path.grid.t(dec.rho_index[n]) - t0)
        .collect();
    let window = EndWindow::new(a, b, WindowScale::Constant)?;
    let start = piece.path.values[0] + a;
    let curve = grid_survival(
        walker,
        &piece,
        start,
        &Schedule::UniformContinuous { dt },
        &horizons,
        Some(&window),
        opts,
    )?;
    let mut q_over_n = Vec::with_capacity(usable.len());
    for (e, &n) in curve.entries.iter().zip(&usable) {
        let q = if e.log_p == f64::NEG_INFINITY { f64::INFINITY } else { -e.log_p };
        q_over_n.push((n, q.max(0.0) / n as f64));
    }
    let (n_max, gamma_tilde) = *q_over_n.last().unwrap();
    let mean_r = crate::stats::mean(&dec.r[..n_max]);
    let elapsed = dec.rho[n_max] - dec.rho[0];
    let gamma_rate = (gamma_tilde * n_max as f64) / elapsed;
    Ok(KingmanTrend { q_over_n, gamma_tilde, mean_r, gamma_rate, complete })
}

/// Exhaustive check of `q_{0,n} <= q_{0,m} + q_{m,n}` over all `m < n <=
/// n_max`, sharing one engine sweep per origin block.
#[derive(Debug, Clone, PartialEq)]
pub struct SubadditivityReport {
    pub pairs: usize,
    pub violations: usize,
    /// Largest value of `q_{0,n} - q_{0,m} - q_{m,n}` observed (<= slack
    /// when the check passes).
    pub max_excess: f64,
}

pub fn subadditivity_check(
    wall: &WallRealization,
    dec: &ExcursionDecomposition,
    walker: &Walker,
    interval: (f64, f64),
    n_max: usize,
    slack: f64,
    opts: &GridOpts,
) -> Result<SubadditivityReport> {
    if n_max > dec.n_blocks() {
        return Err(Error::InvalidInput(format!(
            "asked for {n_max} blocks, decomposition has {}",
            dec.n_blocks()
        )));
    }
    if n_max < 2 {
        return Err(Error::InvalidInput("need n_max >= 2".into()));
    }
    let (a, b) = interval;
    if !b.is_infinite() {
        return Err(Error::InvalidInput(
            "the chain check uses one-sided windows (b = inf)".into(),
        ));
    }
    let window = EndWindow::new(a, b, WindowScale::Constant)?;
    // q[m][n]: cost of blocks m..n from the worst start, one sweep per m
    let mut q = vec![vec![f64::NAN; n_max + 1]; n_max];
    for m in 0..n_max {
        let piece = slice_wall(wall, dec.rho_index[m], dec.rho_index[n_max])?;
        let dt = wall_dt(&piece)?;
        let tm = wall.path.grid.t(dec.rho_index[m]);
        let horizons: Vec<f64> = (m + 1..=n_max)
            .map(|n| wall.path.grid.t(dec.rho_index[n]) - tm)
            .collect();
        let start = piece.path.values[0] + a;
        let curve = grid_survival(
            walker,
            &piece,
            start,
            &Schedule::UniformContinuous { dt },
            &horizons,
            Some(&window),
            opts,
        )?;
        for (e, n) in curve.entries.iter().zip(m + 1..=n_max) {
            q[m][n] = if e.log_p == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                (-e.log_p).max(0.0)
            };
        }
    }
    let mut pairs = 0;
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    for n in 2..=n_max {
        for m in 1..n {
            pairs += 1;
            let excess = q[0][n] - q[0][m] - q[m][n];
            if excess.is_nan() {
                continue; // both sides infinite
            }
            max_excess = max_excess.max(excess);
            if excess > slack {
                violations += 1;
            }
        }
    }
    Ok(SubadditivityReport { pairs, violations, max_excess })
}

/// `(t, -log p / t)` pairs from a survival curve: the running decay rate.
pub fn decay_rate_trend(curve: &crate::survival::SurvivalCurve) -> Vec<(f64, f64)> {
    curve
        .entries
        .iter()
        .filter(|e| e.horizon > 0.0)
        .map(|e| (e.horizon, -e.log_p / e.horizon))
        .collect()
}
