//! Deterministic survival estimation by propagating a discretized density.
//!
//! The walker's sub-probability density (mass = survival probability so far)
//! lives on a uniform value grid. Each step convolves with the one-step
//! transition kernel, multiplies in a within-step non-crossing factor for
//! diffusive walkers, and zeroes mass below the barrier. Mass bookkeeping is
//! done in log space: the stored vector is kept normalized and
//! `log_mass_total` accumulates the survival log-probability, so runs can
//! reach probabilities far below `f64::MIN_POSITIVE` without underflow.
//!
//! Grids are rebuilt at octave boundaries: the step size and the bin width
//! both grow like the square root of elapsed time, which keeps the work per
//! octave constant and the total cost logarithmic in the horizon.

use crate::error::{Error, Result};
use crate::law::StepLaw;
use crate::walls::WallRealization;

use super::{EndWindow, Estimator, Schedule, SurvivalCurve, SurvivalEntry, Walker};

/// Tuning knobs for the grid estimator. Defaults balance accuracy against
/// cost for exponent fits; tighten `points_per_sd` for absolute-level work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOpts {
    /// Grid points per one-step standard deviation.
    pub points_per_sd: f64,
    /// Upward headroom above the barrier, in units of the density spread.
    pub span_sds: f64,
    /// Apply the within-step linear-barrier non-crossing factor for
    /// diffusive walkers.
    pub bridge: bool,
}

impl Default for GridOpts {
    fn default() -> Self {
        GridOpts { points_per_sd: 6.0, span_sds: 10.0, bridge: true }
    }
}

/// Normalized sub-probability mass on a uniform value grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    /// Value of bin 0.
    pub x0: f64,
    pub dx: f64,
    /// Bin masses; sum to 1 while alive.
    pub mass: Vec<f64>,
    /// Log of the actual mass represented (the survival log-probability).
    pub log_mass_total: f64,
    pub died: bool,
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    dx: f64,
    n: usize,
}

impl GridDensity {
    /// Point mass at `x`. The bin width is nominal; the first re-grid puts
    /// the mass onto a real frame.
    pub fn delta(x: f64) -> Self {
        GridDensity { x0: x, dx: 1.0, mass: vec![1.0], log_mass_total: 0.0, died: false }
    }

    pub fn value(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    /// Index range `(first, last)` of bins holding mass, or `None` if empty.
    pub fn occupied(&self) -> Option<(usize, usize)> {
        let lo = self.mass.iter().position(|&m| m > 0.0)?;
        let hi = self.mass.iter().rposition(|&m| m > 0.0)?;
        Some((lo, hi))
    }

    pub fn mean(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(i, &m)| m * self.value(i))
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.mass
            .iter()
            .enumerate()
            .map(|(i, &m)| m * (self.value(i) - mu).powi(2))
            .sum()
    }

    /// Log of the normalized mass fraction strictly inside `(lo, hi)`.
    /// Atomic densities count bin centers; smooth ones count bins as
    /// intervals of width `dx` and include partial overlaps.
    pub fn window_log_frac(&self, lo: f64, hi: f64, atomic: bool) -> f64 {
        let h = self.dx / 2.0;
        let mut s = 0.0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let v = self.value(i);
            if atomic {
                if v > lo && v < hi {
                    s += m;
                }
            } else {
                let ov = (v + h).min(hi) - (v - h).max(lo);
                if ov > 0.0 {
                    s += m * (ov / self.dx).min(1.0);
                }
            }
        }
        s.ln()
    }

    /// Move the mass onto a new frame, preserving total mass and mean
    /// (each bin is split between the two nearest new bins).
    fn regrid_to(&self, f: &Frame) -> GridDensity {
        let mut mass = vec![0.0; f.n];
        if !self.died {
            for (i, &m) in self.mass.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let u = (self.value(i) - f.x0) / f.dx;
                let j = u.floor();
                let frac = u - j;
                let j = j as isize;
                if frac < 1e-9 {
                    deposit(&mut mass, j, m);
                } else if frac > 1.0 - 1e-9 {
                    deposit(&mut mass, j + 1, m);
                } else {
                    deposit(&mut mass, j, m * (1.0 - frac));
                    deposit(&mut mass, j + 1, m * frac);
                }
            }
        }
        GridDensity {
            x0: f.x0,
            dx: f.dx,
            mass,
            log_mass_total: self.log_mass_total,
            died: self.died,
        }
    }
}

fn deposit(mass: &mut [f64], j: isize, m: f64) {
    let j = j.clamp(0, mass.len() as isize - 1) as usize;
    mass[j] += m;
}

/// One-step transition kernel, discretized for a fixed `(dt, dx)`.
enum Kernel {
    /// Centered Gaussian increment: one shared offset-weight row.
    Gauss { weights: Vec<f64>, reach: isize },
    /// Mean-reverting transition: the row mean depends on the source value.
    Ou { decay: f64, s2: f64, reach: isize },
    /// Finite-support law on a commensurate lattice: exact index offsets.
    Atoms { offs: Vec<(isize, f64)> },
}

impl Kernel {
    fn reach(&self) -> isize {
        match self {
            Kernel::Gauss { reach, .. } | Kernel::Ou { reach, .. } => *reach,
            Kernel::Atoms { offs } => offs.iter().map(|&(o, _)| o.abs()).max().unwrap_or(0),
        }
    }
}

const KERNEL_SDS: f64 = 6.0;

fn build_kernel(walker: &Walker, dt: f64, dx: f64) -> Result<Kernel> {
    match walker {
        Walker::Brownian { var_rate } => {
            let var = var_rate * dt;
            let reach = (KERNEL_SDS * var.sqrt() / dx).ceil() as isize;
            let mut weights = Vec::with_capacity((2 * reach + 1) as usize);
            let mut total = 0.0;
            for k in -reach..=reach {
                let u = k as f64 * dx;
                let w = (-u * u / (2.0 * var)).exp();
                weights.push(w);
                total += w;
            }
            for w in &mut weights {
                *w /= total;
            }
            Ok(Kernel::Gauss { weights, reach })
        }
        Walker::Ou { params } => {
            let (_, s2) = params.transition(0.0, dt);
            let reach = (KERNEL_SDS * s2.sqrt() / dx).ceil() as isize;
            Ok(Kernel::Ou { decay: (-params.mu * dt).exp(), s2, reach })
        }
        Walker::DiscreteStep { law } => {
            let atoms = law
                .atoms()
                .ok_or_else(|| Error::InvalidSpec("discrete kernel needs a finite-support law".into()))?;
            let mut offs = Vec::with_capacity(atoms.len());
            for &(a, p) in atoms {
                let o = a / dx;
                let r = o.round();
                if (o - r).abs() > 1e-6 {
                    return Err(Error::InvalidSpec(format!(
                        "step atom {a} is not a multiple of the grid pitch {dx}"
                    )));
                }
                offs.push((r as isize, p));
            }
            Ok(Kernel::Atoms { offs })
        }
    }
}

/// Grid pitch for a finite-support walker: a common divisor of the atoms,
/// refined to at most half the step standard deviation.
fn discrete_dx(law: &StepLaw) -> Result<f64> {
    let atoms = law
        .atoms()
        .ok_or_else(|| Error::InvalidSpec("grid estimator needs a finite-support walker law".into()))?;
    let mut g = 0.0_f64;
    for &(a, _) in atoms {
        if a.abs() > 1e-12 {
            g = float_gcd(g, a.abs());
        }
    }
    if g <= 0.0 {
        return Err(Error::InvalidSpec("walker law has no nonzero atoms".into()));
    }
    let sd = law.sd();
    let dx = g / (g / (0.5 * sd)).ceil().max(1.0);
    if dx < sd / 64.0 {
        return Err(Error::InvalidSpec(
            "walker atoms are not commensurate with a reasonable lattice; \
             use the particle or direct estimator"
                .into(),
        ));
    }
    Ok(dx)
}

fn float_gcd(a: f64, b: f64) -> f64 {
    let (mut a, mut b) = (a.max(b), a.min(b));
    if b == 0.0 {
        return a;
    }
    while b > 1e-9 {
        let mut r = a % b;
        if r < 1e-9 || b - r < 1e-9 {
            r = 0.0;
        }
        a = b;
        b = r;
    }
    a
}

/// First bin index allowed to hold mass given the barrier at the step's end.
fn barrier_cut(frame_x0: f64, dx: f64, n: usize, b: f64, discrete: bool) -> usize {
    let u = (b - frame_x0) / dx;
    let j = if discrete {
        // keep values >= b (touching allowed), with a small tolerance
        (u - 1e-9).ceil() as isize
    } else {
        // keep values strictly above b
        (u + 1e-9).floor() as isize + 1
    };
    j.clamp(0, n as isize) as usize
}

/// One propagation step on a fixed frame: convolve, apply the within-step
/// factor, kill below the barrier, renormalize.
fn propagate(
    d: &GridDensity,
    kern: &Kernel,
    b0: f64,
    b1: f64,
    dt: f64,
    bridge_rate: Option<f64>,
) -> GridDensity {
    let n = d.mass.len();
    let mut out = vec![0.0; n];
    let Some((occ_lo, occ_hi)) = d.occupied() else {
        return dead_like(d);
    };
    let jmin = barrier_cut(d.x0, d.dx, n, b1, matches!(kern, Kernel::Atoms { .. }));

    match kern {
        Kernel::Gauss { weights, reach } => {
            let c = bridge_rate.map(|v| 2.0 / (v * dt));
            for i in occ_lo..=occ_hi {
                let mi = d.mass[i];
                if mi == 0.0 {
                    continue;
                }
                let ii = i as isize;
                let j_lo = (ii - reach).max(jmin as isize).max(0) as usize;
                let j_hi = ((ii + reach).min(n as isize - 1)) as usize;
                if j_lo > j_hi {
                    continue;
                }
                match c {
                    Some(c) => {
                        let a = d.value(i) - b0;
                        if a <= 0.0 {
                            continue;
                        }
                        // running product over e^{-c a (y_j - b1)}
                        let mut p = (-c * a * (d.value(j_lo) - b1)).exp();
                        let rho = (-c * a * d.dx).exp();
                        for j in j_lo..=j_hi {
                            let w = weights[(j as isize - ii + reach) as usize];
                            out[j] += mi * w * (1.0 - p);
                            p *= rho;
                        }
                    }
                    None => {
                        for j in j_lo..=j_hi {
                            let w = weights[(j as isize - ii + reach) as usize];
                            out[j] += mi * w;
                        }
                    }
                }
            }
        }
        Kernel::Ou { decay, s2, reach } => {
            let c = bridge_rate.map(|v| 2.0 / (v * dt));
            let q = (-d.dx * d.dx / s2).exp();
            let mut row = Vec::with_capacity((2 * reach + 1) as usize);
            for i in occ_lo..=occ_hi {
                let mi = d.mass[i];
                if mi == 0.0 {
                    continue;
                }
                let m_mean = decay * d.value(i);
                let jc = ((m_mean - d.x0) / d.dx).round() as isize;
                let j_lo = jc - reach;
                let j_hi = jc + reach;
                // pass 1: unnormalized weights over the full reach, including
                // off-grid bins, so the row normalization is kill-consistent
                row.clear();
                let u0 = (d.x0 + j_lo as f64 * d.dx) - m_mean;
                let mut w = (-u0 * u0 / (2.0 * s2)).exp();
                let mut g = (-(2.0 * u0 * d.dx + d.dx * d.dx) / (2.0 * s2)).exp();
                let mut rowsum = 0.0;
                for _ in j_lo..=j_hi {
                    row.push(w);
                    rowsum += w;
                    w *= g;
                    g *= q;
                }
                if rowsum <= 0.0 {
                    continue;
                }
                // pass 2: deposit the on-grid, above-barrier part
                let dep_lo = j_lo.max(jmin as isize).max(0);
                let dep_hi = j_hi.min(n as isize - 1);
                if dep_lo > dep_hi {
                    continue;
                }
                match c {
                    Some(c) => {
                        let a = d.value(i) - b0;
                        if a <= 0.0 {
                            continue;
                        }
                        let mut p = (-c * a * ((d.x0 + dep_lo as f64 * d.dx) - b1)).exp();
                        let rho = (-c * a * d.dx).exp();
                        for j in dep_lo..=dep_hi {
                            let w = row[(j - j_lo) as usize] / rowsum;
                            out[j as usize] += mi * w * (1.0 - p);
                            p *= rho;
                        }
                    }
                    None => {
                        for j in dep_lo..=dep_hi {
                            let w = row[(j - j_lo) as usize] / rowsum;
                            out[j as usize] += mi * w;
                        }
                    }
                }
            }
        }
        Kernel::Atoms { offs } => {
            for i in occ_lo..=occ_hi {
                let mi = d.mass[i];
                if mi == 0.0 {
                    continue;
                }
                for &(off, p) in offs {
                    let j = i as isize + off;
                    if j >= jmin as isize && j < n as isize {
                        out[j as usize] += mi * p;
                    }
                }
            }
        }
    }

    let total: f64 = out.iter().sum();
    if !(total > 1e-300) {
        return dead_like(d);
    }
    let inv = 1.0 / total;
    for m in &mut out {
        *m *= inv;
        if *m < 1e-250 {
            *m = 0.0; // flush to avoid subnormal slowdown
        }
    }
    GridDensity {
        x0: d.x0,
        dx: d.dx,
        mass: out,
        log_mass_total: d.log_mass_total + total.ln(),
        died: false,
    }
}

fn dead_like(d: &GridDensity) -> GridDensity {
    GridDensity {
        x0: d.x0,
        dx: d.dx,
        mass: vec![0.0; d.mass.len()],
        log_mass_total: f64::NEG_INFINITY,
        died: true,
    }
}

const MAX_FRAME_BINS: usize = 400_000;

/// Build the value frame for the block of steps ending at `t_end`, covering
/// the barrier's realized range over the block plus diffusive headroom.
#[allow(clippy::too_many_arguments)]
fn build_frame(
    walker: &Walker,
    dx: f64,
    occ_lo_val: f64,
    occ_hi_val: f64,
    barr_block: &[f64],
    block_span: f64,
    dt: f64,
    opts: &GridOpts,
    span_boost: f64,
    lattice_anchor: Option<f64>,
) -> Result<Frame> {
    let bmin = barr_block.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = match walker {
        Walker::Brownian { var_rate } => (var_rate * block_span).sqrt(),
        Walker::Ou { params } => {
            let diffusive = (params.sigma * params.sigma * block_span).sqrt();
            diffusive.min(1.5 * params.invariant_var().sqrt())
        }
        Walker::DiscreteStep { law } => (law.variance() * block_span).sqrt(),
    };
    let headroom = span_boost * opts.span_sds * spread + KERNEL_SDS * walker.step_var(dt).sqrt();
    // the grid needs to resolve the barrier only where mass can actually
    // reach; a barrier far below the diffusive range just never kills
    let lo = (bmin - 2.0 * dx).max(occ_lo_val - headroom);
    let hi = occ_hi_val + headroom;
    let x0 = match lattice_anchor {
        Some(anchor) => anchor + dx * ((lo - anchor) / dx).floor(),
        None => lo,
    };
    let n = ((hi - x0) / dx).ceil() as usize + 1;
    if n > MAX_FRAME_BINS {
        return Err(Error::SizeLimit(format!(
            "value grid would need {n} bins (limit {MAX_FRAME_BINS}); \
             check the wall scale and horizon"
        )));
    }
    Ok(Frame { x0, dx, n: n.max(4) })
}

/// Deterministic survival curve for `walker` above the realized `wall` from
/// start `x0`, stepped on `schedule`, read out at `horizons`.
pub fn grid_survival(
    walker: &Walker,
    wall: &WallRealization,
    x0: f64,
    schedule: &Schedule,
    horizons: &[f64],
    window: Option<&EndWindow>,
    opts: &GridOpts,
) -> Result<SurvivalCurve> {
    walker.validate()?;
    if !x0.is_finite() {
        return Err(Error::InvalidInput(format!("start {x0} must be finite")));
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
    let alive_at_start = if discrete { x0 >= barr[0] - 1e-9 } else { x0 > barr[0] };
    let mut curve = SurvivalCurve::default();
    if !alive_at_start {
        for &h in horizons {
            curve.entries.push(dead_entry(h));
        }
        return Ok(curve);
    }

    let fixed_dx = if discrete {
        Some(discrete_dx(match walker {
            Walker::DiscreteStep { law } => law,
            _ => unreachable!(),
        })?)
    } else {
        None
    };
    let bridge_rate = if opts.bridge {
        match walker {
            Walker::Brownian { var_rate } => Some(*var_rate),
            Walker::Ou { params } => Some(params.sigma * params.sigma),
            Walker::DiscreteStep { .. } => None,
        }
    } else {
        None
    };

    let mut density = GridDensity::delta(x0);
    let mut kern: Option<Kernel> = None;
    let mut cur_dt = f64::NAN;
    let mut frame_until = 0usize;
    let mut needs_rebuild = true;
    let mut span_boost = 1.0;
    let mut first_frame = true;
    let mut ro_ptr = 0usize;

    let mut k = 0usize;
    while k < last {
        let dt = times[k + 1] - times[k];
        if needs_rebuild || k >= frame_until || (dt - cur_dt).abs() > 1e-12 * dt {
            frame_until = next_frame_end(schedule, k, last);
            let dx = match fixed_dx {
                Some(dx) => dx,
                None => walker.step_var(dt).sqrt() / opts.points_per_sd,
            };
            let (olo, ohi) = match density.occupied() {
                Some((a, b)) => (density.value(a), density.value(b)),
                None => (x0, x0),
            };
            let anchor = if discrete || first_frame { Some(x0) } else { None };
            let frame = build_frame(
                walker,
                dx,
                olo,
                ohi,
                &barr[k..=frame_until],
                times[frame_until] - times[k],
                dt,
                opts,
                span_boost,
                anchor,
            )?;
            density = density.regrid_to(&frame);
            if (dt - cur_dt).abs() > 1e-12 * dt || kern.is_none() || fixed_dx.is_none() {
                kern = Some(build_kernel(walker, dt, dx)?);
                cur_dt = dt;
            }
            needs_rebuild = false;
            span_boost = 1.0;
            first_frame = false;
        }

        let kr = kern.as_ref().unwrap();
        density = propagate(&density, kr, barr[k], barr[k + 1], dt, bridge_rate);
        k += 1;

        if density.died {
            while ro_ptr < ro_idx.len() {
                curve.entries.push(dead_entry(horizons[ro_ptr]));
                ro_ptr += 1;
            }
            return Ok(curve);
        }

        // emergency: mass is approaching the top of the frame
        let reach = kr.reach() as usize;
        let n = density.mass.len();
        let tail: f64 = density.mass[n.saturating_sub(reach.max(2))..].iter().sum();
        if tail > 1e-12 {
            needs_rebuild = true;
            span_boost = 2.0;
        }

        if ro_ptr < ro_idx.len() && k == ro_idx[ro_ptr] {
            let t = times[k];
            let log_p = match window {
                Some(w) => {
                    let anchor = wall.value_at(t)?;
                    let (lo, hi) = w.position_bounds(x0, anchor, t);
                    density.log_mass_total + density.window_log_frac(lo, hi, discrete)
                }
                None => density.log_mass_total,
            };
            curve.entries.push(SurvivalEntry {
                horizon: t,
                log_p,
                stderr: 0.0,
                estimator: Estimator::Grid,
                died: false,
                low_ess: false,
            });
            ro_ptr += 1;
        }
    }
    Ok(curve)
}

fn next_frame_end(schedule: &Schedule, k: usize, last: usize) -> usize {
    match schedule {
        Schedule::OctaveDoubling { steps_per_octave, .. } => {
            ((k / steps_per_octave) + 1) * steps_per_octave
        }
        Schedule::UniformContinuous { .. } => last,
        Schedule::UniformInteger => 4.max((k + 1).next_power_of_two()),
    }
    .min(last)
}

fn dead_entry(h: f64) -> SurvivalEntry {
    SurvivalEntry {
        horizon: h,
        log_p: f64::NEG_INFINITY,
        stderr: 0.0,
        estimator: Estimator::Grid,
        died: true,
        low_ess: false,
    }
}
