//! Exponential tilting of step laws, the small-tilt mean bracket, an
//! importance-sampling estimator for moderate-deviation events of
//! inhomogeneous walks, and elementary Gaussian tail brackets.

use crate::env::EnvRealization;
use crate::error::{Error, Result};
use crate::law::StepLaw;
use crate::rng::RngStream;
use crate::stats::logsumexp;
use rand_chacha::ChaCha12Rng;

/// Below this effective sample size among the hits, an importance-sampling
/// estimate is flagged unreliable.
pub const ESS_FLOOR: f64 = 10.0;

/// A step law reweighted by `exp(theta * x) / psi(theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedLaw {
    pub base: StepLaw,
    pub theta: f64,
    /// `log psi(theta)`, the log moment generating function at the tilt.
    pub log_psi: f64,
    law: StepLaw,
}

/// Largest admissible tilt for a law: half the scale set by its
/// sub-Gaussian constant (`1/(2 sd)` for Gaussian, `1/(2 radius)` for
/// bounded support).
pub fn theta_cap(law: &StepLaw) -> f64 {
    law.theta_max() / 2.0
}

/// Tilt a law by `theta in [0, theta_cap]`.
pub fn tilt(base: &StepLaw, theta: f64) -> Result<TiltedLaw> {
    if !theta.is_finite() || theta < 0.0 {
        return Err(Error::InvalidTilt(format!("tilt {theta} must be finite and >= 0")));
    }
    let cap = theta_cap(base);
    if theta > cap {
        return Err(Error::InvalidTilt(format!(
            "tilt {theta} exceeds the admissible cap {cap}"
        )));
    }
    Ok(TiltedLaw {
        base: base.clone(),
        theta,
        log_psi: base.log_mgf(theta),
        law: base.tilted(theta),
    })
}

impl TiltedLaw {
    pub fn mean(&self) -> f64 {
        self.law.mean()
    }

    pub fn law(&self) -> &StepLaw {
        &self.law
    }

    pub fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        self.law.sample(rng)
    }
}

/// Rows of the small-tilt mean comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketRow {
    pub theta: f64,
    /// Mean of the tilted law.
    pub m: f64,
    /// `|m(theta) - theta * E X^2|`.
    pub deviation: f64,
    /// `K * theta^2`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketReport {
    /// Curvature constant: half the largest third central moment of any
    /// tilted version of the law along the checked range (plus margin).
    pub k: f64,
    pub rows: Vec<BracketRow>,
    /// Envelope of `m(theta) / (theta E X^2)` over the nonzero tilts.
    pub ratio_low: f64,
    pub ratio_high: f64,
    pub ok: bool,
}

/// Verify `|m(theta) - theta E X^2| <= K theta^2` on a grid of tilts.
/// Requires a centered law; the identity anchors `m` near `theta E X^2`
/// only when `m(0) = 0`.
pub fn tilted_mean_bracket_check(base: &StepLaw, thetas: &[f64]) -> Result<BracketReport> {
    if base.mean().abs() > 1e-12 {
        return Err(Error::InvalidModel(format!(
            "bracket check needs a centered law, mean = {}",
            base.mean()
        )));
    }
    if thetas.is_empty() {
        return Err(Error::InvalidInput("no tilts supplied".into()));
    }
    let cap = theta_cap(base);
    let max_theta = thetas.iter().cloned().fold(0.0f64, f64::max);
    if thetas.iter().any(|&t| !t.is_finite() || t < 0.0) || max_theta > cap {
        return Err(Error::InvalidTilt(format!(
            "tilts must lie in [0, {cap}]"
        )));
    }
    // Exact remainder: m(t) - t E X^2 = t^2/2 * m''(xi) for some xi in
    // (0, t), and m''(xi) is the third central moment of the xi-tilted law.
    let mut sup3 = 0.0f64;
    let grid = 200;
    for g in 0..=grid {
        let xi = max_theta * g as f64 / grid as f64;
        sup3 = sup3.max(base.tilted_third_central_moment(xi).abs());
    }
    let k = 0.5 * sup3 * 1.05 + 1e-12;
    let v = base.second_moment();
    let mut rows = Vec::with_capacity(thetas.len());
    let mut ratio_low = f64::INFINITY;
    let mut ratio_high = f64::NEG_INFINITY;
    let mut ok = true;
    for &t in thetas {
        let m = base.tilted_mean(t);
        let deviation = (m - t * v).abs();
        let bound = k * t * t;
        if deviation > bound {
            ok = false;
        }
        if t > 0.0 {
            let r = m / (t * v);
            ratio_low = ratio_low.min(r);
            ratio_high = ratio_high.max(r);
        }
        rows.push(BracketRow { theta: t, m, deviation, bound });
    }
    if !ratio_low.is_finite() {
        ratio_low = 1.0;
        ratio_high = 1.0;
    }
    Ok(BracketReport { k, rows, ratio_low, ratio_high, ok })
}

/// How the per-step tilt is scheduled in `fast_growth_estimate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiltMode {
    /// `theta_k = theta0 * k^{-1/2} * log log k`: strong near the start,
    /// decaying along the walk.
    Schedule,
    /// One constant tilt sized for the target.
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FastGrowthEstimate {
    /// The level `c * sqrt(n) * log log n` whose exceedance is estimated.
    pub target: f64,
    pub log_p: f64,
    pub p: f64,
    /// Effective sample size among the hitting paths.
    pub ess: f64,
    pub hits: usize,
    pub unreliable: bool,
    pub mode: TiltMode,
}

fn loglog(n: usize) -> f64 {
    (n.max(3) as f64).ln().ln().max(0.05)
}

/// Importance-sampling estimate of `P(sum of centered steps >= c sqrt(n)
/// log log n)` under a frozen environment, using exponentially tilted
/// proposal laws and exact likelihood-ratio weights.
pub fn fast_growth_estimate(
    env: &EnvRealization,
    n: usize,
    c: f64,
    samples: usize,
    mode: TiltMode,
    stream: RngStream,
) -> Result<FastGrowthEstimate> {
    if n == 0 || n > env.len() {
        return Err(Error::InvalidInput(format!(
            "walk length {n} outside the realized environment (len {})",
            env.len()
        )));
    }
    if samples < 100 {
        return Err(Error::InvalidInput(format!("need >= 100 samples, got {samples}")));
    }
    if !(c >= 0.0) {
        return Err(Error::InvalidInput(format!("growth constant {c} must be >= 0")));
    }
    let target = c * (n as f64).sqrt() * loglog(n);
    // per-step centered laws and their tilts
    let laws: Vec<StepLaw> = (1..=n).map(|k| env.centered_law(k)).collect();
    let thetas: Vec<f64> = match mode {
        TiltMode::Schedule => {
            // calibrate theta0 so the tilted drift reaches the target
            let denom: f64 = laws
                .iter()
                .enumerate()
                .map(|(i, l)| (i as f64 + 1.0).powf(-0.5) * loglog(i + 1) * l.second_moment())
                .sum();
            let theta0 = if c == 0.0 { 0.0 } else { 1.1 * target / denom };
            laws.iter()
                .enumerate()
                .map(|(i, l)| {
                    (theta0 * (i as f64 + 1.0).powf(-0.5) * loglog(i + 1)).min(theta_cap(l))
                })
                .collect()
        }
        TiltMode::Constant => {
            let vbar: f64 =
                laws.iter().map(|l| l.second_moment()).sum::<f64>() / n as f64;
            let t = if c == 0.0 { 0.0 } else { 1.1 * target / (n as f64 * vbar) };
            laws.iter().map(|l| t.min(theta_cap(l))).collect()
        }
    };
    let tilted: Vec<TiltedLaw> = laws
        .iter()
        .zip(&thetas)
        .map(|(l, &t)| tilt(l, t))
        .collect::<Result<_>>()?;
    let mut rng = stream.rng();
    let mut hit_logw: Vec<f64> = Vec::new();
    for _ in 0..samples {
        let mut s = 0.0;
        let mut logw = 0.0;
        for tl in &tilted {
            let x = tl.sample(&mut rng);
            s += x;
            logw += tl.log_psi - tl.theta * x;
        }
        if s >= target {
            hit_logw.push(logw);
        }
    }
    let hits = hit_logw.len();
    if hits == 0 {
        return Ok(FastGrowthEstimate {
            target,
            log_p: f64::NEG_INFINITY,
            p: 0.0,
            ess: 0.0,
            hits,
            unreliable: true,
            mode,
        });
    }
    let lse = logsumexp(&hit_logw);
    let log_p = lse - (samples as f64).ln();
    let lse2 = logsumexp(&hit_logw.iter().map(|w| 2.0 * w).collect::<Vec<_>>());
    let ess = (2.0 * lse - lse2).exp();
    Ok(FastGrowthEstimate {
        target,
        log_p,
        p: log_p.exp(),
        ess,
        hits,
        unreliable: ess < ESS_FLOOR,
        mode,
    })
}

/// The elementary standard normal tail bracket
/// `phi(x) x / (1 + x^2) <= P(Z > x) <= phi(x) / x` for `x > 0`.
pub fn gaussian_tail_bounds(x: f64) -> Result<(f64, f64)> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::InvalidInput(format!("tail point {x} must be finite and > 0")));
    }
    let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    Ok((phi * x / (1.0 + x * x), phi / x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvModel;
    use approx::assert_abs_diff_eq;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn normal_tail(x: f64) -> f64 {
        1.0 - Normal::new(0.0, 1.0).unwrap().cdf(x)
    }

    #[test]
    fn zero_tilt_is_the_identity() {
        let base = StepLaw::gaussian(0.0, 1.0).unwrap();
        let t = tilt(&base, 0.0).unwrap();
        assert_eq!(t.law(), &base);
        assert_abs_diff_eq!(t.log_psi, 0.0);
        assert_abs_diff_eq!(t.mean(), 0.0);
    }

    #[test]
    fn gaussian_tilt_shifts_the_mean() {
        let base = StepLaw::gaussian(0.0, 1.0).unwrap();
        let t = tilt(&base, 0.4).unwrap();
        assert_abs_diff_eq!(t.mean(), 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(t.log_psi, 0.08, epsilon = 1e-12); // theta^2/2
    }

    #[test]
    fn sign_step_tilt_matches_the_logistic_weight() {
        let base = StepLaw::rademacher();
        let t = tilt(&base, 0.5).unwrap();
        let atoms = t.law().atoms().unwrap();
        let p_up: f64 = atoms
            .iter()
            .find(|(x, _)| (*x - 1.0).abs() < 1e-12)
            .map(|(_, p)| *p)
            .unwrap();
        assert_abs_diff_eq!(p_up, 0.7310585786300049, epsilon = 1e-12);
        assert_abs_diff_eq!(t.mean(), 0.5f64.tanh(), epsilon = 1e-12);
    }

    #[test]
    fn out_of_range_tilts_are_refused() {
        let base = StepLaw::gaussian(0.0, 1.0).unwrap();
        assert!(matches!(tilt(&base, -0.1), Err(Error::InvalidTilt(_))));
        assert!(matches!(tilt(&base, 0.51), Err(Error::InvalidTilt(_))));
        assert!(matches!(tilt(&base, f64::NAN), Err(Error::InvalidTilt(_))));
        // cap scales inversely with the law's size
        let wide = StepLaw::gaussian(0.0, 4.0).unwrap();
        assert!(tilt(&wide, 0.13).is_err());
        assert!(tilt(&wide, 0.12).is_ok());
    }

    #[test]
    fn bracket_holds_for_three_centered_families() {
        let thetas: Vec<f64> = (0..=30).map(|k| 0.01 * k as f64).collect();
        // Gaussian: m(theta) = theta exactly, deviation 0
        let g = tilted_mean_bracket_check(&StepLaw::gaussian(0.0, 1.0).unwrap(), &thetas)
            .unwrap();
        assert!(g.ok);
        for r in &g.rows {
            assert!(r.deviation < 1e-12);
        }
        // symmetric signs: m(theta) = tanh(theta)
        let s = tilted_mean_bracket_check(&StepLaw::rademacher(), &thetas).unwrap();
        assert!(s.ok);
        for r in &s.rows {
            assert_abs_diff_eq!(r.m, r.theta.tanh(), epsilon = 1e-12);
            // the cubic bound |tanh t - t| <= t^3/3 is the sharp version
            assert!(r.deviation <= r.theta.powi(3) / 3.0 + 1e-15);
        }
        assert!(s.ratio_high <= 1.0 + 1e-12, "tanh never overshoots");
        // skewed two-point law, centered: 2 w.p. 0.2, -0.5 w.p. 0.8
        let tp = StepLaw::two_point(2.0, -0.5, 0.2).unwrap();
        assert!(tp.mean().abs() < 1e-12);
        let thetas_tp: Vec<f64> = (0..=25).map(|k| 0.01 * k as f64).collect();
        let a = tilted_mean_bracket_check(&tp, &thetas_tp).unwrap();
        assert!(a.ok, "skewed family violated the bracket: k = {}", a.k);
        // closed-form cross-check of one tilted mean
        let th: f64 = 0.2;
        let num = 2.0 * 0.2 * (2.0 * th).exp() - 0.5 * 0.8 * (-0.5 * th).exp();
        let den = 0.2 * (2.0 * th).exp() + 0.8 * (-0.5 * th).exp();
        let row = a.rows.iter().find(|r| (r.theta - th).abs() < 1e-12).unwrap();
        assert_abs_diff_eq!(row.m, num / den, epsilon = 1e-12);
    }

    #[test]
    fn uncentered_laws_are_refused() {
        let law = StepLaw::gaussian(0.3, 1.0).unwrap();
        assert!(matches!(
            tilted_mean_bracket_check(&law, &[0.1]),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn zero_growth_constant_reduces_to_the_median() {
        let env = EnvModel::GaussianRandomMean { mean_sd: 1.0, step_sd: 1.0 }
            .sample(400, RngStream::new(9, 0))
            .unwrap();
        let est =
            fast_growth_estimate(&env, 400, 0.0, 20_000, TiltMode::Schedule, RngStream::new(9, 1))
                .unwrap();
        assert!(!est.unreliable);
        assert_abs_diff_eq!(est.target, 0.0);
        assert!((est.p - 0.5).abs() < 0.02, "p = {}", est.p);
    }

    #[test]
    fn tilted_estimate_matches_plain_monte_carlo() {
        let env = EnvModel::GaussianRandomMean { mean_sd: 1.0, step_sd: 1.0 }
            .sample(100, RngStream::new(10, 0))
            .unwrap();
        let n = 100;
        let c = 0.8;
        let is = fast_growth_estimate(&env, n, c, 20_000, TiltMode::Schedule, RngStream::new(10, 1))
            .unwrap();
        assert!(!is.unreliable, "ess = {}", is.ess);
        // plain Monte Carlo on the same event
        let target = is.target;
        let mut rng = RngStream::new(10, 2).rng();
        let m = 60_000;
        let mut hits = 0u64;
        for _ in 0..m {
            let mut s = 0.0;
            for k in 1..=n {
                s += env.centered_law(k).sample(&mut rng);
            }
            if s >= target {
                hits += 1;
            }
        }
        let p_mc = hits as f64 / m as f64;
        let se_mc = (p_mc * (1.0 - p_mc) / m as f64).sqrt();
        // IS standard error from the hit weights is not tracked directly;
        // bound the comparison by 3 MC sigmas plus a 10% relative margin
        assert!(
            (is.p - p_mc).abs() < 3.0 * se_mc + 0.1 * p_mc,
            "is = {}, mc = {} +- {}",
            is.p,
            p_mc,
            se_mc
        );
    }

    #[test]
    fn both_tilt_modes_are_mean_consistent_over_replicates() {
        let env = EnvModel::GaussianRandomMean { mean_sd: 1.0, step_sd: 1.0 }
            .sample(50, RngStream::new(11, 0))
            .unwrap();
        let n = 50;
        let c = 1.0;
        // reference by heavy plain MC
        let est0 =
            fast_growth_estimate(&env, n, c, 1000, TiltMode::Schedule, RngStream::new(11, 1))
                .unwrap();
        let target = est0.target;
        let mut rng = RngStream::new(11, 2).rng();
        let m = 200_000;
        let mut hits = 0u64;
        for _ in 0..m {
            let mut s = 0.0;
            for k in 1..=n {
                s += env.centered_law(k).sample(&mut rng);
            }
            if s >= target {
                hits += 1;
            }
        }
        let p_ref = hits as f64 / m as f64;
        for (mode, tag) in [(TiltMode::Schedule, 10u64), (TiltMode::Constant, 20u64)] {
            let reps = 50;
            let mut ps = Vec::with_capacity(reps);
            for r in 0..reps {
                let e = fast_growth_estimate(
                    &env,
                    n,
                    c,
                    2000,
                    mode,
                    RngStream::new(11, 100 + tag + r as u64),
                )
                .unwrap();
                ps.push(e.p);
            }
            let mean = crate::stats::mean(&ps);
            let se = (crate::stats::sample_var(&ps) / reps as f64).sqrt();
            assert!(
                (mean - p_ref).abs() < 3.0 * se + 3.0 * (p_ref / m as f64).sqrt(),
                "{mode:?}: mean {mean} vs ref {p_ref} (se {se})"
            );
        }
    }

    #[test]
    fn impossible_targets_come_back_unreliable() {
        // bounded steps cannot reach far beyond n * radius
        let env = EnvModel::TwoPointRandomBias { p_low: 0.5 }
            .sample(20, RngStream::new(12, 0))
            .unwrap();
        let est =
            fast_growth_estimate(&env, 20, 50.0, 500, TiltMode::Schedule, RngStream::new(12, 1))
                .unwrap();
        assert!(est.unreliable);
        assert_eq!(est.hits, 0);
        assert_eq!(est.log_p, f64::NEG_INFINITY);
    }

    #[test]
    fn tail_bracket_frozen_values() {
        let (lo, hi) = gaussian_tail_bounds(1.0).unwrap();
        assert_abs_diff_eq!(lo, 0.12098536225957168, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.24197072451914337, epsilon = 1e-15);
        let truth = normal_tail(1.0);
        assert_abs_diff_eq!(truth, 0.15865525393145705, epsilon = 1e-9);
        assert!(lo < truth && truth < hi);
        let (lo3, hi3) = gaussian_tail_bounds(3.0).unwrap();
        assert!(lo3 < 0.0013499 && 0.0013499 < hi3);
    }

    #[test]
    fn tail_bracket_tightens_far_out() {
        let (lo, hi) = gaussian_tail_bounds(10.0).unwrap();
        assert!(hi / lo <= 1.01 + 1e-12, "ratio {}", hi / lo);
    }

    #[test]
    fn tail_bracket_contains_the_true_tail_everywhere() {
        for k in 1..=100 {
            let x = k as f64 * 0.1;
            let (lo, hi) = gaussian_tail_bounds(x).unwrap();
            let t = normal_tail(x);
            assert!(lo <= t + 1e-12 && t <= hi + 1e-12, "x = {x}: {lo} {t} {hi}");
        }
    }

    #[test]
    fn nonpositive_tail_points_are_refused() {
        assert!(gaussian_tail_bounds(0.0).is_err());
        assert!(gaussian_tail_bounds(-1.0).is_err());
        assert!(gaussian_tail_bounds(f64::NAN).is_err());
    }
}
