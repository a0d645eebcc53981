//! Exponent extraction from survival curves and the cross-run comparisons
//! built on the fitted exponents: replica aggregation with bootstrap
//! intervals, symmetry/convexity/monotonicity verdicts, and the
//! quenched-versus-averaged relevance report.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::{bootstrap_mean_ci, logsumexp, mean, sample_var, weighted_line_fit};
use crate::survival::SurvivalCurve;
use serde::{Deserialize, Serialize};

/// Abscissa for the decay fit: `-log p` against `log t` measures a
/// power-law exponent, against `t` an exponential rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitScale {
    LogTime,
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    /// Fitted decay exponent (slope of `-log p`); `+inf` for a curve the
    /// walker cannot survive.
    #[serde(with = "crate::stats::extended_float")]
    pub gamma_hat: f64,
    pub stderr: f64,
    pub scale: FitScale,
    /// Horizon window `[lo, hi]` the fit used.
    pub window: (f64, f64),
    pub r2: f64,
    /// Set when the window contained killed entries (probability zero):
    /// the exponent degenerates to the `+inf` branch.
    pub infeasible: bool,
    pub n_points: usize,
}

/// Weighted power-law (or exponential-rate) fit over a horizon window.
///
/// At least 4 in-window points are required. Entries with zero estimated
/// probability inside the window short-circuit to the infeasible branch.
pub fn fit_exponent(
    curve: &SurvivalCurve,
    scale: FitScale,
    window: (f64, f64),
) -> Result<ExponentFit> {
    let (lo, hi) = window;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInput(format!("bad fit window [{lo}, {hi}]")));
    }
    let sel: Vec<_> = curve
        .entries
        .iter()
        .filter(|e| e.horizon >= lo && e.horizon <= hi)
        .collect();
    if sel.iter().any(|e| e.died || e.log_p == f64::NEG_INFINITY) {
        return Ok(ExponentFit {
            gamma_hat: f64::INFINITY,
            stderr: 0.0,
            scale,
            window,
            r2: 0.0,
            infeasible: true,
            n_points: sel.len(),
        });
    }
    if sel.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "only {} curve points inside [{lo}, {hi}]; need 4",
            sel.len()
        )));
    }
    if sel.iter().any(|e| !e.log_p.is_finite()) {
        return Err(Error::InvalidInput("non-finite curve values in window".into()));
    }
    let x: Vec<f64> = sel
        .iter()
        .map(|e| match scale {
            FitScale::LogTime => e.horizon.ln(),
            FitScale::Time => e.horizon,
        })
        .collect();
    let y: Vec<f64> = sel.iter().map(|e| -e.log_p).collect();
    // deterministic curves carry zero stderr: fall back to uniform weights
    let deterministic = sel.iter().any(|e| e.stderr == 0.0);
    let w: Vec<f64> = if deterministic {
        vec![1.0; sel.len()]
    } else {
        sel.iter().map(|e| 1.0 / (e.stderr * e.stderr)).collect()
    };
    let (slope, _intercept, se, r2) = weighted_line_fit(&x, &y, &w)?;
    Ok(ExponentFit {
        gamma_hat: slope,
        stderr: se,
        scale,
        window,
        r2,
        infeasible: false,
        n_points: sel.len(),
    })
}

/// Replica-averaged exponent with a percentile-bootstrap interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchedAggregate {
    pub fits: Vec<ExponentFit>,
    pub mean: f64,
    pub ci95: (f64, f64),
    pub n_walls: usize,
    /// Walls whose fit degenerated to the `+inf` branch (excluded above).
    pub n_infeasible: usize,
    /// Across-wall standard deviation of the finite exponents.
    pub dispersion: f64,
}

impl QuenchedAggregate {
    pub fn half_width(&self) -> f64 {
        (self.ci95.1 - self.ci95.0) / 2.0
    }

    /// Degenerate aggregate for a deterministic (single-realization) run.
    pub fn degenerate(fit: ExponentFit) -> QuenchedAggregate {
        let g = fit.gamma_hat;
        QuenchedAggregate {
            fits: vec![fit],
            mean: g,
            ci95: (g, g),
            n_walls: 1,
            n_infeasible: 0,
            dispersion: 0.0,
        }
    }
}

const BOOTSTRAP_RESAMPLES: usize = 1000;

pub fn aggregate_quenched(fits: &[ExponentFit], stream: RngStream) -> Result<QuenchedAggregate> {
    let finite: Vec<&ExponentFit> = fits.iter().filter(|f| !f.infeasible).collect();
    let n_infeasible = fits.len() - finite.len();
    if finite.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "replica aggregation needs >= 2 finite fits, have {} ({} infeasible)",
            finite.len(),
            n_infeasible
        )));
    }
    let gs: Vec<f64> = finite.iter().map(|f| f.gamma_hat).collect();
    let m = mean(&gs);
    let ci95 = bootstrap_mean_ci(&gs, BOOTSTRAP_RESAMPLES, 0.95, stream)?;
    Ok(QuenchedAggregate {
        fits: fits.to_vec(),
        mean: m,
        ci95,
        n_walls: finite.len(),
        n_infeasible,
        dispersion: sample_var(&gs).sqrt(),
    })
}

/// Two-interval comparison: pass when the 95% intervals intersect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapVerdict {
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub overlap: bool,
}

pub fn ci_overlap(a: &QuenchedAggregate, b: &QuenchedAggregate) -> OverlapVerdict {
    let overlap = a.ci95.0 <= b.ci95.1 && b.ci95.0 <= a.ci95.1;
    OverlapVerdict { a: a.ci95, b: b.ci95, overlap }
}

/// Same-exponent check for a walk-above-walk run against its rescaled
/// continuum counterpart: the decay exponents should agree whenever the
/// dispersion ratios match.
pub fn ratio_invariance_check(
    walk_run: &QuenchedAggregate,
    continuum_run: &QuenchedAggregate,
) -> OverlapVerdict {
    ci_overlap(walk_run, continuum_run)
}

/// Midpoint convexity: `gamma(mid) <= (gamma(lo) + gamma(hi)) / 2`, with
/// slack pooled from the three intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityVerdict {
    pub mid: f64,
    pub endpoint_avg: f64,
    pub slack: f64,
    pub ok: bool,
}

pub fn convexity_midpoint(
    lo: &QuenchedAggregate,
    mid: &QuenchedAggregate,
    hi: &QuenchedAggregate,
) -> ConvexityVerdict {
    let avg = 0.5 * (lo.mean + hi.mean);
    let slack = mid.half_width() + 0.5 * (lo.half_width() + hi.half_width());
    ConvexityVerdict {
        mid: mid.mean,
        endpoint_avg: avg,
        slack,
        ok: mid.mean <= avg + slack,
    }
}

/// Nondecreasing means along increasing slope magnitudes.
pub fn monotone_means(aggregates: &[(f64, &QuenchedAggregate)]) -> bool {
    let mut rows: Vec<_> = aggregates.to_vec();
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));
    rows.windows(2).all(|w| w[0].1.mean <= w[1].1.mean + 1e-12)
}

/// Identifies which model a number belongs to, so cross-run comparisons
/// cannot silently mix parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelTag {
    pub mu1: f64,
    pub mu2: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    pub quenched_mean: f64,
    pub quenched_ci: (f64, f64),
    pub averaged_rate: f64,
    /// True when the whole quenched interval sits above the averaged rate.
    pub strictly_above: bool,
}

/// Compare a replica-averaged quenched rate against the rate of the
/// averaged problem. Refuses mismatched model parameters.
pub fn disorder_relevance_report(
    quenched: &QuenchedAggregate,
    quenched_tag: ModelTag,
    averaged_rate: f64,
    averaged_tag: ModelTag,
) -> Result<RelevanceReport> {
    if quenched_tag != averaged_tag {
        return Err(Error::MismatchedParameters(format!(
            "quenched {quenched_tag:?} vs averaged {averaged_tag:?}"
        )));
    }
    if !averaged_rate.is_finite() || averaged_rate <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "averaged rate {averaged_rate} must be positive"
        )));
    }
    Ok(RelevanceReport {
        quenched_mean: quenched.mean,
        quenched_ci: quenched.ci95,
        averaged_rate,
        strictly_above: quenched.ci95.0 > averaged_rate,
    })
}

/// Sample-level convexity gap: the average of `-log p` over replicas minus
/// `-log` of the average probability. Always `>= 0`; a strictly positive
/// gap is the replica-dispersion signal.
pub fn jensen_gap(log_ps: &[f64]) -> Result<f64> {
    if log_ps.is_empty() {
        return Err(Error::InvalidInput("no replica probabilities".into()));
    }
    if log_ps.iter().any(|l| *l > 0.0 || l.is_nan()) {
        return Err(Error::InvalidInput("log-probabilities must be <= 0".into()));
    }
    let mean_neg_log = -mean(log_ps);
    let log_mean_p = logsumexp(log_ps) - (log_ps.len() as f64).ln();
    Ok(mean_neg_log + log_mean_p)
}

/// Re-fit with the lower window edge doubled; flag the window as
/// pre-asymptotic when the exponent moves by more than its standard error.
pub fn window_robustness(
    curve: &SurvivalCurve,
    scale: FitScale,
    window: (f64, f64),
) -> Result<(ExponentFit, ExponentFit, bool)> {
    let base = fit_exponent(curve, scale, window)?;
    let shifted = fit_exponent(curve, scale, (window.0 * 2.0, window.1))?;
    let tol = base.stderr.max(shifted.stderr).max(1e-12);
    let stable = (base.gamma_hat - shifted.gamma_hat).abs() <= tol;
    Ok((base, shifted, !stable))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{Estimator, SurvivalEntry};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn entry(horizon: f64, log_p: f64, stderr: f64) -> SurvivalEntry {
        SurvivalEntry {
            horizon,
            log_p,
            stderr,
            estimator: Estimator::Grid,
            died: false,
            low_ess: false,
        }
    }

    fn power_curve(gamma: f64, c: f64, horizons: &[f64]) -> SurvivalCurve {
        SurvivalCurve {
            entries: horizons
                .iter()
                .map(|&t| entry(t, c - gamma * t.ln(), 0.0))
                .collect(),
        }
    }

    #[test]
    fn exact_power_law_is_recovered_to_machine_precision() {
        let hs: Vec<f64> = (4..=10).map(|k| (1u64 << k) as f64).collect();
        let curve = power_curve(0.73, -0.2, &hs);
        let fit = fit_exponent(&curve, FitScale::LogTime, (16.0, 1024.0)).unwrap();
        assert_abs_diff_eq!(fit.gamma_hat, 0.73, epsilon = 1e-12);
        assert!(fit.r2 > 1.0 - 1e-12);
        assert!(!fit.infeasible);
        assert_eq!(fit.n_points, 7);
    }

    #[test]
    fn exact_exponential_rate_on_the_time_scale() {
        let hs: Vec<f64> = (1..=8).map(|k| k as f64).collect();
        let entries = hs.iter().map(|&t| entry(t, 0.3 - 1.7 * t, 0.0)).collect();
        let curve = SurvivalCurve { entries };
        let fit = fit_exponent(&curve, FitScale::Time, (1.0, 8.0)).unwrap();
        assert_abs_diff_eq!(fit.gamma_hat, 1.7, epsilon = 1e-12);
    }

    #[test]
    fn killed_entries_short_circuit_to_the_infinite_branch() {
        let mut curve = power_curve(0.5, 0.0, &[4.0, 8.0, 16.0, 32.0]);
        curve.entries[2].log_p = f64::NEG_INFINITY;
        curve.entries[2].died = true;
        let fit = fit_exponent(&curve, FitScale::LogTime, (4.0, 32.0)).unwrap();
        assert!(fit.infeasible);
        assert_eq!(fit.gamma_hat, f64::INFINITY);
    }

    #[test]
    fn sparse_windows_are_refused() {
        let curve = power_curve(0.5, 0.0, &[4.0, 8.0, 16.0, 32.0]);
        assert!(fit_exponent(&curve, FitScale::LogTime, (10.0, 40.0)).is_err());
        assert!(fit_exponent(&curve, FitScale::LogTime, (40.0, 10.0)).is_err());
    }

    #[test]
    fn noisy_points_are_downweighted() {
        // one wild point with huge stderr should barely move the slope
        let hs: Vec<f64> = (2..=9).map(|k| (1u64 << k) as f64).collect();
        let mut entries: Vec<SurvivalEntry> =
            hs.iter().map(|&t| entry(t, -0.5 * t.ln(), 0.01)).collect();
        entries[3].log_p += 2.0;
        entries[3].stderr = 10.0;
        let curve = SurvivalCurve { entries };
        let fit = fit_exponent(&curve, FitScale::LogTime, (4.0, 512.0)).unwrap();
        assert!((fit.gamma_hat - 0.5).abs() < 1e-3, "{}", fit.gamma_hat);
    }

    #[test]
    fn aggregation_reports_spread_and_excludes_infinite_fits() {
        let mk = |g: f64, inf: bool| ExponentFit {
            gamma_hat: if inf { f64::INFINITY } else { g },
            stderr: 0.01,
            scale: FitScale::LogTime,
            window: (16.0, 1024.0),
            r2: 0.99,
            infeasible: inf,
            n_points: 7,
        };
        let fits: Vec<ExponentFit> = vec![
            mk(0.52, false),
            mk(0.48, false),
            mk(0.55, false),
            mk(0.45, false),
            mk(0.0, true),
        ];
        let agg = aggregate_quenched(&fits, RngStream::new(3, 0)).unwrap();
        assert_eq!(agg.n_walls, 4);
        assert_eq!(agg.n_infeasible, 1);
        assert_abs_diff_eq!(agg.mean, 0.5, epsilon = 1e-12);
        assert!(agg.ci95.0 <= 0.5 && 0.5 <= agg.ci95.1);
        assert!(agg.dispersion > 0.03 && agg.dispersion < 0.06);
        // reproducible
        let again = aggregate_quenched(&fits, RngStream::new(3, 0)).unwrap();
        assert_eq!(agg, again);
    }

    #[test]
    fn aggregation_needs_two_finite_fits() {
        let f = ExponentFit {
            gamma_hat: 0.5,
            stderr: 0.0,
            scale: FitScale::LogTime,
            window: (1.0, 2.0),
            r2: 1.0,
            infeasible: false,
            n_points: 4,
        };
        assert!(aggregate_quenched(&[f], RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn interval_logic_for_the_verdicts() {
        let mk = |lo: f64, hi: f64| QuenchedAggregate {
            fits: Vec::new(),
            mean: (lo + hi) / 2.0,
            ci95: (lo, hi),
            n_walls: 10,
            n_infeasible: 0,
            dispersion: 0.0,
        };
        assert!(ci_overlap(&mk(0.4, 0.6), &mk(0.55, 0.7)).overlap);
        assert!(!ci_overlap(&mk(0.4, 0.5), &mk(0.55, 0.7)).overlap);
        let v = convexity_midpoint(&mk(0.49, 0.51), &mk(0.64, 0.66), &mk(0.89, 0.91));
        assert!(v.ok, "0.65 <= (0.5 + 0.9)/2 + slack");
        let bad = convexity_midpoint(&mk(0.49, 0.51), &mk(0.84, 0.86), &mk(0.89, 0.91));
        assert!(!bad.ok);
        let a = mk(0.4, 0.6);
        let b = mk(0.6, 0.8);
        let c = mk(0.8, 1.0);
        assert!(monotone_means(&[(0.0, &a), (1.0, &b), (2.0, &c)]));
        assert!(!monotone_means(&[(0.0, &b), (1.0, &a), (2.0, &c)]));
    }

    #[test]
    fn relevance_report_refuses_mismatched_models() {
        let q = QuenchedAggregate {
            fits: Vec::new(),
            mean: 1.3,
            ci95: (1.15, 1.45),
            n_walls: 40,
            n_infeasible: 0,
            dispersion: 0.1,
        };
        let tag = ModelTag { mu1: 1.0, mu2: 1.0, beta: 1.0 };
        let other = ModelTag { mu1: 2.0, mu2: 1.0, beta: 1.0 };
        assert!(matches!(
            disorder_relevance_report(&q, tag, 1.0, other),
            Err(Error::MismatchedParameters(_))
        ));
        let rep = disorder_relevance_report(&q, tag, 1.0, tag).unwrap();
        assert!(rep.strictly_above);
        let rep2 = disorder_relevance_report(&q, tag, 1.2, tag).unwrap();
        assert!(!rep2.strictly_above);
    }

    #[test]
    fn replica_dispersion_gap_is_nonnegative_and_exact() {
        // hand-computed two-replica case
        let gap = jensen_gap(&[-1.0, -3.0]).unwrap();
        let expect = 2.0 + ((0.5 * ((-1.0f64).exp() + (-3.0f64).exp())).ln());
        assert_abs_diff_eq!(gap, expect, epsilon = 1e-12);
        assert!(gap > 0.0);
        // equal replicas: no gap
        assert_abs_diff_eq!(jensen_gap(&[-2.0, -2.0]).unwrap(), 0.0, epsilon = 1e-12);
        // random samples: never negative
        let mut rng = RngStream::new(8, 0).rng();
        for _ in 0..50 {
            let xs: Vec<f64> = (0..12).map(|_| -5.0 * rng.random::<f64>()).collect();
            assert!(jensen_gap(&xs).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn pre_asymptotic_windows_are_flagged() {
        // pure power law: stable under window doubling
        let hs: Vec<f64> = (3..=12).map(|k| (1u64 << k) as f64).collect();
        let clean = power_curve(0.5, 0.0, &hs);
        let (_, _, flagged) = window_robustness(&clean, FitScale::LogTime, (8.0, 4096.0)).unwrap();
        assert!(!flagged);
        // strong transient: slope moves when the lower edge doubles
        let entries = hs
            .iter()
            .map(|&t| entry(t, -0.5 * t.ln() - 8.0 / t.sqrt(), 0.0))
            .collect();
        let bent = SurvivalCurve { entries };
        let (_, _, flagged) = window_robustness(&bent, FitScale::LogTime, (8.0, 4096.0)).unwrap();
        assert!(flagged);
    }
}
