//! The self-validation suite: every headline claim the library makes,
//! restated as an executable criterion with explicit tolerances and
//! runtime budgets.
//!
//! Each criterion reports one pass/fail line. Failures carry the measured
//! numbers, never just a boolean, so a red line is directly actionable.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    aggregate_quenched, ci_overlap, convexity_midpoint, disorder_relevance_report, fit_exponent,
    ratio_invariance_check, ExponentFit, FitScale, ModelTag, QuenchedAggregate,
};
use crate::error::{Error, Result};
use crate::excursions::{decompose, kingman_trend, subadditivity_check};
use crate::harness::config::{EstimatorChoice, ExperimentConfig, FitCfg, ProcessKind, CONFIG_SCHEMA};
use crate::harness::run::run_experiment;
use crate::law::StepLaw;
use crate::paths::OuParams;
use crate::rng::RngStream;
use crate::spectral::{principal_eigenvalue, SpectralProblem};
use crate::survival::{
    brute_force_survival, fkg_brute_check, grid_survival, smc_survival, EndWindow, GridOpts,
    IncreasingEvent, Schedule, Walker, WindowScale,
};
use crate::tilt::{gaussian_tail_bounds, theta_cap, tilted_mean_bracket_check};
use crate::walls::{check_feasibility, realize_wall, FeasibilityStatus, WallKind, WallSpec};

/// Master seed for the whole suite; every criterion derives its streams
/// from this, so the suite is one deterministic computation.
const SEED: u64 = 271_828;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValidationLevel {
    /// Exact oracles, inequalities and small deterministic checks.
    Quick,
    /// Everything: the full estimation campaign.
    Full,
}

/// One line of the validation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} {} ({:.1}s): {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub level: ValidationLevel,
    pub outcomes: Vec<CriterionOutcome>,
    pub elapsed_seconds: f64,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }

    pub fn lines(&self) -> Vec<String> {
        self.outcomes.iter().map(|o| o.line()).collect()
    }
}

fn finish(
    id: &str,
    budget: Option<f64>,
    started: Instant,
    result: Result<(bool, String)>,
) -> CriterionOutcome {
    let seconds = started.elapsed().as_secs_f64();
    let (mut pass, mut detail) = match result {
        Ok(x) => x,
        Err(e) => (false, format!("errored: {e}")),
    };
    if let Some(b) = budget {
        if seconds > b {
            pass = false;
            detail.push_str(&format!(" [EXCEEDED budget {b:.0}s]"));
        }
    }
    CriterionOutcome { id: id.to_string(), pass, detail, seconds }
}

fn pow2(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|k| (1u64 << k) as f64).collect()
}

fn interval_str(ci: (f64, f64)) -> String {
    format!("[{:.4}, {:.4}]", ci.0, ci.1)
}

// ---------------------------------------------------------------------------
// Full-level criteria
// ---------------------------------------------------------------------------

/// Zero wall: the diffusive walker loses mass like `t^{-1/2}`.
fn c01_ballot(out: &mut Option<QuenchedAggregate>) -> Result<(bool, String)> {
    let cfg = ExperimentConfig {
        schema: CONFIG_SCHEMA.to_string(),
        name: "ballot-baseline".into(),
        process: ProcessKind::Bm { var_rate: 1.0 },
        wall: WallSpec::new(WallKind::Zero),
        x0: 1.0,
        schedule: Schedule::OctaveDoubling { first_horizon: 1.0, steps_per_octave: 64 },
        horizons: pow2(6, 12),
        estimator: EstimatorChoice::Grid { points_per_sd: 6.0, span_sds: 10.0, bridge: true },
        window: None,
        fit: FitCfg { scale: FitScale::LogTime, window_lo: 64.0, window_hi: 4096.0 },
        n_walls: 1,
        seed: SEED,
    };
    let record = run_experiment(&cfg)?;
    let fit = &record.walls[0].fit;
    let agg = record
        .aggregate
        .clone()
        .ok_or_else(|| Error::NonConvergence("ballot run produced no aggregate".into()))?;
    let pass = (fit.gamma_hat - 0.5).abs() <= 0.02;
    let detail = format!(
        "flat barrier, horizons 2^6..2^12: gamma_hat = {:.4} +/- {:.4} (target 0.50 +/- 0.02), r2 = {:.6}",
        fit.gamma_hat, fit.stderr, fit.r2
    );
    *out = Some(agg);
    Ok((pass, detail))
}

/// Independent-draw wall: the exponent stays at the free value 1/2.
fn c02_iid_irrelevance() -> Result<(bool, String)> {
    let cfg = ExperimentConfig {
        schema: CONFIG_SCHEMA.to_string(),
        name: "iid-wall".into(),
        process: ProcessKind::Bm { var_rate: 1.0 },
        wall: WallSpec::new(WallKind::Iid { law: StepLaw::gaussian(0.0, 1.0)? }),
        x0: 1.0,
        schedule: Schedule::UniformInteger,
        horizons: pow2(5, 11),
        estimator: EstimatorChoice::Grid { points_per_sd: 6.0, span_sds: 10.0, bridge: false },
        window: None,
        // The first octaves carry an upward transient while the walker clears
        // the wall's running spike maximum (~sqrt(2 ln t)), so the fit starts
        // at 256; later windows on longer runs reproduce the same mean.
        fit: FitCfg { scale: FitScale::LogTime, window_lo: 256.0, window_hi: 2048.0 },
        n_walls: 40,
        seed: SEED,
    };
    let record = run_experiment(&cfg)?;
    let agg = record
        .aggregate
        .ok_or_else(|| Error::NonConvergence("iid-wall run produced no aggregate".into()))?;
    let pass = agg.ci95.0 <= 0.5 && 0.5 <= agg.ci95.1;
    let detail = format!(
        "40 independent-draw walls, fit over [256, 2048]: mean gamma_hat = {:.4}, 95% CI {} (must contain 0.50), dispersion {:.4}",
        agg.mean,
        interval_str(agg.ci95),
        agg.dispersion
    );
    Ok((pass, detail))
}

fn beta_scan_cfg(beta: f64) -> ExperimentConfig {
    ExperimentConfig {
        schema: CONFIG_SCHEMA.to_string(),
        name: format!("bm-wall-beta-{beta}"),
        process: ProcessKind::Bm { var_rate: 1.0 },
        wall: WallSpec::new(WallKind::ScaledBrownian { beta }),
        x0: 1.0,
        schedule: Schedule::OctaveDoubling { first_horizon: 1.0, steps_per_octave: 64 },
        horizons: pow2(6, 12),
        estimator: EstimatorChoice::Grid { points_per_sd: 6.0, span_sds: 10.0, bridge: true },
        window: None,
        fit: FitCfg { scale: FitScale::LogTime, window_lo: 256.0, window_hi: 4096.0 },
        n_walls: 40,
        seed: SEED,
    }
}

/// Diffusive wall at unit coupling: the exponent detectably exceeds 1/2.
fn c03_relevance(scan: &mut Vec<(f64, QuenchedAggregate)>) -> Result<(bool, String)> {
    for beta in [1.0, -1.0, 2.0] {
        let record = run_experiment(&beta_scan_cfg(beta))?;
        let agg = record.aggregate.ok_or_else(|| {
            Error::NonConvergence(format!("beta={beta} run produced no aggregate"))
        })?;
        scan.push((beta, agg));
    }
    let agg = &scan[0].1;
    let pass = agg.ci95.0 > 0.5;
    let detail = format!(
        "40 diffusive walls at beta=1: mean gamma_hat = {:.4}, 95% CI {} (lower bound must exceed 0.50)",
        agg.mean,
        interval_str(agg.ci95)
    );
    Ok((pass, detail))
}

/// The exponent only sees |beta|.
fn c04_symmetry(scan: &[(f64, QuenchedAggregate)]) -> Result<(bool, String)> {
    let plus = &scan.iter().find(|(b, _)| *b == 1.0).unwrap().1;
    let minus = &scan.iter().find(|(b, _)| *b == -1.0).unwrap().1;
    let verdict = ci_overlap(plus, minus);
    let detail = format!(
        "beta=+1 CI {} vs beta=-1 CI {}: intervals {}",
        interval_str(verdict.a),
        interval_str(verdict.b),
        if verdict.overlap { "overlap" } else { "are disjoint" }
    );
    Ok((verdict.overlap, detail))
}

/// Midpoint convexity of the exponent in the coupling.
fn c05_convexity(
    ballot: &QuenchedAggregate,
    scan: &[(f64, QuenchedAggregate)],
) -> Result<(bool, String)> {
    let mid = &scan.iter().find(|(b, _)| *b == 1.0).unwrap().1;
    let hi = &scan.iter().find(|(b, _)| *b == 2.0).unwrap().1;
    let verdict = convexity_midpoint(ballot, mid, hi);
    let detail = format!(
        "gamma(1) = {:.4} vs (gamma(0) + gamma(2))/2 = {:.4}, slack {:.4}: midpoint convexity {}",
        verdict.mid,
        verdict.endpoint_avg,
        verdict.slack,
        if verdict.ok { "holds" } else { "violated" }
    );
    Ok((verdict.ok, detail))
}

/// Averaged problem, equal restoring rates: the principal Dirichlet
/// eigenvalue equals the rate.
fn c06_spectral(lambda_out: &mut Option<f64>) -> Result<(bool, String)> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (mu, beta) in [(1.0, 1.0), (2.0, 0.5), (0.5, 1.0)] {
        let t = Instant::now();
        let problem = SpectralProblem::with_defaults(mu, mu, beta)?;
        let eig = principal_eigenvalue(&problem)?;
        let secs = t.elapsed().as_secs_f64();
        let rel = (eig.lambda1 - mu).abs() / mu;
        let ok = rel <= 0.02 && secs < 120.0;
        pass &= ok;
        if (mu, beta) == (1.0, 1.0) {
            *lambda_out = Some(eig.lambda1);
        }
        parts.push(format!(
            "(mu={mu}, beta={beta}): lambda1 = {:.5} (rel err {:.3}%, residual {:.1e}, {:.1}s)",
            eig.lambda1,
            100.0 * rel,
            eig.residual,
            secs
        ));
    }
    Ok((pass, format!("target lambda1 = mu within 2%: {}", parts.join("; "))))
}

/// Per-wall decay rates from worst-start block chains; their replica
/// average sits strictly above the averaged-problem rate.
fn c07_quenched_above_averaged(
    lambda11: f64,
    out: &mut Option<QuenchedAggregate>,
) -> Result<(bool, String)> {
    let spec = WallSpec::new(WallKind::ScaledOu { mu: 1.0, sigma: 1.0, beta: 1.0 });
    let walker = Walker::Ou { params: OuParams::new(1.0, 1.0)? };
    let opts = GridOpts::default();
    let interval = (0.5, f64::INFINITY);
    let n_walls = 40u64;

    let fits: Vec<ExponentFit> = (0..n_walls)
        .into_par_iter()
        .map(|w| -> Result<ExponentFit> {
            let stream = RngStream::new(SEED, 2_000 + w);
            let wall = realize_wall(&spec, 200.0, stream.substream(0))?;
            let dec = decompose(&wall.path, 0.5)?;
            let blocks = dec.n_blocks();
            let candidates = [1usize, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48];
            let n_list: Vec<usize> =
                candidates.iter().copied().filter(|&n| n <= blocks).collect();
            if n_list.last().copied().unwrap_or(0) < 16 {
                return Err(Error::NonConvergence(format!(
                    "wall {w}: only {blocks} excursion blocks in horizon 200"
                )));
            }
            let trend = kingman_trend(&wall, &dec, &walker, interval, &n_list, &opts)?;
            if !trend.complete || !trend.gamma_rate.is_finite() {
                return Err(Error::NonConvergence(format!(
                    "wall {w}: incomplete block-cost trend"
                )));
            }
            let n_max = *n_list.last().unwrap();
            Ok(ExponentFit {
                gamma_hat: trend.gamma_rate,
                stderr: 0.0,
                scale: FitScale::Time,
                window: (dec.rho[0], dec.rho[n_max]),
                r2: 1.0,
                infeasible: false,
                n_points: n_max,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let agg = aggregate_quenched(&fits, RngStream::new(SEED, 2_999))?;
    let tag = ModelTag { mu1: 1.0, mu2: 1.0, beta: 1.0 };
    let report = disorder_relevance_report(&agg, tag, lambda11, tag)?;
    let detail = format!(
        "40 mean-reverting walls, worst-start block chains: mean rate = {:.4}, 95% CI {} vs averaged rate {:.4}: {}",
        report.quenched_mean,
        interval_str(report.quenched_ci),
        report.averaged_rate,
        if report.strictly_above { "strictly above" } else { "NOT separated" }
    );
    *out = Some(agg);
    Ok((report.strictly_above, detail))
}

/// Time-changing the mean-reverting pair onto the diffusive pair divides
/// the rate by twice the restoring rate.
fn c08_bridge(
    ou_block: &QuenchedAggregate,
    scan: &[(f64, QuenchedAggregate)],
) -> Result<(bool, String)> {
    let bm = &scan.iter().find(|(b, _)| *b == 1.0).unwrap().1;
    let scaled = (ou_block.ci95.0 / 2.0, ou_block.ci95.1 / 2.0);
    let overlap = scaled.0 <= bm.ci95.1 && bm.ci95.0 <= scaled.1;
    let detail = format!(
        "block-chain rate / 2 = {:.4}, CI {} vs diffusive-pair gamma CI {}: intervals {}",
        ou_block.mean / 2.0,
        interval_str(scaled),
        interval_str(bm.ci95),
        if overlap { "overlap" } else { "are disjoint" }
    );
    Ok((overlap, detail))
}

/// A walk in its own random environment with matched dispersion ratio
/// reproduces the continuum exponent.
fn c09_ratio_invariance(scan: &[(f64, QuenchedAggregate)]) -> Result<(bool, String)> {
    let cfg = ExperimentConfig {
        schema: CONFIG_SCHEMA.to_string(),
        name: "walk-in-environment".into(),
        process: ProcessKind::RwEnv,
        wall: WallSpec::new(WallKind::Environment {
            model: crate::env::EnvModel::GaussianRandomMean { mean_sd: 1.0, step_sd: 1.0 },
        }),
        x0: 1.0,
        schedule: Schedule::UniformInteger,
        horizons: pow2(5, 11),
        estimator: EstimatorChoice::Grid { points_per_sd: 6.0, span_sds: 10.0, bridge: false },
        window: None,
        fit: FitCfg { scale: FitScale::LogTime, window_lo: 128.0, window_hi: 2048.0 },
        n_walls: 40,
        seed: SEED,
    };
    let record = run_experiment(&cfg)?;
    let env_agg = record
        .aggregate
        .ok_or_else(|| Error::NonConvergence("environment run produced no aggregate".into()))?;
    let bm = &scan.iter().find(|(b, _)| *b == 1.0).unwrap().1;
    let verdict = ratio_invariance_check(&env_agg, bm);
    let detail = format!(
        "walk in Gaussian environment (dispersion ratio 1): gamma CI {} vs continuum beta=1 CI {}: intervals {}",
        interval_str(verdict.a),
        interval_str(verdict.b),
        if verdict.overlap { "overlap" } else { "are disjoint" }
    );
    Ok((verdict.overlap, detail))
}

// ---------------------------------------------------------------------------
// Quick-level criteria
// ---------------------------------------------------------------------------

/// On small discrete instances the grid engine reproduces exhaustive
/// enumeration to near machine precision, and the particle estimator
/// agrees within Monte Carlo error.
fn c10_oracle_equivalence() -> Result<(bool, String)> {
    let mut max_grid_dev: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    let mut smc_checked = 0usize;
    for i in 0..25u64 {
        let stream = RngStream::new(SEED, 100 + i);
        let law = match i % 3 {
            0 => StepLaw::rademacher(),
            1 => StepLaw::two_point(1.0, -1.0, 0.6)?,
            _ => StepLaw::finite(&[(-1.0, 0.3), (0.0, 0.4), (1.0, 0.3)])?,
        };
        let n = 6 + ((i as usize * 5) % 11); // 6..16
        let x0 = 1.0 + (i % 2) as f64;
        let spec = if i % 2 == 0 {
            WallSpec::new(WallKind::RandomWalk { step: StepLaw::rademacher(), beta: 1.0 })
        } else {
            WallSpec::new(WallKind::Iid { law: StepLaw::gaussian(0.0, 1.0)? })
        };
        let wall = realize_wall(&spec, n as f64, stream.substream(1))?;
        let window = if i % 5 == 0 {
            Some(EndWindow::new(-0.5, 1.5, WindowScale::SqrtHorizon)?)
        } else {
            None
        };
        let p_exact = brute_force_survival(&law, &wall.path.values, x0, window.as_ref())?;

        let walker = Walker::DiscreteStep { law: law.clone() };
        let opts = GridOpts { bridge: false, ..GridOpts::default() };
        let curve = grid_survival(
            &walker,
            &wall,
            x0,
            &Schedule::UniformInteger,
            &[n as f64],
            window.as_ref(),
            &opts,
        )?;
        let p_grid = curve.entries[0].log_p.exp();
        let dev = (p_grid - p_exact).abs();
        max_grid_dev = max_grid_dev.max(dev);
        if dev > 1e-12 {
            return Ok((
                false,
                format!(
                    "instance {i} (n={n}): |grid - enumeration| = {dev:.3e} exceeds 1e-12 (p = {p_exact:.6e})"
                ),
            ));
        }

        if p_exact >= 0.005 {
            let particles = 40_000usize;
            let smc = smc_survival(
                &walker,
                &wall,
                x0,
                &Schedule::UniformInteger,
                &[n as f64],
                window.as_ref(),
                particles,
                false,
                stream.substream(2),
            )?;
            let p_smc = smc.entries[0].log_p.exp();
            let sigma = (p_exact * (1.0 - p_exact) / particles as f64).sqrt();
            let z = (p_smc - p_exact).abs() / sigma;
            max_z = max_z.max(z);
            smc_checked += 1;
            if (p_smc - p_exact).abs() > 3.0 * sigma + 1e-9 {
                return Ok((
                    false,
                    format!(
                        "instance {i} (n={n}): particle estimate off by {z:.2} sigma (p = {p_exact:.4})"
                    ),
                ));
            }
        }
    }
    Ok((
        true,
        format!(
            "25 discrete instances (n <= 16): max |grid - enumeration| = {max_grid_dev:.2e}; particle filter checked on {smc_checked}, max |z| = {max_z:.2}"
        ),
    ))
}

/// The chained block costs are subadditive at the stated slack.
fn c11_subadditivity() -> Result<(bool, String)> {
    let spec = WallSpec::new(WallKind::ScaledOu { mu: 1.0, sigma: 1.0, beta: 1.0 });
    let walker = Walker::Ou { params: OuParams::new(1.0, 1.0)? };
    let opts = GridOpts::default();
    let interval = (0.5, f64::INFINITY);

    let reports = (0..20u64)
        .into_par_iter()
        .map(|w| -> Result<(usize, usize, f64)> {
            let stream = RngStream::new(SEED, 400 + w);
            let wall = realize_wall(&spec, 120.0, stream.substream(0))?;
            let dec = decompose(&wall.path, 0.5)?;
            if dec.n_blocks() < 8 {
                return Err(Error::NonConvergence(format!(
                    "wall {w}: only {} excursion blocks in horizon 120",
                    dec.n_blocks()
                )));
            }
            let rep = subadditivity_check(&wall, &dec, &walker, interval, 8, 1e-6, &opts)?;
            Ok((rep.pairs, rep.violations, rep.max_excess))
        })
        .collect::<Result<Vec<_>>>()?;

    let pairs: usize = reports.iter().map(|r| r.0).sum();
    let violations: usize = reports.iter().map(|r| r.1).sum();
    let worst = reports.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    let pass = violations == 0;
    Ok((
        pass,
        format!(
            "20 mean-reverting walls, all splits up to 8 blocks: {pairs} inequalities, {violations} violations (slack 1e-6), max excess {worst:.2e}"
        ),
    ))
}

/// Conditioned on survival, increasing path events are positively
/// associated (checked by exhaustive enumeration).
fn c12_fkg() -> Result<(bool, String)> {
    let law = StepLaw::rademacher();
    let mut done = 0usize;
    let mut attempts = 0u64;
    let mut worst_margin = f64::INFINITY;
    while done < 100 && attempts < 400 {
        attempts += 1;
        let stream = RngStream::new(SEED, 10_000 + attempts);
        let mut rng = stream.substream(0).rng();
        let n = 4 + (attempts as usize % 7); // 4..10
        let (wall_values, x0) = if attempts % 2 == 0 {
            (vec![0.0; n + 1], 1.0)
        } else {
            let spec =
                WallSpec::new(WallKind::RandomWalk { step: StepLaw::rademacher(), beta: 1.0 });
            let wall = realize_wall(&spec, n as f64, stream.substream(1))?;
            (wall.path.values, 2.0)
        };
        let scale = 0.6 * (n as f64).sqrt();
        let a = IncreasingEvent::random(n, scale, &mut rng);
        let b = IncreasingEvent::random(n, scale, &mut rng);
        match fkg_brute_check(&law, &wall_values, x0, &a, &b) {
            Ok(rep) => {
                worst_margin = worst_margin.min(rep.p_ab - rep.p_a * rep.p_b);
                if !rep.ok {
                    return Ok((
                        false,
                        format!(
                            "pair {attempts}: P(A and B) = {:.6} < P(A) P(B) = {:.6}",
                            rep.p_ab,
                            rep.p_a * rep.p_b
                        ),
                    ));
                }
                done += 1;
            }
            Err(_) => continue, // degenerate draw (e.g. nothing survives); redraw
        }
    }
    if done < 100 {
        return Ok((false, format!("only {done} valid event pairs in {attempts} draws")));
    }
    Ok((
        true,
        format!(
            "100 increasing event pairs on walks of length <= 10 ({attempts} draws): P(A and B) >= P(A) P(B) throughout, min margin {worst_margin:.2e}"
        ),
    ))
}

/// Exponentially tilted means are linear in the tilt up to an explicit
/// quadratic error.
fn c13_tilt_bracket() -> Result<(bool, String)> {
    let families: Vec<(&str, StepLaw)> = vec![
        ("gaussian", StepLaw::gaussian(0.0, 1.0)?),
        ("fair-sign", StepLaw::rademacher()),
        ("skewed-two-point", StepLaw::two_point(2.0, -0.5, 0.2)?),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, law) in &families {
        let cap = theta_cap(law);
        let thetas: Vec<f64> = (1..=9).map(|k| cap * 0.1 * k as f64).collect();
        let rep = tilted_mean_bracket_check(law, &thetas)?;
        pass &= rep.ok;
        parts.push(format!(
            "{name}: K = {:.3}, ratio range [{:.4}, {:.4}], {}",
            rep.k,
            rep.ratio_low,
            rep.ratio_high,
            if rep.ok { "within bound" } else { "OUT OF BOUND" }
        ));
    }
    Ok((pass, format!("|m(theta) - theta E X^2| <= K theta^2 on 9-point grids: {}", parts.join("; "))))
}

/// The closed-form normal tail bracket contains the true tail everywhere
/// it is quoted.
fn c14_tail_bracket() -> Result<(bool, String)> {
    let xs = [0.1, 0.2, 0.5, 0.8, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.5, 8.0, 10.0];
    let mut worst_rel_width = 0.0f64;
    for &x in &xs {
        let (lo, hi) = gaussian_tail_bounds(x)?;
        let truth = 0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2);
        if !(lo <= truth && truth <= hi) {
            return Ok((
                false,
                format!("x = {x}: bracket [{lo:.6e}, {hi:.6e}] misses the tail {truth:.6e}"),
            ));
        }
        worst_rel_width = worst_rel_width.max((hi - lo) / truth);
    }
    Ok((
        true,
        format!(
            "bracket contains the exact tail at all {} points in [0.1, 10]; worst relative width {:.2}",
            xs.len(),
            worst_rel_width
        ),
    ))
}

/// A wall that outruns the walker is detected up front, and the measured
/// curve degenerates to the infinite-rate branch rather than a number.
fn c15_infeasible_branch() -> Result<(bool, String)> {
    let law = StepLaw::rademacher();
    let spec = WallSpec::new(WallKind::RandomWalk {
        step: StepLaw::finite(&[(2.0, 1.0)])?,
        beta: 1.0,
    });
    let x0 = 2.5;
    let feas = check_feasibility(&law, &spec, x0)?;
    let flagged = feas.status == FeasibilityStatus::Infeasible && feas.witness.is_some();

    let wall = realize_wall(&spec, 8.0, RngStream::new(SEED, 500))?;
    let walker = Walker::DiscreteStep { law };
    let horizons: Vec<f64> = (1..=8).map(|k| k as f64).collect();
    let opts = GridOpts { bridge: false, ..GridOpts::default() };
    let curve =
        grid_survival(&walker, &wall, x0, &Schedule::UniformInteger, &horizons, None, &opts)?;
    let died = curve.entries.last().map(|e| e.died).unwrap_or(false);
    let fit = fit_exponent(&curve, FitScale::LogTime, (1.0, 8.0))?;
    let pass = flagged && died && fit.infeasible && fit.gamma_hat == f64::INFINITY;
    let witness = feas.witness.map(|w| w.to_string()).unwrap_or_else(|| "-".into());
    Ok((
        pass,
        format!(
            "+2-per-step wall vs +/-1 walker from x0 = 2.5: screened infeasible (witness step {witness}); run dies (log p = -inf) and the fit returns the +inf exponent branch"
        ),
    ))
}

/// Non-gated diagnostic: size of the within-step crossing correction on a
/// coarse schedule (level effect, and the much smaller slope effect).
fn diag_bridge_effect() -> Result<(bool, String)> {
    let mut results = Vec::new();
    for bridge in [true, false] {
        let cfg = ExperimentConfig {
            schema: CONFIG_SCHEMA.to_string(),
            name: format!("bridge-{bridge}"),
            process: ProcessKind::Bm { var_rate: 1.0 },
            wall: WallSpec::new(WallKind::Zero),
            x0: 1.0,
            schedule: Schedule::OctaveDoubling { first_horizon: 1.0, steps_per_octave: 16 },
            horizons: pow2(4, 9),
            estimator: EstimatorChoice::Grid { points_per_sd: 6.0, span_sds: 10.0, bridge },
            window: None,
            fit: FitCfg { scale: FitScale::LogTime, window_lo: 16.0, window_hi: 512.0 },
            n_walls: 1,
            seed: SEED,
        };
        let record = run_experiment(&cfg)?;
        let fit = record.walls[0].fit.clone();
        let log_p = record.walls[0].curve.entries.last().unwrap().log_p;
        results.push((fit.gamma_hat, log_p));
    }
    let (g_on, lp_on) = results[0];
    let (g_off, lp_off) = results[1];
    Ok((
        true,
        format!(
            "diagnostic (not gated): ignoring within-step crossings shifts log-survival by {:+.3} at t=512 and the fitted exponent by {:+.4} on a 16-step-per-octave schedule",
            lp_off - lp_on,
            g_off - g_on
        ),
    ))
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// Run the validation suite at the requested level.
pub fn run_validation(level: ValidationLevel) -> ValidationReport {
    run_validation_filtered(level, None)
}

/// Run only the criteria whose id starts with `only` (all when `None`).
/// Criteria that depend on a skipped prerequisite fail honestly with an
/// "unavailable" detail, so a narrow filter is a development tool, not a
/// way to green the suite.
pub fn run_validation_filtered(level: ValidationLevel, only: Option<&str>) -> ValidationReport {
    let t0 = Instant::now();
    let mut outcomes: Vec<CriterionOutcome> = Vec::new();
    let want = |id: &str| only.is_none_or(|f| id.starts_with(f));

    let mut ballot: Option<QuenchedAggregate> = None;
    let mut scan: Vec<(f64, QuenchedAggregate)> = Vec::new();
    let mut lambda11: Option<f64> = None;
    let mut ou_block: Option<QuenchedAggregate> = None;

    if level == ValidationLevel::Full {
        if want("c01-ballot-baseline") || want("c05-beta-midpoint-convexity") {
            let t = Instant::now();
            let res = c01_ballot(&mut ballot);
            if want("c01-ballot-baseline") {
                outcomes.push(finish("c01-ballot-baseline", Some(60.0), t, res));
            }
        }

        if want("c02-iid-wall-irrelevance") {
            let t = Instant::now();
            outcomes.push(finish("c02-iid-wall-irrelevance", Some(600.0), t, c02_iid_irrelevance()));
        }

        if want("c03-brownian-wall-relevance")
            || want("c04-beta-symmetry")
            || want("c05-beta-midpoint-convexity")
            || want("c08-ou-bm-bridge")
            || want("c09-walk-ratio-invariance")
        {
            let t = Instant::now();
            let res = c03_relevance(&mut scan);
            if want("c03-brownian-wall-relevance") {
                outcomes.push(finish("c03-brownian-wall-relevance", Some(1800.0), t, res));
            }
        }

        if want("c04-beta-symmetry") {
            let t = Instant::now();
            let res = if scan.len() == 3 {
                c04_symmetry(&scan)
            } else {
                Err(Error::NonConvergence("coupling scan unavailable".into()))
            };
            outcomes.push(finish("c04-beta-symmetry", None, t, res));
        }

        if want("c05-beta-midpoint-convexity") {
            let t = Instant::now();
            let res = match (&ballot, scan.len()) {
                (Some(b), 3) => c05_convexity(b, &scan),
                _ => Err(Error::NonConvergence("baseline or coupling scan unavailable".into())),
            };
            outcomes.push(finish("c05-beta-midpoint-convexity", None, t, res));
        }

        if want("c06-spectral-equal-rates") || want("c07-quenched-above-averaged") || want("c08-ou-bm-bridge") {
            let t = Instant::now();
            let res = c06_spectral(&mut lambda11);
            if want("c06-spectral-equal-rates") {
                outcomes.push(finish("c06-spectral-equal-rates", Some(400.0), t, res));
            }
        }

        if want("c07-quenched-above-averaged") || want("c08-ou-bm-bridge") {
            let t = Instant::now();
            let res = match lambda11 {
                Some(l) => c07_quenched_above_averaged(l, &mut ou_block),
                None => Err(Error::NonConvergence("averaged rate unavailable".into())),
            };
            if want("c07-quenched-above-averaged") {
                outcomes.push(finish("c07-quenched-above-averaged", Some(1800.0), t, res));
            }
        }

        if want("c08-ou-bm-bridge") {
            let t = Instant::now();
            let res = match (&ou_block, scan.len()) {
                (Some(q), 3) => c08_bridge(q, &scan),
                _ => Err(Error::NonConvergence("block-chain rates or scan unavailable".into())),
            };
            outcomes.push(finish("c08-ou-bm-bridge", None, t, res));
        }

        if want("c09-walk-ratio-invariance") {
            let t = Instant::now();
            let res = if scan.len() == 3 {
                c09_ratio_invariance(&scan)
            } else {
                Err(Error::NonConvergence("coupling scan unavailable".into()))
            };
            outcomes.push(finish("c09-walk-ratio-invariance", None, t, res));
        }
    }

    if want("c10-oracle-equivalence") {
        let t = Instant::now();
        outcomes.push(finish("c10-oracle-equivalence", Some(60.0), t, c10_oracle_equivalence()));
    }

    if want("c11-block-subadditivity") {
        let t = Instant::now();
        outcomes.push(finish("c11-block-subadditivity", None, t, c11_subadditivity()));
    }

    if want("c12-fkg-positive-association") {
        let t = Instant::now();
        outcomes.push(finish("c12-fkg-positive-association", None, t, c12_fkg()));
    }

    if want("c13-tilted-mean-bracket") {
        let t = Instant::now();
        outcomes.push(finish("c13-tilted-mean-bracket", None, t, c13_tilt_bracket()));
    }

    if want("c14-gaussian-tail-bracket") {
        let t = Instant::now();
        outcomes.push(finish("c14-gaussian-tail-bracket", None, t, c14_tail_bracket()));
    }

    if want("c15-infeasible-branch") {
        let t = Instant::now();
        outcomes.push(finish("c15-infeasible-branch", None, t, c15_infeasible_branch()));
    }

    if want("diag-bridge-effect") {
        let t = Instant::now();
        outcomes.push(finish("diag-bridge-effect", None, t, diag_bridge_effect()));
    }

    ValidationReport { level, outcomes, elapsed_seconds: t0.elapsed().as_secs_f64() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_bracket_criterion_passes() {
        let (pass, detail) = c14_tail_bracket().unwrap();
        assert!(pass, "{detail}");
    }

    #[test]
    fn tilt_bracket_criterion_passes() {
        let (pass, detail) = c13_tilt_bracket().unwrap();
        assert!(pass, "{detail}");
    }

    #[test]
    fn infeasible_branch_criterion_passes() {
        let (pass, detail) = c15_infeasible_branch().unwrap();
        assert!(pass, "{detail}");
    }

    #[test]
    fn outcome_lines_are_labeled() {
        let o = CriterionOutcome {
            id: "c99-demo".into(),
            pass: false,
            detail: "numbers here".into(),
            seconds: 1.25,
        };
        assert!(o.line().starts_with("FAIL c99-demo"));
        assert!(o.line().contains("numbers here"));
    }

    #[test]
    fn budget_overrun_fails_the_criterion() {
        let started = Instant::now();
        std::thread::sleep(std::time::Duration::from_millis(30));
        let out = finish("c98-budget", Some(0.01), started, Ok((true, "fast enough?".into())));
        assert!(!out.pass);
        assert!(out.detail.contains("EXCEEDED"));
    }
}
