//! `randwall` — command-line front end for the persistence laboratory.
//!
//! Exit codes: 0 success, 1 honest negative result or internal failure
//! (a validation criterion failed, a replay mismatched, a solver did not
//! converge), 2 caller mistake (bad flags, malformed config, parameters
//! outside their documented domain).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use randwall::analysis::{aggregate_quenched, fit_exponent, ExponentFit};
use randwall::env::EnvModel;
use randwall::harness::{
    read_record, replay, run_experiment, run_validation_filtered, write_outputs, ExperimentConfig,
    ValidationLevel,
};
use randwall::rng::RngStream;
use randwall::spectral::{
    eigen_csv_header, eigen_csv_line, principal_eigenvalue, principal_eigenvalue_scaled,
    SpectralProblem,
};
use randwall::tilt::{fast_growth_estimate, TiltMode};
use randwall::{Error, Result};

#[derive(Parser)]
#[command(
    name = "randwall",
    version,
    about = "Persistence probabilities for walks constrained above random walls"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print a starter experiment config (TOML) to stdout
    Template,
    /// Run an experiment from a config file and write its output bundle
    Simulate {
        /// Experiment config (TOML, as produced by `template`)
        #[arg(long)]
        config: PathBuf,
        /// Override the config's base seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's number of wall replicas
        #[arg(long)]
        walls: Option<usize>,
        /// Output directory (default: $RANDWALL_OUT, else runs/<name>)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-fit decay exponents from a stored record over a chosen window
    Exponent {
        /// A record.json written by `simulate`
        #[arg(long)]
        record: PathBuf,
        /// Fit-window lower horizon (default: the window stored in the record)
        #[arg(long)]
        lo: Option<f64>,
        /// Fit-window upper horizon (default: the window stored in the record)
        #[arg(long)]
        hi: Option<f64>,
    },
    /// Solve the principal decay-rate eigenproblem on a truncated box
    Spectral {
        /// Mean-reversion rate of the first coordinate
        #[arg(long)]
        mu1: f64,
        /// Mean-reversion rate of the second coordinate
        #[arg(long)]
        mu2: f64,
        /// Coupling coefficient in the kill line x = beta * y
        #[arg(long)]
        beta: f64,
        /// Box half-width (default 8)
        #[arg(long, alias = "box")]
        box_half_width: Option<f64>,
        /// Mesh spacing (default 0.05)
        #[arg(long)]
        mesh: Option<f64>,
        /// Noise scale of the first coordinate (default 1)
        #[arg(long, default_value_t = 1.0)]
        sigma1: f64,
        /// Noise scale of the second coordinate (default 1)
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
    },
    /// Estimate a fast-growth probability under an exponential tilt
    Tilt {
        /// Spread of the random per-step means
        #[arg(long)]
        mean_sd: f64,
        /// Spread of the walk steps around their means
        #[arg(long)]
        step_sd: f64,
        /// Walk length
        #[arg(long)]
        n: usize,
        /// Growth coefficient: the target level is c*sqrt(n)*loglog(n)
        #[arg(long)]
        c: f64,
        /// Importance-sampling draws
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        /// Tilt shape
        #[arg(long, value_enum, default_value_t = TiltArg::Schedule)]
        mode: TiltArg,
        /// Base seed (environment uses substream 0, sampler substream 1)
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Run the built-in validation suite
    Validate {
        #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
        level: LevelArg,
        /// Only run criteria whose id starts with this prefix (e.g. "c14")
        #[arg(long)]
        only: Option<String>,
    },
    /// Re-run a stored record's config and compare against its stored results
    Replay {
        /// A record.json written by `simulate`
        #[arg(long)]
        record: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TiltArg {
    Schedule,
    Constant,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Template => {
            print!("{}", ExperimentConfig::template().to_toml()?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Simulate { config, seed, walls, out } => cmd_simulate(config, seed, walls, out),
        Cmd::Exponent { record, lo, hi } => cmd_exponent(record, lo, hi),
        Cmd::Spectral { mu1, mu2, beta, box_half_width, mesh, sigma1, sigma2 } => {
            cmd_spectral(mu1, mu2, beta, box_half_width, mesh, sigma1, sigma2)
        }
        Cmd::Tilt { mean_sd, step_sd, n, c, samples, mode, seed } => {
            cmd_tilt(mean_sd, step_sd, n, c, samples, mode, seed)
        }
        Cmd::Validate { level, only } => cmd_validate(level, only.as_deref()),
        Cmd::Replay { record } => cmd_replay(record),
    }
}

fn read_text(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn cmd_simulate(
    config: PathBuf,
    seed: Option<u64>,
    walls: Option<usize>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::from_toml(&read_text(&config)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(w) = walls {
        cfg.n_walls = w;
    }
    cfg.validate()?;

    let record = run_experiment(&cfg)?;
    let dir = out
        .or_else(|| std::env::var_os("RANDWALL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
    write_outputs(&record, &dir)?;

    let hmin = cfg.horizons.first().copied().unwrap_or(0.0);
    let hmax = cfg.horizons.last().copied().unwrap_or(0.0);
    println!(
        "ran {}: {} walls, horizons {hmin}..{hmax}, {:.1}s",
        cfg.name,
        record.walls.len(),
        record.elapsed_seconds
    );
    match &record.aggregate {
        Some(agg) => println!(
            "exponent mean {:.4}, 95% CI [{:.4}, {:.4}], {} finite walls, {} infeasible",
            agg.mean,
            agg.ci95.0,
            agg.ci95.1,
            agg.n_walls - agg.n_infeasible,
            agg.n_infeasible
        ),
        None => println!("no cross-wall aggregate (all walls infeasible or too few replicas)"),
    }
    for d in &record.diagnostics {
        println!("note: {d}");
    }
    println!("wrote {}/{{config.toml, curves.csv, fits.jsonl, record.json}}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_exponent(record: PathBuf, lo: Option<f64>, hi: Option<f64>) -> Result<ExitCode> {
    if !record.is_file() {
        return Err(Error::Config(format!("cannot read {}", record.display())));
    }
    let rec = read_record(&record)?;
    let scale = rec.config.fit.scale;
    let window = (
        lo.unwrap_or(rec.config.fit.window_lo),
        hi.unwrap_or(rec.config.fit.window_hi),
    );

    let mut fits: Vec<ExponentFit> = Vec::with_capacity(rec.walls.len());
    for w in &rec.walls {
        let fit = fit_exponent(&w.curve, scale, window)?;
        println!(
            "wall {:>3}: gamma_hat {:>9.5}  stderr {:.5}  r2 {:.4}  points {}",
            w.wall_id, fit.gamma_hat, fit.stderr, fit.r2, fit.n_points
        );
        fits.push(fit);
    }
    let n_finite = fits.iter().filter(|f| !f.infeasible).count();
    if n_finite >= 2 {
        let agg = aggregate_quenched(&fits, RngStream::new(rec.config.seed, u64::MAX))?;
        println!(
            "pooled over {} finite walls: mean {:.5}, 95% CI [{:.5}, {:.5}], dispersion {:.5}",
            n_finite, agg.mean, agg.ci95.0, agg.ci95.1, agg.dispersion
        );
    } else {
        println!("pooled summary needs >= 2 finite walls (have {n_finite})");
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_spectral(
    mu1: f64,
    mu2: f64,
    beta: f64,
    box_half_width: Option<f64>,
    mesh: Option<f64>,
    sigma1: f64,
    sigma2: f64,
) -> Result<ExitCode> {
    let p = match (box_half_width, mesh) {
        (None, None) => SpectralProblem::with_defaults(mu1, mu2, beta)?,
        (l, h) => SpectralProblem::new(mu1, mu2, beta, l.unwrap_or(8.0), h.unwrap_or(0.05))?,
    };
    if sigma1 == 1.0 && sigma2 == 1.0 {
        let r = principal_eigenvalue(&p)?;
        println!("{}", eigen_csv_header());
        println!("{}", eigen_csv_line(&p, &r));
    } else {
        let r = principal_eigenvalue_scaled(mu1, mu2, sigma1, sigma2, beta, p.l, p.h)?;
        println!(
            "lambda1 {:.8}  (residual {:.2e}, boundary mass {:.2e}, {} iterations, {} unknowns)",
            r.lambda1, r.residual, r.boundary_mass, r.iterations, r.n_unknowns
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_tilt(
    mean_sd: f64,
    step_sd: f64,
    n: usize,
    c: f64,
    samples: usize,
    mode: TiltArg,
    seed: u64,
) -> Result<ExitCode> {
    let model = EnvModel::GaussianRandomMean { mean_sd, step_sd };
    model.validate()?;
    let base = RngStream::new(seed, 0);
    let env = model.sample(n, base.substream(0))?;
    let mode = match mode {
        TiltArg::Schedule => TiltMode::Schedule,
        TiltArg::Constant => TiltMode::Constant,
    };
    let est = fast_growth_estimate(&env, n, c, samples, mode, base.substream(1))?;
    println!("target level {:.4} at n = {n}", est.target);
    println!(
        "log_p {:.4}  (p {:.3e}, {} hits of {samples}, ess {:.1})",
        est.log_p, est.p, est.hits, est.ess
    );
    if est.unreliable {
        println!("note: effective sample size is low; increase --samples");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(level: LevelArg, only: Option<&str>) -> Result<ExitCode> {
    let level = match level {
        LevelArg::Quick => ValidationLevel::Quick,
        LevelArg::Full => ValidationLevel::Full,
    };
    let report = run_validation_filtered(level, only);
    if report.outcomes.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no criterion id starts with {:?} at this level",
            only.unwrap_or("")
        )));
    }
    for line in report.lines() {
        println!("{line}");
    }
    let failures = report.outcomes.iter().filter(|o| !o.pass).count();
    println!(
        "{} of {} criteria passed in {:.1}s",
        report.outcomes.len() - failures,
        report.outcomes.len(),
        report.elapsed_seconds
    );
    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_replay(record: PathBuf) -> Result<ExitCode> {
    if !record.is_file() {
        return Err(Error::Config(format!("cannot read {}", record.display())));
    }
    let (rec, outcome) = replay(&record)?;
    if outcome.matches {
        println!("replayed {}: outputs match the stored record", rec.config.name);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("replayed {}: MISMATCH — {}", rec.config.name, outcome.detail);
        Ok(ExitCode::from(1))
    }
}
