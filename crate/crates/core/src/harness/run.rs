//! Reproducible experiment execution and file outputs.
//!
//! Wall `w` of an experiment with master seed `s` draws its disorder from
//! stream `(s, w).substream(0)` and its estimator noise from
//! `(s, w).substream(1)`, so results are independent of scheduling order
//! and of how the wall set is partitioned across workers.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{aggregate_quenched, fit_exponent, ExponentFit, QuenchedAggregate};
use crate::error::{Error, Result};
use crate::paths::TimeGrid;
use crate::rng::RngStream;
use crate::survival::{
    direct_mc_survival, grid_survival, smc_survival, GridOpts, SurvivalCurve,
};
use crate::walls::{realize_wall, realize_wall_on};

use super::config::{EstimatorChoice, ExperimentConfig};

/// Schema identifier written into every run record.
pub const RECORD_SCHEMA: &str = "randwall.record.v1";

/// Reserved substream tags under `(seed, wall_id)`.
const TAG_WALL: u64 = 0;
const TAG_ESTIMATOR: u64 = 1;
/// Stream id for cross-wall randomness (bootstrap), outside the wall range.
const AGGREGATE_STREAM: u64 = u64::MAX;

/// Results for a single quenched replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallOutcome {
    pub wall_id: u64,
    pub curve: SurvivalCurve,
    pub fit: ExponentFit,
}

/// Everything a finished run wrote, in memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Equals [`RECORD_SCHEMA`].
    pub schema: String,
    pub config: ExperimentConfig,
    /// SHA-256 of the canonical config TOML.
    pub config_hash: String,
    pub walls: Vec<WallOutcome>,
    /// Replica-averaged exponent; absent when fewer than two replicas
    /// produced finite fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<QuenchedAggregate>,
    /// Human-readable notes about degenerate replicas, low-ESS read-outs etc.
    pub diagnostics: Vec<String>,
    /// Wall-clock seconds; informational only, excluded from comparisons.
    pub elapsed_seconds: f64,
}

fn run_one(cfg: &ExperimentConfig, wall_id: u64) -> Result<WallOutcome> {
    let walker = cfg.walker()?;
    let base = RngStream::new(cfg.seed, wall_id);
    let hmax = *cfg.horizons.last().unwrap();
    let wall = if cfg.wall.kind.integer_times() {
        realize_wall(&cfg.wall, hmax, base.substream(TAG_WALL))?
    } else {
        let grid = TimeGrid::from_times(cfg.schedule.times(hmax)?)?;
        realize_wall_on(&cfg.wall, &grid, base.substream(TAG_WALL))?
    };
    let window = cfg.window.as_ref();
    let curve = match &cfg.estimator {
        EstimatorChoice::Grid { points_per_sd, span_sds, bridge } => {
            let opts = GridOpts {
                points_per_sd: *points_per_sd,
                span_sds: *span_sds,
                bridge: *bridge,
            };
            grid_survival(&walker, &wall, cfg.x0, &cfg.schedule, &cfg.horizons, window, &opts)?
        }
        EstimatorChoice::Smc { particles, bridge } => smc_survival(
            &walker,
            &wall,
            cfg.x0,
            &cfg.schedule,
            &cfg.horizons,
            window,
            *particles,
            *bridge,
            base.substream(TAG_ESTIMATOR),
        )?,
        EstimatorChoice::Direct { samples, bridge } => direct_mc_survival(
            &walker,
            &wall,
            cfg.x0,
            &cfg.schedule,
            &cfg.horizons,
            window,
            *samples,
            *bridge,
            base.substream(TAG_ESTIMATOR),
        )?,
    };
    let fit = fit_exponent(&curve, cfg.fit.scale, (cfg.fit.window_lo, cfg.fit.window_hi))?;
    Ok(WallOutcome { wall_id, curve, fit })
}

/// Run every replica of `cfg` (in parallel) and aggregate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let started = Instant::now();
    let walls: Vec<WallOutcome> = (0..cfg.n_walls as u64)
        .into_par_iter()
        .map(|w| run_one(cfg, w))
        .collect::<Result<Vec<_>>>()?;

    let mut diagnostics = Vec::new();
    let n_low_ess: usize = walls
        .iter()
        .map(|w| w.curve.entries.iter().filter(|e| e.low_ess).count())
        .sum();
    if n_low_ess > 0 {
        diagnostics.push(format!("{n_low_ess} read-outs flagged low effective sample size"));
    }
    let fits: Vec<ExponentFit> = walls.iter().map(|w| w.fit.clone()).collect();
    let n_finite = fits.iter().filter(|f| !f.infeasible).count();
    if n_finite < walls.len() {
        diagnostics.push(format!(
            "{} of {} replicas degenerated to the +inf exponent branch",
            walls.len() - n_finite,
            walls.len()
        ));
    }
    let aggregate = if n_finite == 0 {
        diagnostics.push("no finite replica exponents; aggregate omitted".into());
        None
    } else if walls.len() == 1 {
        Some(QuenchedAggregate::degenerate(fits[0].clone()))
    } else if n_finite == 1 {
        diagnostics.push("only one finite replica exponent; aggregate omitted".into());
        None
    } else {
        Some(aggregate_quenched(
            &fits,
            RngStream::new(cfg.seed, AGGREGATE_STREAM),
        )?)
    };

    Ok(RunRecord {
        schema: RECORD_SCHEMA.to_string(),
        config: cfg.clone(),
        config_hash: cfg.content_hash()?,
        walls,
        aggregate,
        diagnostics,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Deterministically combine partial replica sets (e.g. from sharded runs):
/// flatten, sort by wall id, and reject duplicates. Because each replica's
/// randomness depends only on `(seed, wall_id)`, the merged set is
/// independent of the partition.
pub fn merge_outcomes(parts: Vec<Vec<WallOutcome>>) -> Result<Vec<WallOutcome>> {
    let mut all: Vec<WallOutcome> = parts.into_iter().flatten().collect();
    all.sort_by_key(|w| w.wall_id);
    for pair in all.windows(2) {
        if pair[0].wall_id == pair[1].wall_id {
            return Err(Error::InvalidInput(format!(
                "duplicate wall id {} across merged parts",
                pair[0].wall_id
            )));
        }
    }
    Ok(all)
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Write `config.toml`, `curves.csv`, `fits.jsonl` and `record.json` under
/// `dir` (created if needed). Output bytes are a pure function of the
/// record's content.
pub fn write_outputs(record: &RunRecord, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), record.config.to_toml()?)?;

    let mut csv = String::new();
    csv.push_str("# randwall.curves.v1\n");
    csv.push_str("wall_id,horizon,log_p,stderr,estimator,died,low_ess\n");
    for w in &record.walls {
        for e in &w.curve.entries {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                w.wall_id,
                e.horizon,
                e.log_p,
                e.stderr,
                e.estimator,
                fmt_bool(e.died),
                fmt_bool(e.low_ess)
            ));
        }
    }
    fs::write(dir.join("curves.csv"), csv)?;

    let mut jsonl = String::new();
    jsonl.push_str("{\"schema\":\"randwall.fits.v1\"}\n");
    for w in &record.walls {
        let line = serde_json::json!({ "wall_id": w.wall_id, "fit": w.fit });
        jsonl.push_str(&serde_json::to_string(&line).map_err(io_json)?);
        jsonl.push('\n');
    }
    fs::write(dir.join("fits.jsonl"), jsonl)?;

    let json = serde_json::to_string_pretty(record).map_err(io_json)?;
    fs::write(dir.join("record.json"), json)?;
    Ok(())
}

fn io_json(e: serde_json::Error) -> Error {
    Error::Config(format!("record serialization failed: {e}"))
}

/// Read a `record.json` back.
pub fn read_record(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path)?;
    let record: RunRecord =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("record parse: {e}")))?;
    if record.schema != RECORD_SCHEMA {
        return Err(Error::Config(format!(
            "record schema '{}' not recognized (expected '{RECORD_SCHEMA}')",
            record.schema
        )));
    }
    Ok(record)
}

/// Outcome of re-running a stored record's config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub matches: bool,
    pub detail: String,
}

/// Re-run the config stored in `record.json` at `path` and compare against
/// the stored results (timing excluded).
pub fn replay(path: &Path) -> Result<(RunRecord, ReplayOutcome)> {
    let stored = read_record(path)?;
    let fresh = run_experiment(&stored.config)?;
    let outcome = compare_records(&stored, &fresh);
    Ok((fresh, outcome))
}

/// Field-by-field comparison of two records, ignoring wall-clock timing.
pub fn compare_records(stored: &RunRecord, fresh: &RunRecord) -> ReplayOutcome {
    if stored.config_hash != fresh.config_hash {
        return ReplayOutcome {
            matches: false,
            detail: format!(
                "config hash differs: stored {} vs fresh {}",
                stored.config_hash, fresh.config_hash
            ),
        };
    }
    if stored.walls != fresh.walls {
        let first = stored
            .walls
            .iter()
            .zip(&fresh.walls)
            .find(|(a, b)| a != b)
            .map(|(a, _)| a.wall_id);
        return ReplayOutcome {
            matches: false,
            detail: match first {
                Some(id) => format!("replica results differ starting at wall {id}"),
                None => "replica count differs".to_string(),
            },
        };
    }
    if stored.aggregate != fresh.aggregate {
        return ReplayOutcome { matches: false, detail: "aggregate differs".to_string() };
    }
    ReplayOutcome { matches: true, detail: "bit-identical replay".to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::FitScale;
    use crate::harness::config::{FitCfg, ProcessKind};
    use crate::law::StepLaw;
    use crate::survival::Schedule;
    use crate::walls::{WallKind, WallSpec};
    use tempfile::tempdir;

    /// A deliberately small experiment that still exercises disorder,
    /// aggregation and the fit path.
    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::template();
        cfg.name = "smoke".into();
        cfg.horizons = (3..=8).map(|k| (1u64 << k) as f64).collect();
        cfg.schedule = Schedule::OctaveDoubling { first_horizon: 1.0, steps_per_octave: 16 };
        cfg.fit = FitCfg { scale: FitScale::LogTime, window_lo: 16.0, window_hi: 256.0 };
        cfg.n_walls = 4;
        cfg.seed = 77;
        cfg
    }

    #[test]
    fn run_is_deterministic_and_replayable() {
        let cfg = small_cfg();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.walls, b.walls);
        assert_eq!(a.aggregate, b.aggregate);
        assert!(a.aggregate.is_some());

        let dir = tempdir().unwrap();
        write_outputs(&a, dir.path()).unwrap();
        let (fresh, outcome) = replay(&dir.path().join("record.json")).unwrap();
        assert!(outcome.matches, "{}", outcome.detail);
        assert_eq!(fresh.walls, a.walls);
    }

    #[test]
    fn outputs_round_trip_through_disk() {
        let cfg = small_cfg();
        let record = run_experiment(&cfg).unwrap();
        let dir = tempdir().unwrap();
        write_outputs(&record, dir.path()).unwrap();

        let back = read_record(&dir.path().join("record.json")).unwrap();
        assert_eq!(back, {
            let mut r = record.clone();
            r.elapsed_seconds = back.elapsed_seconds;
            r
        });

        // The curves file is parseable and covers every (wall, horizon).
        let csv = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
        let rows: Vec<&str> =
            csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with("wall_id")).collect();
        assert_eq!(rows.len(), cfg.n_walls * cfg.horizons.len());
        for row in rows {
            let cols: Vec<&str> = row.split(',').collect();
            assert_eq!(cols.len(), 7);
            cols[2].parse::<f64>().unwrap();
        }

        // The config file reproduces the config exactly.
        let text = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
        let cfg_back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg_back, cfg);
    }

    #[test]
    fn merge_is_partition_independent() {
        let cfg = small_cfg();
        let record = run_experiment(&cfg).unwrap();
        let w = record.walls;
        let a =
            merge_outcomes(vec![vec![w[0].clone(), w[2].clone()], vec![w[1].clone(), w[3].clone()]])
                .unwrap();
        let b = merge_outcomes(vec![
            vec![w[3].clone()],
            vec![w[1].clone(), w[0].clone()],
            vec![w[2].clone()],
        ])
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a, w);
        // Duplicates are rejected.
        assert!(merge_outcomes(vec![vec![w[0].clone()], vec![w[0].clone()]]).is_err());
    }

    #[test]
    fn infeasible_walls_are_reported_not_hidden() {
        // A wall that outruns the walker: deterministic +2 drift against
        // +/-1 steps. Every replica dies, so there is no aggregate, and the
        // record says so.
        let mut cfg = ExperimentConfig::template();
        cfg.name = "runaway-wall".into();
        cfg.process = ProcessKind::Rw { law: StepLaw::rademacher() };
        cfg.wall = WallSpec::new(WallKind::RandomWalk {
            step: StepLaw::finite(&[(2.0, 1.0)]).unwrap(),
            beta: 1.0,
        });
        cfg.x0 = 2.5;
        cfg.schedule = Schedule::UniformInteger;
        cfg.horizons = vec![2.0, 4.0, 6.0, 8.0];
        cfg.estimator = EstimatorChoice::Grid { points_per_sd: 6.0, span_sds: 10.0, bridge: false };
        cfg.fit = FitCfg { scale: FitScale::LogTime, window_lo: 2.0, window_hi: 8.0 };
        cfg.n_walls = 3;
        cfg.seed = 5;
        let record = run_experiment(&cfg).unwrap();
        assert!(record.aggregate.is_none());
        assert!(record.walls.iter().all(|w| w.fit.infeasible));
        assert!(record
            .diagnostics
            .iter()
            .any(|d| d.contains("no finite replica exponents")));
        // And the infinite branch survives a disk round trip.
        let dir = tempdir().unwrap();
        write_outputs(&record, dir.path()).unwrap();
        let back = read_record(&dir.path().join("record.json")).unwrap();
        assert!(back.walls[0].fit.gamma_hat.is_infinite());
        assert!(back.walls[0].curve.entries.last().unwrap().log_p == f64::NEG_INFINITY);
    }
}
