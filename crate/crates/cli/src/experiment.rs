//! Runs a configured experiment over its seeds and records the outcome.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nearpot_core::flow::{gamma_of_delta, run_flow, theorem_constants, PolicyGrid};
use nearpot_core::game::{uniform_policy, MarkovGame};
use nearpot_core::learner::run_learning;
use nearpot_core::potential::{alpha_from_kappa, estimate_kappa, estimate_lipschitz, Potential};
use nearpot_core::sampling::{random_profile, seeded_rng};
use nearpot_core::solver::{nash_gap, pure_equilibria};

use crate::config::{ExperimentConfig, Mode, OUTPUT_DIR_ENV};
use crate::error::{CliError, Result};

pub const SUMMARY_FILE: &str = "summary.json";

/// `nearpot <crate version>`, with the git description when one was
/// provided at build time through `NEARPOT_GIT_DESCRIBE`.
pub fn version_string() -> String {
    match option_env!("NEARPOT_GIT_DESCRIBE") {
        Some(d) => format!("nearpot {} ({d})", env!("CARGO_PKG_VERSION")),
        None => format!("nearpot {}", env!("CARGO_PKG_VERSION")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// Finite scalar results; infinite values are omitted.
    pub metrics: BTreeMap<String, f64>,
    /// SHA-256 of the potential series, when one was logged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_digest: Option<String>,
    pub violations: usize,
    /// Log or report file, relative to the output directory.
    pub log: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub version: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<String>,
    pub started_at: String,
    pub finished_at: String,
    pub output_dir: PathBuf,
    pub seeds: Vec<SeedSummary>,
    pub total_violations: usize,
}

impl RunRecord {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Malformed {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// Output directory: explicit, then the config, then the environment, then `runs`.
pub fn resolve_output_dir(config: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn digest(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn put(metrics: &mut BTreeMap<String, f64>, key: &str, value: f64) {
    if value.is_finite() {
        metrics.insert(key.to_string(), value);
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Builds and validates the game, runs every seed and writes the logs
/// and `summary.json` into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, base: &Path, out_dir: &Path) -> Result<RunRecord> {
    let game = config.game.build(base)?;
    config.validate(&game)?;
    let potential = config.analysis.potential.resolve(&game)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let started_at = Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true);
    let seeds = config.effective_seeds();
    let summaries: Vec<SeedSummary> = seeds
        .par_iter()
        .map(|&seed| run_seed(config, &game, potential.as_ref(), seed, out_dir))
        .collect::<Result<_>>()?;
    let total_violations = summaries.iter().map(|s| s.violations).sum();
    let record = RunRecord {
        config_hash: config.hash(),
        version: version_string(),
        mode: config.mode,
        game: game.name().map(str::to_string),
        started_at,
        finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        output_dir: out_dir.to_path_buf(),
        seeds: summaries,
        total_violations,
    };
    write_json(&out_dir.join(SUMMARY_FILE), &record)?;
    Ok(record)
}

fn run_seed(
    config: &ExperimentConfig,
    game: &MarkovGame,
    potential: Option<&Potential>,
    seed: u64,
    out_dir: &Path,
) -> Result<SeedSummary> {
    let mut metrics = BTreeMap::new();
    let a = &config.analysis;
    let (log, violations, phi_digest) = match config.mode {
        Mode::Learn => {
            let cfg = config.learner_for(seed);
            let log = run_learning(game, &cfg, potential)?;
            let name = PathBuf::from(format!("learn-seed-{seed}.jsonl"));
            let path = out_dir.join(&name);
            let mut w = create(&path)?;
            log.write_jsonl(&mut w).map_err(|e| CliError::io(&path, e))?;
            w.flush().map_err(|e| CliError::io(&path, e))?;
            let gaps: Vec<f64> = log.metric_records().map(|(_, m)| m.nash_gap).collect();
            put(&mut metrics, "initial_nash_gap", log.initial_gap().unwrap_or(f64::NAN));
            put(&mut metrics, "final_nash_gap", log.final_gap().unwrap_or(f64::NAN));
            put(&mut metrics, "median_nash_gap", median(gaps));
            put(&mut metrics, "theta", cfg.theta);
            put(&mut metrics, "horizon", cfg.horizon as f64);
            let phis: Option<Vec<f64>> = log.metric_records().map(|(_, m)| m.phi_mu).collect();
            if let Some(last) = phis.as_ref().and_then(|p| p.last()) {
                put(&mut metrics, "final_phi_mu", *last);
            }
            (name, log.violations.len(), phis.map(|p| digest(&p)))
        }
        Mode::Flow => {
            let start = a.flow_start.profile(game, seed);
            let log = run_flow(game, &start, &config.flow, potential)?;
            let name = PathBuf::from(format!("flow-seed-{seed}.jsonl"));
            let path = out_dir.join(&name);
            let mut w = create(&path)?;
            log.write_jsonl(&mut w).map_err(|e| CliError::io(&path, e))?;
            w.flush().map_err(|e| CliError::io(&path, e))?;
            put(&mut metrics, "initial_nash_gap", log.records[0].nash_gap);
            put(&mut metrics, "final_nash_gap", log.final_gap());
            put(&mut metrics, "median_nash_gap", median(log.gaps()));
            put(&mut metrics, "final_tau", log.records.last().map_or(0.0, |r| r.tau));
            put(&mut metrics, "max_speed", log.max_speed);
            for &delta in &config.flow.ne_thresholds {
                if let Some(t) = log.first_time_within(delta) {
                    put(&mut metrics, &format!("first_tau_within_{delta}"), t);
                }
            }
            let phis = log.phis();
            if let Some(last) = phis.as_ref().and_then(|p| p.last()) {
                put(&mut metrics, "final_phi_mu", *last);
            }
            (name, log.violations.len(), phis.map(|p| digest(&p)))
        }
        Mode::Kappa => {
            let phi = potential.cloned().unwrap_or_else(Potential::zero);
            let est = estimate_kappa(game, &phi, a.samples, seed)?;
            put(&mut metrics, "kappa_lower", est.kappa_lower);
            put(&mut metrics, "max_abs_difference", est.max_abs_difference);
            put(&mut metrics, "samples", est.num_samples as f64);
            put(&mut metrics, "alpha_lower", alpha_from_kappa(est.kappa_lower, game.num_states())?);
            if let Some(u) = est.certified_upper {
                put(&mut metrics, "certified_upper", u);
                put(&mut metrics, "alpha_upper", alpha_from_kappa(u, game.num_states())?);
            }
            let name = PathBuf::from(format!("kappa-seed-{seed}.json"));
            write_json(&out_dir.join(&name), &est)?;
            (name, 0, None)
        }
        Mode::Constants => {
            let c = theorem_constants(game, a.eta, a.lambda, a.samples, seed)?;
            put(&mut metrics, "d_lower", c.d_lower);
            put(&mut metrics, "d_lower_sampled", c.d_lower_sampled);
            if let Some(u) = c.d_upper {
                put(&mut metrics, "d_upper", u);
            }
            put(&mut metrics, "d", c.d);
            put(&mut metrics, "theta_cap", c.theta_cap);
            put(&mut metrics, "theta_max", c.theta_max);
            let name = PathBuf::from(format!("constants-seed-{seed}.json"));
            write_json(&out_dir.join(&name), &c)?;
            (name, 0, None)
        }
        Mode::Analyze => {
            let report = analyze(game, potential, a, seed)?;
            for (k, v) in &report {
                put(&mut metrics, k, *v);
            }
            let name = PathBuf::from(format!("analyze-seed-{seed}.json"));
            write_json(&out_dir.join(&name), &report)?;
            (name, 0, None)
        }
    };
    Ok(SeedSummary {
        seed,
        metrics,
        phi_digest,
        violations,
        log,
    })
}

fn analyze(
    game: &MarkovGame,
    potential: Option<&Potential>,
    a: &crate::config::AnalysisParams,
    seed: u64,
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    put(&mut out, "r_max", game.r_max());
    put(&mut out, "uniform_nash_gap", nash_gap(game, &uniform_policy(game))?.epsilon);
    let p = random_profile(&mut seeded_rng(seed), game);
    put(&mut out, "random_profile_nash_gap", nash_gap(game, &p)?.epsilon);
    if let Some(phi) = potential {
        put(&mut out, "lipschitz_estimate", estimate_lipschitz(game, phi, a.samples.max(1), 1e-3, seed)?);
    }
    match pure_equilibria(game, 1e-8, a.enumeration_limit as u128) {
        Ok(ne) => {
            put(&mut out, "pure_equilibria", ne.len() as f64);
            if !ne.is_empty() && !a.deltas.is_empty() {
                match PolicyGrid::simplex_mesh(game, a.mesh_spacing) {
                    Ok(grid) => {
                        let rep = gamma_of_delta(game, &a.deltas, &ne, &grid)?;
                        for e in &rep.entries {
                            put(&mut out, &format!("gamma_hat_{}", e.delta), e.gamma_hat);
                        }
                        put(&mut out, "d_star", rep.d_star);
                        put(&mut out, "grid_size", rep.grid_size as f64);
                    }
                    Err(nearpot_core::Error::TooLarge { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Err(nearpot_core::Error::TooLarge { .. }) => {}
        Err(e) => return Err(e.into()),
    }
    Ok(out)
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
