//! JSON-config experiment driver behind the `bitflip` binary.
//!
//! A run is described by one JSON document (archivable and replayable);
//! the command line only selects the subcommand, the config path and an
//! optional output override. Every output document embeds the resolved
//! config and the crate version. CSV outputs use `#`-prefixed header
//! lines; the column schema is fixed per command.

use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::coupling;
use crate::distributions::{BitDistribution, DistSpec};
use crate::engine::{self, BitState, Model, SnapshotMethod};
use crate::error::{Error, Result};
use crate::estimators;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Active-probability convention used for the BF model throughout the
/// toolkit; echoed in `analyze` output.
pub const BF_ACTIVE_CONVENTION: &str = "(1 - exp(-2*p_k*t))/2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Snapshot,
    Analyze,
    Classify,
    Moments,
    Clt,
    CoupleAudit,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Snapshot => "snapshot",
            Command::Analyze => "analyze",
            Command::Classify => "classify",
            Command::Moments => "moments",
            Command::Clt => "clt",
            Command::CoupleAudit => "couple-audit",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        Some(match name {
            "simulate" => Command::Simulate,
            "snapshot" => Command::Snapshot,
            "analyze" => Command::Analyze,
            "classify" => Command::Classify,
            "moments" => Command::Moments,
            "clt" => Command::Clt,
            "couple-audit" => Command::CoupleAudit,
            _ => return None,
        })
    }
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One experiment. Unknown fields are rejected; fields that the selected
/// command does not consume are rejected too, so a config cannot silently
/// carry dead parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<DistSpec>,
    /// Master seed; required, so no run is silently nondeterministic.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<SnapshotMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_grid: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| Error::config("<config>", e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    /// Field-level validation beyond what serde enforces.
    pub fn validate(&self) -> Result<()> {
        use Command::*;
        let forbid = |name: &str, present: bool| -> Result<()> {
            if present {
                Err(Error::config(
                    name,
                    format!("field is not used by the `{}` command", self.command),
                ))
            } else {
                Ok(())
            }
        };
        let need = |name: &str, present: bool| -> Result<()> {
            if present {
                Ok(())
            } else {
                Err(Error::config(
                    name,
                    format!("field is required by the `{}` command", self.command),
                ))
            }
        };

        if let Some(spec) = &self.dist {
            spec.build_at("dist")?;
        }
        if let Some(replicas) = self.replicas {
            if replicas == 0 {
                return Err(Error::config("replicas", "must be >= 1"));
            }
        }
        if let Some(horizon) = self.horizon {
            if horizon == 0 {
                return Err(Error::config("horizon", "must be >= 1"));
            }
        }
        if let Some(t) = self.t {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::config("t", format!("must be positive, got {t}")));
            }
        }
        if let Some(t_max) = self.t_max {
            if !(t_max > 0.0) || !t_max.is_finite() {
                return Err(Error::config(
                    "t_max",
                    format!("must be positive, got {t_max}"),
                ));
            }
        }
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Error::config(
                    "tolerance",
                    format!("must lie in (0,1), got {tol}"),
                ));
            }
        }
        if let Some(rg) = &self.r_grid {
            for (i, &r) in rg.iter().enumerate() {
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::config(
                        format!("r_grid[{i}]"),
                        format!("must lie in (0,1), got {r}"),
                    ));
                }
            }
        }
        if let Some(pg) = &self.p_grid {
            for (i, &p) in pg.iter().enumerate() {
                if !(p > 0.0 && p < 0.5) {
                    return Err(Error::config(
                        format!("p_grid[{i}]"),
                        format!("must lie in (0, 0.5), got {p}"),
                    ));
                }
            }
        }

        match self.command {
            Simulate => {
                need("model", self.model.is_some())?;
                need("dist", self.dist.is_some())?;
                need("replicas", self.replicas.is_some())?;
                need("horizon", self.horizon.is_some())?;
                forbid("t", self.t.is_some())?;
                forbid("t_max", self.t_max.is_some())?;
                forbid("tolerance", self.tolerance.is_some())?;
                forbid("method", self.method.is_some())?;
                forbid("p_grid", self.p_grid.is_some())?;
            }
            Snapshot => {
                need("model", self.model.is_some())?;
                need("dist", self.dist.is_some())?;
                need("replicas", self.replicas.is_some())?;
                need("t", self.t.is_some())?;
                forbid("horizon", self.horizon.is_some())?;
                forbid("t_max", self.t_max.is_some())?;
                forbid("tolerance", self.tolerance.is_some())?;
                forbid("r_grid", self.r_grid.is_some())?;
                forbid("m_grid", self.m_grid.is_some())?;
                forbid("p_grid", self.p_grid.is_some())?;
            }
            Analyze => {
                need("model", self.model.is_some())?;
                need("dist", self.dist.is_some())?;
                need("t", self.t.is_some())?;
                forbid("replicas", self.replicas.is_some())?;
                forbid("horizon", self.horizon.is_some())?;
                forbid("method", self.method.is_some())?;
                forbid("r_grid", self.r_grid.is_some())?;
                forbid("m_grid", self.m_grid.is_some())?;
                forbid("p_grid", self.p_grid.is_some())?;
            }
            Classify => {
                need("dist", self.dist.is_some())?;
                forbid("model", self.model.is_some())?;
                forbid("replicas", self.replicas.is_some())?;
                forbid("horizon", self.horizon.is_some())?;
                forbid("t", self.t.is_some())?;
                forbid("t_max", self.t_max.is_some())?;
                forbid("tolerance", self.tolerance.is_some())?;
                forbid("method", self.method.is_some())?;
                forbid("r_grid", self.r_grid.is_some())?;
                forbid("m_grid", self.m_grid.is_some())?;
                forbid("p_grid", self.p_grid.is_some())?;
            }
            Moments => {
                forbid("model", self.model.is_some())?;
                forbid("dist", self.dist.is_some())?;
                forbid("replicas", self.replicas.is_some())?;
                forbid("horizon", self.horizon.is_some())?;
                forbid("t", self.t.is_some())?;
                forbid("t_max", self.t_max.is_some())?;
                forbid("tolerance", self.tolerance.is_some())?;
                forbid("method", self.method.is_some())?;
                forbid("r_grid", self.r_grid.is_some())?;
                forbid("m_grid", self.m_grid.is_some())?;
            }
            Clt => {
                need("model", self.model.is_some())?;
                need("dist", self.dist.is_some())?;
                need("t", self.t.is_some())?;
                need("replicas", self.replicas.is_some())?;
                forbid("horizon", self.horizon.is_some())?;
                forbid("t_max", self.t_max.is_some())?;
                forbid("tolerance", self.tolerance.is_some())?;
                forbid("method", self.method.is_some())?;
                forbid("r_grid", self.r_grid.is_some())?;
                forbid("m_grid", self.m_grid.is_some())?;
                forbid("p_grid", self.p_grid.is_some())?;
            }
            CoupleAudit => {
                need("dist", self.dist.is_some())?;
                need("replicas", self.replicas.is_some())?;
                need("horizon", self.horizon.is_some())?;
                forbid("model", self.model.is_some())?;
                forbid("t", self.t.is_some())?;
                forbid("t_max", self.t_max.is_some())?;
                forbid("tolerance", self.tolerance.is_some())?;
                forbid("method", self.method.is_some())?;
                forbid("r_grid", self.r_grid.is_some())?;
                forbid("m_grid", self.m_grid.is_some())?;
                forbid("p_grid", self.p_grid.is_some())?;
            }
        }
        Ok(())
    }

    /// Copy with defaults filled in, for output headers.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut c = self.clone();
        match self.command {
            Command::Analyze => {
                c.t_max = Some(self.t_max.unwrap_or(analytics::DEFAULT_T_MAX));
                c.tolerance = Some(self.tolerance.unwrap_or(1e-6));
            }
            Command::Snapshot => {
                c.method = Some(self.method.unwrap_or(SnapshotMethod::PoissonEmbed));
            }
            Command::Moments => {
                c.p_grid = Some(self.p_grid.clone().unwrap_or_else(default_p_grid));
            }
            _ => {}
        }
        c
    }

    fn built_dist(&self) -> Result<BitDistribution> {
        self.dist
            .as_ref()
            .ok_or_else(|| Error::config("dist", "missing distribution"))?
            .build_at("dist")
    }
}

fn default_p_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 * 0.05).collect()
}

/// Run the configured experiment, writing its single output document to
/// `output_override`, the config's `output` path, or stdout.
pub fn execute(config: &ExperimentConfig, output_override: Option<&str>) -> Result<()> {
    match output_override.or(config.output.as_deref()) {
        Some(path) => {
            let mut file = BufWriter::new(File::create(path)?);
            run_command(config, &mut file)?;
            file.flush()?;
            Ok(())
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            run_command(config, &mut lock)
        }
    }
}

/// Dispatch to the module behind each subcommand and write the output.
pub fn run_command(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    match config.command {
        Command::Simulate => cmd_simulate(config, out),
        Command::Snapshot => cmd_snapshot(config, out),
        Command::Analyze => cmd_analyze(config, out),
        Command::Classify => cmd_classify(config, out),
        Command::Moments => cmd_moments(config, out),
        Command::Clt => cmd_clt(config, out),
        Command::CoupleAudit => cmd_couple_audit(config, out),
    }
}

fn write_csv_preamble(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "# bitflip v{VERSION}")?;
    writeln!(
        out,
        "# config: {}",
        serde_json::to_string(&config.resolved())?
    )?;
    Ok(())
}

fn write_json_doc<T: Serialize>(
    config: &ExperimentConfig,
    result: &T,
    out: &mut dyn Write,
) -> Result<()> {
    let doc = serde_json::json!({
        "version": VERSION,
        "config": config.resolved(),
        "result": result,
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

fn cmd_simulate(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let dist = config.built_dist()?;
    let model = config.model.expect("validated");
    let replicas = config.replicas.expect("validated");
    let horizon = config.horizon.expect("validated");
    let blocks: Vec<u32> = match &config.m_grid {
        Some(ms) if !ms.is_empty() => ms.clone(),
        _ => vec![0],
    };

    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    let mut next_id = 0u64;
    for (i, &m) in blocks.iter().enumerate() {
        let stream_base = (i as u64) << 40;
        let seed = config.seed;
        let samples = engine::run_indexed(replicas, |rep| {
            let mut rng = engine::replica_rng(seed, stream_base | rep);
            let initial = if m == 0 {
                BitState::ground(model)
            } else {
                BitState::with_active(model, &[m]).expect("m >= 1")
            };
            engine::run_return_time(&dist, initial, horizon, &mut rng)
        });
        if let Some(rg) = &config.r_grid {
            let summary = estimators::return_stats(&samples, rg)?;
            summaries.push((m, summary));
        }
        for o in samples {
            let (tau, censored) = match o.tau {
                crate::engine::Tau::Returned(n) => (n, 0),
                crate::engine::Tau::Censored(h) => (h, 1),
            };
            rows.push((next_id, tau, censored, o.m0, o.peak_m));
            next_id += 1;
        }
    }

    write_csv_preamble(config, out)?;
    for (m, summary) in &summaries {
        writeln!(out, "# summary m={m}: {}", serde_json::to_string(summary)?)?;
    }
    writeln!(out, "replica_id,tau,censored,m0,peak_m")?;
    for (id, tau, censored, m0, peak) in rows {
        writeln!(out, "{id},{tau},{censored},{m0},{peak}")?;
    }
    Ok(())
}

fn cmd_snapshot(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let dist = config.built_dist()?;
    let model = config.model.expect("validated");
    let replicas = config.replicas.expect("validated");
    let t = config.t.expect("validated");
    let method = config.method.unwrap_or(SnapshotMethod::PoissonEmbed);
    let states = engine::run_replicas(replicas, config.seed, |_, rng| {
        engine::sample_snapshot(model, &dist, t, method, rng)
            .map(|s| (s.active_count(), s.damaged_count()))
    });
    write_csv_preamble(config, out)?;
    writeln!(out, "replica_id,n_active,n_damaged")?;
    for (id, state) in states.into_iter().enumerate() {
        let (active, damaged) = state?;
        writeln!(out, "{id},{active},{damaged}")?;
    }
    Ok(())
}

fn cmd_analyze(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let dist = config.built_dist()?;
    let model = config.model.expect("validated");
    let t = config.t.expect("validated");
    let t_max = config.t_max.unwrap_or(analytics::DEFAULT_T_MAX);
    let tol = config.tolerance.unwrap_or(1e-6);
    let expected = analytics::expected_active(&dist, model, t)?;
    let variance = analytics::variance_active(&dist, model, t)?;
    let occupancy = match model {
        Model::Bf => analytics::ground_occupancy_bf(&dist, t_max, tol)?,
        Model::Db => analytics::ground_occupancy_db(&dist, t_max, tol)?,
    };
    let result = serde_json::json!({
        "expected_active": expected,
        "variance_active": variance,
        "ground_occupancy": occupancy,
        "conventions": { "bf_active_probability": BF_ACTIVE_CONVENTION },
    });
    write_json_doc(config, &result, out)
}

fn cmd_classify(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let dist = config.built_dist()?;
    let result = serde_json::json!({
        "bf": dist.classify_bf(),
        "db": dist.classify_db(),
    });
    write_json_doc(config, &result, out)
}

fn cmd_moments(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let grid = config.p_grid.clone().unwrap_or_else(default_p_grid);
    write_csv_preamble(config, out)?;
    writeln!(out, "p,r_lower,r_upper")?;
    for p in grid {
        let mb = analytics::moment_bounds(p)?;
        writeln!(out, "{},{},{}", mb.p, mb.r_lower, mb.r_upper)?;
    }
    Ok(())
}

fn cmd_clt(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let dist = config.built_dist()?;
    let model = config.model.expect("validated");
    let t = config.t.expect("validated");
    let replicas = config.replicas.expect("validated");
    let summary = estimators::clt_check(&dist, model, t, replicas, config.seed)?;
    write_json_doc(config, &summary, out)
}

fn cmd_couple_audit(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let dist = config.built_dist()?;
    let runs = config.replicas.expect("validated");
    let steps = config.horizon.expect("validated");
    let domination = coupling::run_domination_audit(&dist, runs, steps, config.seed);
    let tau_order =
        coupling::run_pair_order_audit(&dist, runs, steps, config.seed.wrapping_add(0x9E37_79B9));
    let result = serde_json::json!({
        "domination": domination,
        "tau_order": tau_order,
    });
    write_json_doc(config, &result, out)
}
