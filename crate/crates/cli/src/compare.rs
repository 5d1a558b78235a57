//! `compare`: paired per-seed differences of each results directory against
//! the first one, with bootstrap intervals over seeds.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use regtrap_core::analytics::{bootstrap_ci, export::num};
use regtrap_core::engine::TerminalRecord;
use regtrap_core::population::{DropoutCause, Outcome};

use crate::analyze::{load_run, LoadedRun};
use crate::error::{self, CliError};

pub const COMPARISON_FILE: &str = "comparison.csv";
pub const CI_LEVEL: f64 = 0.95;
pub const COLUMNS: [&str; 10] = [
    "scenario",
    "metric",
    "archetype",
    "paired_seeds",
    "baseline",
    "value",
    "delta",
    "delta_ci_lo",
    "delta_ci_hi",
    "config_hash",
];

/// Metric name and archetype (empty for global metrics) -> per-seed value.
type SeedMetrics = BTreeMap<(String, String), BTreeMap<u64, f64>>;

fn metrics(run: &LoadedRun) -> SeedMetrics {
    let mut m = SeedMetrics::new();
    let mut put = |metric: &str, arch: &str, seed: u64, v: f64| {
        m.entry((metric.to_string(), arch.to_string()))
            .or_default()
            .insert(seed, v);
    };
    for (seed, records) in &run.replications {
        let dropouts: Vec<&TerminalRecord> = records.iter().filter(|r| r.is_dropout()).collect();
        put("dropout_rate", "", *seed, dropouts.len() as f64 / records.len() as f64);
        if !dropouts.is_empty() {
            let normative = dropouts
                .iter()
                .filter(|r| r.outcome == Outcome::Dropout(DropoutCause::Normative))
                .count();
            put("normative_share", "", *seed, normative as f64 / dropouts.len() as f64);
        }
        let mut by_arch: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for r in records {
            let e = by_arch.entry(&r.archetype).or_default();
            e.0 += 1;
            e.1 += usize::from(r.is_dropout());
        }
        for (arch, (n, d)) in by_arch {
            put("dropout_rate", arch, *seed, d as f64 / n as f64);
        }
    }
    m
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn cmd_compare(dirs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    if dirs.len() < 2 {
        return Err(CliError::Incompatible("need at least two results directories".into()));
    }
    let runs = dirs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>, _>>()?;
    let base = &runs[0];
    for (dir, run) in dirs.iter().zip(&runs).skip(1) {
        let (a, b) = (&base.manifest, &run.manifest);
        let mismatch = if a.curriculum_hash != b.curriculum_hash {
            Some("curriculum")
        } else if a.archetypes_hash != b.archetypes_hash {
            Some("archetypes")
        } else if a.n_agents != b.n_agents {
            Some("n_agents")
        } else {
            None
        };
        if let Some(what) = mismatch {
            return Err(CliError::Incompatible(format!(
                "{} differs between {} and {}",
                what,
                dirs[0].display(),
                dir.display()
            )));
        }
    }
    let shared: BTreeSet<u64> = runs
        .iter()
        .map(|r| r.manifest.seeds.iter().copied().collect::<BTreeSet<_>>())
        .reduce(|a, b| &a & &b)
        .unwrap_or_default();
    if shared.is_empty() {
        return Err(CliError::Incompatible("no seeds in common".into()));
    }

    let analytics_seed = base.scenario.analytics_seed;
    let draws = base.scenario.bootstrap_draws;
    let base_metrics = metrics(base);
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::io(&out.join(COMPARISON_FILE), std::io::Error::other(e.to_string()));
    w.write_record(COLUMNS).map_err(io)?;
    for (dir, run) in dirs.iter().zip(&runs) {
        let other = metrics(run);
        for (key, base_values) in &base_metrics {
            let values = other.get(key);
            let seeds: Vec<u64> = shared
                .iter()
                .copied()
                .filter(|s| base_values.contains_key(s) && values.is_some_and(|v| v.contains_key(s)))
                .collect();
            let (b, v, deltas): (Vec<f64>, Vec<f64>, Vec<f64>) = if let Some(values) = values {
                let b: Vec<f64> = seeds.iter().map(|s| base_values[s]).collect();
                let v: Vec<f64> = seeds.iter().map(|s| values[s]).collect();
                let d = b.iter().zip(&v).map(|(b, v)| v - b).collect();
                (b, v, d)
            } else {
                Default::default()
            };
            let ci = bootstrap_ci(&deltas, draws, CI_LEVEL, analytics_seed).ok();
            let stat = |x: &[f64]| if x.is_empty() { "NA".to_string() } else { num(mean(x)) };
            w.write_record([
                dir.display().to_string(),
                key.0.clone(),
                key.1.clone(),
                seeds.len().to_string(),
                stat(&b),
                stat(&v),
                stat(&deltas),
                ci.map_or("NA".into(), |c| num(c.0)),
                ci.map_or("NA".into(), |c| num(c.1)),
                run.manifest.config_hash.clone(),
            ])
            .map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| io(e.into_error().into()))?;
    error::write(&out.join(COMPARISON_FILE), bytes)
}
