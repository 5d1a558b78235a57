//! `analyze`: verify a results directory and emit the summary tables.

use std::path::Path;

use regtrap_core::analytics::{export, Accumulator};
use regtrap_core::engine::results::read_records;
use regtrap_core::engine::TerminalRecord;
use regtrap_core::Scenario;

use crate::error::{self, CliError};
use crate::manifest::RunManifest;
use crate::run::SCENARIO_FILE;

pub const ALPHA: f64 = 0.05;

pub struct LoadedRun {
    pub manifest: RunManifest,
    pub scenario: Scenario,
    /// Per replication, in manifest order.
    pub replications: Vec<(u64, Vec<TerminalRecord>)>,
}

/// Loads a results directory after checking the manifest against its files.
pub fn load_run(dir: &Path) -> Result<LoadedRun, CliError> {
    let manifest = RunManifest::load(dir)?;
    manifest.verify(dir)?;
    let scenario_path = dir.join(SCENARIO_FILE);
    let scenario = Scenario::from_toml(&error::read_to_string(&scenario_path)?)
        .map_err(|e| CliError::config(scenario_path.display().to_string(), e))?;
    let mut replications = Vec::with_capacity(manifest.replications.len());
    for rep in &manifest.replications {
        let path = dir.join(&rep.path);
        let file = std::fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
        let records = read_records(file).map_err(|e| CliError::Manifest(format!("{}: {e}", rep.path)))?;
        if records.iter().any(|r| r.seed != rep.seed) {
            return Err(CliError::Manifest(format!(
                "{} holds records of another seed",
                rep.path
            )));
        }
        replications.push((rep.seed, records));
    }
    Ok(LoadedRun {
        manifest,
        scenario,
        replications,
    })
}

pub const OUTPUT_FILES: [&str; 7] = [
    "table3.csv",
    "table4.csv",
    "survival.csv",
    "expiry_hist.csv",
    "expiry_by_archetype.csv",
    "psych_heatmap.csv",
    "stats_tests.csv",
];

pub fn cmd_analyze(dir: &Path, out: &Path) -> Result<(), CliError> {
    let run = load_run(dir)?;
    let mut acc = Accumulator::default();
    acc.set_horizon(run.scenario.horizon);
    for (_, records) in &run.replications {
        for r in records {
            acc.add(r);
        }
    }
    let seed = run.scenario.analytics_seed;
    let tables = acc
        .finish(seed, run.scenario.bootstrap_draws)
        .map_err(|e| CliError::Manifest(format!("cannot summarise {}: {e}", dir.display())))?;
    let tests = acc.tests(ALPHA);

    error::create_dir(out)?;
    let emit = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> csv::Result<()>| -> Result<(), CliError> {
        let path = out.join(name);
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| CliError::io(&path, std::io::Error::other(e.to_string())))?;
        error::write(&path, buf)
    };
    emit(OUTPUT_FILES[0], &|b| export::write_table3(b, &tables, seed))?;
    emit(OUTPUT_FILES[1], &|b| export::write_table4(b, &tables))?;
    emit(OUTPUT_FILES[2], &|b| export::write_survival(b, &tables))?;
    emit(OUTPUT_FILES[3], &|b| export::write_expiry_hist(b, &tables))?;
    emit(OUTPUT_FILES[4], &|b| export::write_expiry_by_archetype(b, &tables))?;
    emit(OUTPUT_FILES[5], &|b| export::write_psych_heatmap(b, &tables))?;
    emit(OUTPUT_FILES[6], &|b| export::write_tests(b, &tests))?;
    Ok(())
}
