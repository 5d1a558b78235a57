//! `calibrate`: fit archetype parameters to dropout and expiry targets and
//! write the fitted archetype table.

use std::path::PathBuf;

use regtrap_core::engine::calibrate::load_targets;
use regtrap_core::engine::{calibrate, SearchConfig};
use regtrap_core::population::{Archetype, ARCHETYPE_COLUMNS};
use regtrap_core::reference;

use crate::error::{self, CliError};
use crate::run::{source, Inputs};

pub struct CalibrateArgs {
    pub scenario: Option<PathBuf>,
    pub curriculum: Option<PathBuf>,
    pub archetypes: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub max_evaluations: usize,
    pub jobs: usize,
    pub out: PathBuf,
}

pub fn archetypes_csv(list: &[Archetype]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ARCHETYPE_COLUMNS).expect("in-memory write");
    for a in list {
        w.write_record([
            a.id.clone(),
            a.planning_horizon.to_string(),
            a.base_ability.to_string(),
            a.initial_belonging.to_string(),
            a.stress_reactivity.to_string(),
            a.effort_capacity.to_string(),
            a.max_final_backlog.to_string(),
            a.population_weight.to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let inputs = Inputs::load(
        args.scenario.as_deref(),
        args.curriculum.as_deref(),
        args.archetypes.as_deref(),
    )?;
    let sim = inputs.simulation()?;
    let targets_src = source(args.targets.as_deref(), "<reference targets>", || {
        reference::TARGETS_CSV.to_string()
    })?;
    let targets = load_targets(targets_src.text.as_bytes()).map_err(|e| CliError::config(&targets_src.label, e))?;
    let search = SearchConfig {
        seeds: args.seeds.clone(),
        max_evaluations: args.max_evaluations,
        jobs: args.jobs,
        ..SearchConfig::default()
    };
    let result = calibrate(&sim, &targets, &search).map_err(|e| CliError::config(&targets_src.label, e))?;
    error::write(&args.out, archetypes_csv(&result.archetypes))?;
    eprintln!(
        "objective {} -> {} after {} evaluations",
        result.initial_objective, result.objective, result.evaluations
    );
    if result.budget_exhausted {
        eprintln!("warning: evaluation budget exhausted before the search converged");
    }
    Ok(())
}
