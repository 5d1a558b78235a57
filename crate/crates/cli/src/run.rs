//! `run`: execute replications and write a self-describing results directory.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use regtrap_core::engine::results::{write_events, write_records, Row};
use regtrap_core::engine::SCHEMA_VERSION;
use regtrap_core::population::load_archetypes;
use regtrap_core::{reference, Curriculum, Scenario, Simulation};

use crate::error::{self, CliError};
use crate::manifest::{self, Replication, RunManifest};

pub const SCENARIO_FILE: &str = "inputs/scenario.toml";
pub const CURRICULUM_FILE: &str = "inputs/curriculum.csv";
pub const ARCHETYPES_FILE: &str = "inputs/archetypes.csv";
pub const INPUT_FILES: [&str; 3] = [SCENARIO_FILE, CURRICULUM_FILE, ARCHETYPES_FILE];
pub const RECORDS_FILE: &str = "terminal_records.csv";
pub const RECORDS_JSON_FILE: &str = "terminal_records.json";

pub struct RunArgs {
    pub scenario: Option<PathBuf>,
    pub curriculum: Option<PathBuf>,
    pub archetypes: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub jobs: usize,
    pub events: bool,
    pub json: bool,
}

/// Input text and a label naming where it came from.
pub struct Source {
    pub label: String,
    pub text: String,
}

pub fn source(path: Option<&Path>, builtin_label: &str, builtin: impl FnOnce() -> String) -> Result<Source, CliError> {
    match path {
        Some(p) => Ok(Source {
            label: p.display().to_string(),
            text: error::read_to_string(p)?,
        }),
        None => Ok(Source {
            label: builtin_label.to_string(),
            text: builtin(),
        }),
    }
}

pub struct Inputs {
    pub scenario: Source,
    pub curriculum: Source,
    pub archetypes: Source,
}

impl Inputs {
    pub fn load(
        scenario: Option<&Path>,
        curriculum: Option<&Path>,
        archetypes: Option<&Path>,
    ) -> Result<Self, CliError> {
        Ok(Inputs {
            scenario: source(scenario, "<default scenario>", || Scenario::default().to_toml())?,
            curriculum: source(curriculum, "<reference curriculum>", || {
                reference::CURRICULUM_CSV.to_string()
            })?,
            archetypes: source(archetypes, "<reference archetypes>", || {
                reference::ARCHETYPES_CSV.to_string()
            })?,
        })
    }

    pub fn simulation(&self) -> Result<Simulation, CliError> {
        let scenario =
            Scenario::from_toml(&self.scenario.text).map_err(|e| CliError::config(&self.scenario.label, e))?;
        let curriculum = Curriculum::from_reader(self.curriculum.text.as_bytes())
            .map_err(|e| CliError::config(&self.curriculum.label, e))?;
        let archetypes = load_archetypes(self.archetypes.text.as_bytes())
            .map_err(|e| CliError::config(&self.archetypes.label, e))?;
        // Cross-file checks are reported against the scenario.
        Simulation::new(curriculum, archetypes, scenario).map_err(|e| CliError::config(&self.scenario.label, e))
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn replication_path(seed: u64) -> String {
    format!("replications/rep_{seed}.csv")
}

fn csv_bytes(
    f: impl FnOnce(&mut Vec<u8>) -> Result<(), regtrap_core::engine::results::ResultsError>,
    path: &Path,
) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::io(path, std::io::Error::other(e.to_string())))?;
    Ok(buf)
}

pub fn cmd_run(args: &RunArgs) -> Result<RunManifest, CliError> {
    let started_unix = unix_now();
    let inputs = Inputs::load(
        args.scenario.as_deref(),
        args.curriculum.as_deref(),
        args.archetypes.as_deref(),
    )?;
    let sim = inputs.simulation()?;
    if args.seeds.is_empty() {
        return Err(CliError::config("--seeds", "no seeds given"));
    }
    let out = &args.out;
    error::create_dir(out)?;

    let experiment = sim.run_experiment(&args.seeds, args.jobs, args.events);
    let mut written: Vec<String> = Vec::new();
    let mut put = |rel: String, bytes: Vec<u8>| -> Result<(), CliError> {
        error::write(&out.join(&rel), bytes)?;
        written.push(rel);
        Ok(())
    };

    put(SCENARIO_FILE.into(), inputs.scenario.text.clone().into_bytes())?;
    put(CURRICULUM_FILE.into(), inputs.curriculum.text.clone().into_bytes())?;
    put(ARCHETYPES_FILE.into(), inputs.archetypes.text.clone().into_bytes())?;

    let mut replications = Vec::new();
    for rep in &experiment.replications {
        let rel = replication_path(rep.seed);
        let bytes = csv_bytes(|b| write_records(b, &rep.records), &out.join(&rel))?;
        put(rel.clone(), bytes)?;
        replications.push(Replication {
            seed: rep.seed,
            path: rel,
        });
        if let Some(events) = &rep.events {
            let rel = format!("events/events_{}.csv", rep.seed);
            let bytes = csv_bytes(|b| write_events(b, events), &out.join(&rel))?;
            put(rel, bytes)?;
        }
    }
    let records: Vec<_> = experiment.records().cloned().collect();
    let bytes = csv_bytes(|b| write_records(b, &records), &out.join(RECORDS_FILE))?;
    put(RECORDS_FILE.into(), bytes)?;
    if args.json {
        let rows: Vec<Row> = records.iter().map(Row::from).collect();
        let text = serde_json::to_string_pretty(&rows).expect("rows serialize");
        put(RECORDS_JSON_FILE.into(), (text + "\n").into_bytes())?;
    }

    let files = written
        .iter()
        .map(|rel| manifest::entry(out, rel))
        .collect::<Result<Vec<_>, _>>()?;
    let digest = |rel: &str| {
        files
            .iter()
            .find(|f| f.path == rel)
            .expect("input written")
            .sha256
            .clone()
    };
    let (scenario_hash, curriculum_hash, archetypes_hash) =
        (digest(SCENARIO_FILE), digest(CURRICULUM_FILE), digest(ARCHETYPES_FILE));
    let seeds = experiment.seeds();
    let m = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        schema_version: SCHEMA_VERSION,
        config_hash: manifest::config_hash(&scenario_hash, &curriculum_hash, &archetypes_hash, &seeds),
        scenario_hash,
        curriculum_hash,
        archetypes_hash,
        seeds,
        n_agents: sim.scenario().n_agents,
        started_unix,
        finished_unix: unix_now(),
        replications,
        files,
    };
    m.write(out)?;
    Ok(m)
}
