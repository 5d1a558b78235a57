//! Reference inputs shipped with the crate.

use crate::curriculum::{Curriculum, CurriculumError};
use crate::engine::calibrate::{load_targets, CalibrationTarget};
use crate::engine::{ConfigError, Scenario, Simulation};
use crate::population::{load_archetypes, Archetype, PopulationError};

pub const CURRICULUM_CSV: &str = include_str!("../data/reference_curriculum.csv");
pub const ARCHETYPES_CSV: &str = include_str!("../data/reference_archetypes.csv");
pub const TARGETS_CSV: &str = include_str!("../data/targets.csv");
pub const MICRO_CURRICULUM_CSV: &str = include_str!("../data/micro_curriculum.csv");

pub fn curriculum() -> Result<Curriculum, CurriculumError> {
    Curriculum::from_reader(CURRICULUM_CSV.as_bytes())
}

pub fn micro_curriculum() -> Result<Curriculum, CurriculumError> {
    Curriculum::from_reader(MICRO_CURRICULUM_CSV.as_bytes())
}

pub fn archetypes() -> Result<Vec<Archetype>, PopulationError> {
    load_archetypes(ARCHETYPES_CSV.as_bytes())
}

pub fn targets() -> Result<Vec<CalibrationTarget>, ConfigError> {
    load_targets(TARGETS_CSV.as_bytes())
}

/// Reference curriculum and archetypes under `scenario`.
pub fn simulation(scenario: Scenario) -> Result<Simulation, ConfigError> {
    Simulation::new(curriculum()?, archetypes()?, scenario)
}
