//! Agent-based simulation of student dropout under a course-regularity regime
//! with expiring exam eligibility.

pub mod analytics;
pub mod behavior;
pub mod curriculum;
pub mod dynamics;
pub mod engine;
pub mod population;
pub mod reference;
pub mod regime;

pub use curriculum::{Curriculum, CurriculumError};
pub use engine::{ConfigError, ExperimentResult, Scenario, Simulation};
pub use population::{Archetype, PopulationError};
