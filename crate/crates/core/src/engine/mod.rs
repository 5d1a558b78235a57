//! Simulation orchestration: calendar, scenario levers, the period loop,
//! seeded replications and calibration.

mod calendar;
pub mod calibrate;
pub mod results;
mod scenario;
mod sim;

pub use calendar::PhaseCalendar;
pub use calibrate::{calibrate, CalibrationResult, CalibrationTarget, SearchConfig};
pub use results::{EventRecord, ExperimentResult, ReplicationResult, TerminalRecord};
pub use scenario::{parse_course_caps, ConfigError, Scenario, SCHEMA_VERSION, T_EXP_RANGE};
pub use sim::{apply_policy, PolicyEffect, Simulation, World};
