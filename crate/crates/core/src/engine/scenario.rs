//! Scenario file: a flat, versioned TOML table of run levers and model
//! parameter overrides.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::UtilityWeights;
use crate::curriculum::{Curriculum, CurriculumError};
use crate::dynamics::DynamicsParams;
use crate::engine::PhaseCalendar;
use crate::population::PopulationError;

pub const SCHEMA_VERSION: u32 = 1;
pub const T_EXP_RANGE: (u32, u32) = (1, 4);

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {value}")]
    Invalid { key: String, value: String },
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error(transparent)]
    Population(#[from] PopulationError),
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, value: impl ToString) -> Self {
        Self::Invalid {
            key: key.into(),
            value: value.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub n_agents: usize,
    pub horizon: u32,
    pub phases_per_semester: u32,
    pub exam_window_pattern: Vec<bool>,
    pub t_exp: u32,
    pub exam_slots: u32,
    pub bridging_support: bool,
    pub flexible_scheduling: bool,
    pub exogenous_hazard: f64,

    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub epsilon: f64,
    pub noise_sd: f64,

    pub sigma_abil: f64,
    pub beta_stress: f64,
    pub fatigue_factor: f64,
    pub gamma_decay: f64,
    #[serde(rename = "delta_B_fail")]
    pub delta_b_fail: f64,
    #[serde(rename = "delta_B_expiry")]
    pub delta_b_expiry: f64,
    pub expiry_stress_multiplier: f64,
    pub success_stress_relief: f64,
    pub sigma_exam: f64,
    pub belonging_floor: f64,
    pub stress_ceiling: f64,
    pub stagnation_periods: u32,
    pub withdrawal_betas: [f64; 5],
    pub normative_expiry_threshold: u32,
    pub academic_failure_threshold: u32,
    pub academic_course_threshold: u32,
    pub reference_stress: f64,

    /// Ability of the reference student behind the course thresholds; the
    /// population mean ability when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_ability: Option<f64>,
    /// Seat caps as `course_id:seats;course_id:seats`. Empty means uncapped.
    pub course_caps: String,

    pub analytics_seed: u64,
    pub bootstrap_draws: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        let cal = PhaseCalendar::default();
        let w = UtilityWeights::default();
        let d = DynamicsParams::default();
        Self {
            schema_version: SCHEMA_VERSION,
            n_agents: 1343,
            horizon: cal.horizon,
            phases_per_semester: cal.phases_per_semester,
            exam_window_pattern: cal.exam_window_pattern,
            t_exp: 2,
            exam_slots: 2,
            bridging_support: false,
            flexible_scheduling: false,
            exogenous_hazard: 0.0,
            w1: w.w1,
            w2: w.w2,
            w3: w.w3,
            epsilon: w.epsilon,
            noise_sd: w.noise_sd,
            sigma_abil: d.sigma_abil,
            beta_stress: d.beta_stress,
            fatigue_factor: d.fatigue_factor,
            gamma_decay: d.gamma_decay,
            delta_b_fail: d.delta_b_fail,
            delta_b_expiry: d.delta_b_expiry,
            expiry_stress_multiplier: d.expiry_stress_multiplier,
            success_stress_relief: d.success_stress_relief,
            sigma_exam: d.sigma_exam,
            belonging_floor: d.belonging_floor,
            stress_ceiling: d.stress_ceiling,
            stagnation_periods: d.stagnation_periods,
            withdrawal_betas: d.withdrawal_betas,
            normative_expiry_threshold: d.normative_expiry_threshold,
            academic_failure_threshold: d.academic_failure_threshold,
            academic_course_threshold: d.academic_course_threshold,
            reference_stress: d.reference_stress,
            reference_ability: None,
            course_caps: String::new(),
            analytics_seed: 20_240_601,
            bootstrap_draws: 10_000,
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn calendar(&self) -> PhaseCalendar {
        PhaseCalendar {
            phases_per_semester: self.phases_per_semester,
            exam_window_pattern: self.exam_window_pattern.clone(),
            horizon: self.horizon,
        }
    }

    pub fn weights(&self) -> UtilityWeights {
        UtilityWeights {
            w1: self.w1,
            w2: self.w2,
            w3: self.w3,
            epsilon: self.epsilon,
            noise_sd: self.noise_sd,
        }
    }

    pub fn dynamics(&self) -> DynamicsParams {
        DynamicsParams {
            sigma_abil: self.sigma_abil,
            beta_stress: self.beta_stress,
            fatigue_factor: self.fatigue_factor,
            gamma_decay: self.gamma_decay,
            delta_b_fail: self.delta_b_fail,
            delta_b_expiry: self.delta_b_expiry,
            expiry_stress_multiplier: self.expiry_stress_multiplier,
            success_stress_relief: self.success_stress_relief,
            sigma_exam: self.sigma_exam,
            belonging_floor: self.belonging_floor,
            stress_ceiling: self.stress_ceiling,
            stagnation_periods: self.stagnation_periods,
            withdrawal_betas: self.withdrawal_betas,
            normative_expiry_threshold: self.normative_expiry_threshold,
            academic_failure_threshold: self.academic_failure_threshold,
            academic_course_threshold: self.academic_course_threshold,
            reference_stress: self.reference_stress,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion(self.schema_version));
        }
        if self.n_agents == 0 {
            return Err(ConfigError::invalid("n_agents", 0));
        }
        if !(T_EXP_RANGE.0..=T_EXP_RANGE.1).contains(&self.t_exp) {
            return Err(ConfigError::invalid("t_exp", self.t_exp));
        }
        if self.exam_slots == 0 {
            return Err(ConfigError::invalid("exam_slots", 0));
        }
        if !(0.0..=1.0).contains(&self.exogenous_hazard) {
            return Err(ConfigError::invalid("exogenous_hazard", self.exogenous_hazard));
        }
        if let Some(r) = self.reference_ability {
            if !(r > 0.0 && r <= 1.0) {
                return Err(ConfigError::invalid("reference_ability", r));
            }
        }
        if self.bootstrap_draws == 0 {
            return Err(ConfigError::invalid("bootstrap_draws", 0));
        }
        self.calendar()
            .validate()
            .map_err(|(k, v)| ConfigError::invalid(k, v))?;
        self.weights().validate().map_err(|(k, v)| ConfigError::invalid(k, v))?;
        self.dynamics()
            .validate()
            .map_err(|(k, v)| ConfigError::invalid(k, v))?;
        parse_course_caps(&self.course_caps)?;
        Ok(())
    }

    /// Seat caps resolved against a curriculum, indexed by course.
    pub fn caps_for(&self, curriculum: &Curriculum) -> Result<Vec<Option<u32>>, ConfigError> {
        let mut caps = vec![None; curriculum.len()];
        for (id, seats) in parse_course_caps(&self.course_caps)? {
            let idx = curriculum
                .index_of(&id)
                .map_err(|_| ConfigError::invalid("course_caps", format!("unknown course `{id}`")))?;
            caps[idx] = Some(seats);
        }
        Ok(caps)
    }
}

pub fn parse_course_caps(spec: &str) -> Result<BTreeMap<String, u32>, ConfigError> {
    let mut caps = BTreeMap::new();
    for item in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || ConfigError::invalid("course_caps", item);
        let (id, n) = item.split_once(':').ok_or_else(bad)?;
        let n: u32 = n.trim().parse().map_err(|_| bad())?;
        if n == 0 || caps.insert(id.trim().to_string(), n).is_some() {
            return Err(bad());
        }
    }
    Ok(caps)
}
