//! Archetypes, population instantiation and per-agent mutable state.

use std::fmt;
use std::io::Read;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;
use thiserror::Error;

use crate::curriculum::CourseIdx;
use crate::regime::{CourseState, CourseStatus};

pub const TAU_MAX: u8 = 2;
pub const ABILITY_RANGE: (f64, f64) = (0.3, 0.8);
pub const BELONGING_RANGE: (f64, f64) = (0.4, 0.9);
pub const STRESS_REACTIVITY_RANGE: (f64, f64) = (0.05, 0.15);
pub const CAPACITY_RANGE: (f64, f64) = (8.0, 14.0);
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PopulationError {
    #[error("archetype `{archetype}`: {field} = {value} is out of range")]
    ParameterOutOfRange {
        archetype: String,
        field: &'static str,
        value: String,
    },
    #[error("archetype weights sum to {0}, expected 1")]
    WeightsDoNotSumToOne(f64),
    #[error("no archetypes given")]
    Empty,
    #[error("duplicate archetype id `{0}`")]
    DuplicateId(String),
    #[error("malformed archetype table: {0}")]
    Malformed(String),
}

/// Planning-horizon class as labelled in the archetype table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanningClass {
    Myopic,
    Moderate,
    Strategic,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Archetype {
    pub id: String,
    #[serde(rename = "tau")]
    pub planning_horizon: u8,
    #[serde(rename = "mu_abil")]
    pub base_ability: f64,
    #[serde(rename = "b0")]
    pub initial_belonging: f64,
    #[serde(rename = "sigma_stress")]
    pub stress_reactivity: f64,
    #[serde(rename = "e_max")]
    pub effort_capacity: f64,
    pub max_final_backlog: u32,
    #[serde(rename = "weight")]
    pub population_weight: f64,
}

impl Archetype {
    pub fn class(&self) -> PlanningClass {
        match self.planning_horizon {
            0 => PlanningClass::Myopic,
            1 => PlanningClass::Moderate,
            _ => PlanningClass::Strategic,
        }
    }

    pub fn is_myopic(&self) -> bool {
        self.planning_horizon == 0
    }

    pub fn validate(&self) -> Result<(), PopulationError> {
        let out = |field: &'static str, value: String| PopulationError::ParameterOutOfRange {
            archetype: self.id.clone(),
            field,
            value,
        };
        let in_range = |v: f64, (lo, hi): (f64, f64)| v.is_finite() && v >= lo && v <= hi;
        if self.planning_horizon > TAU_MAX {
            return Err(out("tau", self.planning_horizon.to_string()));
        }
        if !in_range(self.base_ability, ABILITY_RANGE) {
            return Err(out("mu_abil", self.base_ability.to_string()));
        }
        if !in_range(self.initial_belonging, BELONGING_RANGE) {
            return Err(out("b0", self.initial_belonging.to_string()));
        }
        if !in_range(self.stress_reactivity, STRESS_REACTIVITY_RANGE) {
            return Err(out("sigma_stress", self.stress_reactivity.to_string()));
        }
        if !in_range(self.effort_capacity, CAPACITY_RANGE) {
            return Err(out("e_max", self.effort_capacity.to_string()));
        }
        if self.max_final_backlog == 0 {
            return Err(out("max_final_backlog", "0".into()));
        }
        if !(self.population_weight > 0.0 && self.population_weight <= 1.0) {
            return Err(out("weight", self.population_weight.to_string()));
        }
        Ok(())
    }
}

pub const ARCHETYPE_COLUMNS: [&str; 8] = [
    "id",
    "tau",
    "mu_abil",
    "b0",
    "sigma_stress",
    "e_max",
    "max_final_backlog",
    "weight",
];

/// Validates a list of archetypes. Weights must sum to 1 within tolerance and
/// are kept as given; consumers normalise by the total.
pub fn validate_archetypes(list: Vec<Archetype>) -> Result<Vec<Archetype>, PopulationError> {
    if list.is_empty() {
        return Err(PopulationError::Empty);
    }
    for (i, a) in list.iter().enumerate() {
        a.validate()?;
        if list[..i].iter().any(|b| b.id == a.id) {
            return Err(PopulationError::DuplicateId(a.id.clone()));
        }
    }
    let total: f64 = list.iter().map(|a| a.population_weight).sum();
    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(PopulationError::WeightsDoNotSumToOne(total));
    }
    Ok(list)
}

/// Parses the archetype table (comment lines start with `#`). Row order is kept.
pub fn load_archetypes<R: Read>(reader: R) -> Result<Vec<Archetype>, PopulationError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| PopulationError::Malformed(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ARCHETYPE_COLUMNS {
        return Err(PopulationError::Malformed(format!(
            "expected columns {}, found {}",
            ARCHETYPE_COLUMNS.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut list = Vec::new();
    for row in rdr.deserialize::<Archetype>() {
        list.push(row.map_err(|e| PopulationError::Malformed(e.to_string()))?);
    }
    validate_archetypes(list)
}

/// Weighted mean of the archetypes' base abilities.
pub fn population_mean_ability(archetypes: &[Archetype]) -> f64 {
    let total: f64 = archetypes.iter().map(|a| a.population_weight).sum();
    archetypes
        .iter()
        .map(|a| a.population_weight * a.base_ability)
        .sum::<f64>()
        / total
}

/// Largest-remainder apportionment of `n` agents over the archetype weights.
/// Leftover seats go by descending fractional part, then by archetype order.
pub fn apportion(archetypes: &[Archetype], n: usize) -> Vec<usize> {
    let total: f64 = archetypes.iter().map(|a| a.population_weight).sum();
    let quotas: Vec<f64> = archetypes
        .iter()
        .map(|a| a.population_weight / total * n as f64)
        .collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..archetypes.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WithdrawalTrigger {
    Depletion,
    Stagnation,
    Voluntary,
    Exogenous,
}

impl WithdrawalTrigger {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Depletion => "depletion",
            Self::Stagnation => "stagnation",
            Self::Voluntary => "voluntary",
            Self::Exogenous => "exogenous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropoutCause {
    Normative,
    Academic,
    Other,
}

impl DropoutCause {
    pub const ALL: [DropoutCause; 3] = [Self::Normative, Self::Academic, Self::Other];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Normative => "normative",
            Self::Academic => "academic",
            Self::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Active,
    Graduated,
    Dropout(DropoutCause),
}

impl Outcome {
    pub fn is_active(&self) -> bool {
        matches!(self, Outcome::Active)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Active => "active",
            Outcome::Graduated => "graduated",
            Outcome::Dropout(_) => "dropout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Enrolled(CourseIdx),
    Regularized(CourseIdx),
    ExamPassed(CourseIdx),
    ExamFailed(CourseIdx),
    Expired(CourseIdx),
    Reenrolled(CourseIdx),
    Overloaded,
    Withdrew(WithdrawalTrigger),
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Enrolled(_) => "enrolled",
            Event::Regularized(_) => "regularized",
            Event::ExamPassed(_) => "exam_passed",
            Event::ExamFailed(_) => "exam_failed",
            Event::Expired(_) => "expired",
            Event::Reenrolled(_) => "reenrolled",
            Event::Overloaded => "overloaded",
            Event::Withdrew(_) => "withdrew",
        }
    }

    pub fn course(&self) -> Option<CourseIdx> {
        match *self {
            Event::Enrolled(c)
            | Event::Regularized(c)
            | Event::ExamPassed(c)
            | Event::ExamFailed(c)
            | Event::Expired(c)
            | Event::Reenrolled(c) => Some(c),
            Event::Overloaded | Event::Withdrew(_) => None,
        }
    }

    /// Regularisation or a passed final.
    pub fn is_progress(&self) -> bool {
        matches!(self, Event::Regularized(_) | Event::ExamPassed(_))
    }
}

/// Append-only `(phase, event)` history.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    entries: Vec<(u32, Event)>,
}

impl EventLog {
    pub fn push(&mut self, phase: u32, event: Event) {
        if let Some(&(last, _)) = self.entries.last() {
            assert!(phase >= last, "event phases must be nondecreasing");
        }
        self.entries.push((phase, event));
    }

    pub fn entries(&self) -> &[(u32, Event)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn in_phase(&self, phase: u32) -> impl Iterator<Item = &Event> {
        self.entries.iter().filter(move |(p, _)| *p == phase).map(|(_, e)| e)
    }

    pub fn expiry_count(&self) -> u32 {
        self.entries
            .iter()
            .filter(|(_, e)| matches!(e, Event::Expired(_)))
            .count() as u32
    }

    /// Exam failures per course index, over the whole history.
    pub fn failure_counts(&self, n_courses: usize) -> Vec<u32> {
        let mut counts = vec![0u32; n_courses];
        for (_, e) in &self.entries {
            if let Event::ExamFailed(c) = e {
                counts[*c] += 1;
            }
        }
        counts
    }

    pub fn withdrawal(&self) -> Option<(u32, WithdrawalTrigger)> {
        self.entries.iter().rev().find_map(|(p, e)| match e {
            Event::Withdrew(t) => Some((*p, *t)),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub agent_id: u32,
    /// Index into the archetype list.
    pub archetype: usize,
    pub stress: f64,
    pub belonging: f64,
    pub fatigued: bool,
    pub statuses: Vec<CourseStatus>,
    pub events: EventLog,
    pub outcome: Outcome,
    pub periods_without_progress: u32,
    pub semesters_enrolled: u32,
    /// Phase during which the agent left Active, if it did.
    pub terminal_phase: Option<u32>,
}

impl AgentState {
    pub fn new(agent_id: u32, archetype_idx: usize, archetype: &Archetype, n_courses: usize) -> Self {
        Self {
            agent_id,
            archetype: archetype_idx,
            stress: 0.0,
            belonging: archetype.initial_belonging,
            fatigued: false,
            statuses: vec![CourseStatus::default(); n_courses],
            events: EventLog::default(),
            outcome: Outcome::Active,
            periods_without_progress: 0,
            semesters_enrolled: 0,
            terminal_phase: None,
        }
    }

    pub fn count_in(&self, state: CourseState) -> usize {
        self.statuses.iter().filter(|s| s.state == state).count()
    }

    /// Regular-but-uncredited courses.
    pub fn pending_finals(&self) -> usize {
        self.count_in(CourseState::Regular)
    }

    pub fn expiry_count(&self) -> u32 {
        self.events.expiry_count()
    }
}

/// Builds the initial population: archetype blocks in file order, ids `0..n`.
pub fn spawn_population(archetypes: &[Archetype], n_agents: usize, n_courses: usize) -> Vec<AgentState> {
    let counts = apportion(archetypes, n_agents);
    let mut agents = Vec::with_capacity(n_agents);
    for (k, (arch, &count)) in archetypes.iter().zip(&counts).enumerate() {
        for _ in 0..count {
            let id = agents.len() as u32;
            agents.push(AgentState::new(id, k, arch, n_courses));
        }
    }
    agents
}

/// One period's ability draw, clamped to [0, 1].
pub fn sample_ability<R: Rng + ?Sized>(archetype: &Archetype, sigma_abil: f64, rng: &mut R) -> f64 {
    let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
    ability_from_z(archetype.base_ability, sigma_abil, z)
}

pub fn ability_from_z(mean: f64, sigma: f64, z: f64) -> f64 {
    (mean + sigma * z).clamp(0.0, 1.0)
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Dropout(c) => write!(f, "dropout({})", c.as_str()),
            other => f.write_str(other.label()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn arch(id: &str, tau: u8, weight: f64) -> Archetype {
        Archetype {
            id: id.into(),
            planning_horizon: tau,
            base_ability: 0.5,
            initial_belonging: 0.6,
            stress_reactivity: 0.1,
            effort_capacity: 10.0,
            max_final_backlog: 4,
            population_weight: weight,
        }
    }

    #[test]
    fn accepts_strategic_row() {
        let text = "id,tau,mu_abil,b0,sigma_stress,e_max,max_final_backlog,weight\n\
                    PSICO_01,2,0.78,0.85,0.05,14,6,1.0\n";
        let list = load_archetypes(text.as_bytes()).unwrap();
        assert_eq!(list[0].max_final_backlog, 6);
        assert_eq!(list[0].class(), PlanningClass::Strategic);
    }

    #[test]
    fn rejects_tau_three() {
        let text = "id,tau,mu_abil,b0,sigma_stress,e_max,max_final_backlog,weight\n\
                    X,3,0.5,0.6,0.1,10,2,1.0\n";
        assert!(matches!(
            load_archetypes(text.as_bytes()),
            Err(PopulationError::ParameterOutOfRange { field: "tau", .. })
        ));
    }

    #[test]
    fn rejects_weights_not_summing_to_one() {
        let list = vec![arch("a", 0, 0.49), arch("b", 0, 0.49)];
        assert!(matches!(
            validate_archetypes(list),
            Err(PopulationError::WeightsDoNotSumToOne(_))
        ));
    }

    #[test]
    fn apportionment_examples() {
        let halves = vec![arch("a", 0, 0.5), arch("b", 0, 0.5)];
        assert_eq!(apportion(&halves, 4), vec![2, 2]);
        let third = 1.0 / 3.0;
        let thirds = vec![arch("a", 0, third), arch("b", 0, third), arch("c", 0, third)];
        assert_eq!(apportion(&thirds, 4), vec![2, 1, 1]);
    }

    #[test]
    fn spawn_initial_state() {
        let list = vec![arch("a", 0, 0.25), arch("b", 2, 0.75)];
        let agents = spawn_population(&list, 8, 5);
        assert_eq!(agents.len(), 8);
        assert_eq!(agents.iter().filter(|a| a.archetype == 0).count(), 2);
        for (i, a) in agents.iter().enumerate() {
            assert_eq!(a.agent_id, i as u32);
            assert_eq!(a.stress, 0.0);
            assert_eq!(a.belonging, 0.6);
            assert!(a.statuses.iter().all(|s| s.state == CourseState::Null));
            assert_eq!(a.outcome, Outcome::Active);
        }
        assert_eq!(spawn_population(&list, 8, 5), agents);
    }

    #[test]
    fn ability_clamp_and_center() {
        assert_eq!(ability_from_z(0.78, 0.1, 0.0), 0.78);
        assert_eq!(ability_from_z(0.05, 0.1, -3.0), 0.0);
        assert_eq!(ability_from_z(0.95, 0.1, 3.0), 1.0);
    }

    #[test]
    fn sampler_mean_matches_archetype() {
        let mut a = arch("a", 0, 1.0);
        a.base_ability = 0.42;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| sample_ability(&a, 0.1, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.42).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn event_log_counts() {
        let mut log = EventLog::default();
        log.push(0, Event::Enrolled(1));
        log.push(2, Event::ExamFailed(1));
        log.push(3, Event::ExamFailed(1));
        log.push(3, Event::Expired(1));
        log.push(5, Event::Withdrew(WithdrawalTrigger::Voluntary));
        assert_eq!(log.expiry_count(), 1);
        assert_eq!(log.failure_counts(2), vec![0, 2]);
        assert_eq!(log.withdrawal(), Some((5, WithdrawalTrigger::Voluntary)));
        assert_eq!(log.in_phase(3).count(), 2);
    }

    #[test]
    #[should_panic]
    fn event_log_rejects_time_travel() {
        let mut log = EventLog::default();
        log.push(3, Event::Overloaded);
        log.push(2, Event::Overloaded);
    }
}
