//! Learning, examinations, psychological state, terminal states and dropout
//! attribution.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curriculum::{CourseIdx, CourseParams, Curriculum};
use crate::population::{AgentState, Archetype, DropoutCause, Event, EventLog, WithdrawalTrigger};
use crate::regime::CourseState;

/// Upper clamp on a course pass rate before taking its logit.
pub const PASS_RATE_CLAMP: f64 = 0.995;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    pub sigma_abil: f64,
    pub beta_stress: f64,
    pub fatigue_factor: f64,
    pub gamma_decay: f64,
    #[serde(rename = "delta_B_fail")]
    pub delta_b_fail: f64,
    #[serde(rename = "delta_B_expiry")]
    pub delta_b_expiry: f64,
    pub expiry_stress_multiplier: f64,
    /// Multiple of stress reactivity applied per passed exam (negative).
    pub success_stress_relief: f64,
    pub sigma_exam: f64,
    pub belonging_floor: f64,
    pub stress_ceiling: f64,
    pub stagnation_periods: u32,
    /// Intercept, belonging, stress, expiries, semesters.
    pub withdrawal_betas: [f64; 5],
    pub normative_expiry_threshold: u32,
    /// Failures in one course that count as "repeated".
    pub academic_failure_threshold: u32,
    /// Courses with repeated failures needed for an academic attribution.
    pub academic_course_threshold: u32,
    /// Stress level of the reference student used to derive course thresholds.
    pub reference_stress: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            sigma_abil: 0.1,
            beta_stress: 0.3,
            fatigue_factor: 0.75,
            gamma_decay: 0.98,
            delta_b_fail: -0.02,
            delta_b_expiry: -0.05,
            expiry_stress_multiplier: 1.5,
            success_stress_relief: -0.5,
            sigma_exam: 0.15,
            belonging_floor: 0.15,
            stress_ceiling: 0.85,
            stagnation_periods: 4,
            withdrawal_betas: [-5.2, -3.1, 2.8, 0.4, 0.2],
            normative_expiry_threshold: 5,
            academic_failure_threshold: 3,
            academic_course_threshold: 2,
            reference_stress: 0.2,
        }
    }
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<(), (&'static str, f64)> {
        if !(self.gamma_decay > 0.0 && self.gamma_decay <= 1.0) {
            return Err(("gamma_decay", self.gamma_decay));
        }
        if !(self.sigma_exam.is_finite() && self.sigma_exam > 0.0) {
            return Err(("sigma_exam", self.sigma_exam));
        }
        if !(self.sigma_abil.is_finite() && self.sigma_abil >= 0.0) {
            return Err(("sigma_abil", self.sigma_abil));
        }
        if !(self.fatigue_factor > 0.0 && self.fatigue_factor <= 1.0) {
            return Err(("fatigue_factor", self.fatigue_factor));
        }
        if !(self.beta_stress.is_finite() && self.beta_stress >= 0.0) {
            return Err(("beta_stress", self.beta_stress));
        }
        if !(0.0..=1.0).contains(&self.reference_stress) {
            return Err(("reference_stress", self.reference_stress));
        }
        if self.withdrawal_betas.iter().any(|b| !b.is_finite()) {
            return Err(("withdrawal_betas", f64::NAN));
        }
        Ok(())
    }
}

/// `ability*effort / (difficulty*(1 + beta_stress*stress))`.
pub fn learning_increment(ability: f64, effort: f64, difficulty: f64, stress: f64, params: &DynamicsParams) -> f64 {
    debug_assert!(difficulty > 0.0 && effort >= 0.0);
    ability * effort / (difficulty * (1.0 + params.beta_stress * stress))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffortPlan {
    /// `(course, effort)` in portfolio order; effort equals the course workload.
    pub efforts: Vec<(CourseIdx, f64)>,
    /// Ability after the fatigue penalty carried from the previous period.
    pub effective_ability: f64,
    /// Total workload exceeded capacity; the agent is fatigued next period.
    pub overload: bool,
}

pub fn effective_effort(
    curriculum: &Curriculum,
    portfolio: &[CourseIdx],
    capacity: f64,
    fatigued: bool,
    ability: f64,
    params: &DynamicsParams,
) -> EffortPlan {
    let efforts: Vec<(CourseIdx, f64)> = portfolio.iter().map(|&c| (c, curriculum.course(c).workload)).collect();
    let load: f64 = efforts.iter().map(|(_, e)| e).sum();
    EffortPlan {
        efforts,
        effective_ability: if fatigued {
            ability * params.fatigue_factor
        } else {
            ability
        },
        overload: load > capacity,
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Logistic pass model centred on the course threshold.
pub fn pass_probability(learning: f64, theta: f64, sigma_exam: f64) -> f64 {
    logistic((learning - theta) / sigma_exam)
}

/// Learning a reference student accumulates over the course's regularisation time.
pub fn reference_learning(course: &CourseParams, reference_ability: f64, params: &DynamicsParams) -> f64 {
    course.reg_time
        * learning_increment(
            reference_ability,
            course.workload,
            course.difficulty,
            params.reference_stress,
            params,
        )
}

/// Threshold at which the reference student passes with the course's pass rate.
pub fn regularisation_threshold(course: &CourseParams, reference_ability: f64, params: &DynamicsParams) -> f64 {
    let rho = course.pass_rate.min(PASS_RATE_CLAMP);
    reference_learning(course, reference_ability, params) - params.sigma_exam * (rho / (1.0 - rho)).ln()
}

/// Applies one period's events to stress and belonging, then clamps both to [0, 1].
pub fn update_psych(agent: &mut AgentState, period_events: &[Event], params: &DynamicsParams, archetype: &Archetype) {
    let (mut fails, mut expiries, mut passes) = (0u32, 0u32, 0u32);
    for e in period_events {
        match e {
            Event::ExamFailed(_) => fails += 1,
            Event::Expired(_) => expiries += 1,
            Event::ExamPassed(_) => passes += 1,
            _ => {}
        }
    }
    let sigma = archetype.stress_reactivity;
    let stress = agent.stress * params.gamma_decay
        + fails as f64 * sigma
        + expiries as f64 * params.expiry_stress_multiplier * sigma
        + passes as f64 * params.success_stress_relief * sigma;
    let belonging = agent.belonging + fails as f64 * params.delta_b_fail + expiries as f64 * params.delta_b_expiry;
    agent.stress = stress.clamp(0.0, 1.0);
    agent.belonging = belonging.clamp(0.0, 1.0);
}

pub fn withdrawal_probability(belonging: f64, stress: f64, expiries: u32, semesters: u32, betas: &[f64; 5]) -> f64 {
    logistic(
        betas[0] + betas[1] * belonging + betas[2] * stress + betas[3] * expiries as f64 + betas[4] * semesters as f64,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Graduated,
    Withdrew(WithdrawalTrigger),
}

/// End-of-period terminal check: graduation, depletion, stagnation, then the
/// voluntary draw and the optional exogenous hazard draw.
pub fn check_terminal<R: Rng + ?Sized>(
    agent: &AgentState,
    params: &DynamicsParams,
    exogenous_hazard: f64,
    rng: &mut R,
) -> Option<Terminal> {
    if agent.statuses.iter().all(|s| s.state == CourseState::Credited) {
        return Some(Terminal::Graduated);
    }
    if agent.belonging < params.belonging_floor || agent.stress > params.stress_ceiling {
        return Some(Terminal::Withdrew(WithdrawalTrigger::Depletion));
    }
    if agent.periods_without_progress >= params.stagnation_periods {
        return Some(Terminal::Withdrew(WithdrawalTrigger::Stagnation));
    }
    let p = withdrawal_probability(
        agent.belonging,
        agent.stress,
        agent.expiry_count(),
        agent.semesters_enrolled,
        &params.withdrawal_betas,
    );
    if rng.random::<f64>() < p {
        return Some(Terminal::Withdrew(WithdrawalTrigger::Voluntary));
    }
    if exogenous_hazard > 0.0 && rng.random::<f64>() < exogenous_hazard {
        return Some(Terminal::Withdrew(WithdrawalTrigger::Exogenous));
    }
    None
}

/// Classifies a dropout from its event history alone.
///
/// Normative: enough expiries, or a depletion exit whose crossing period saw an
/// expiry. Academic: fewer expiries and repeated failures in enough courses.
/// Anything else is Other.
pub fn attribute_cause(events: &EventLog, n_courses: usize, params: &DynamicsParams) -> DropoutCause {
    let expiries = events.expiry_count();
    if expiries >= params.normative_expiry_threshold {
        return DropoutCause::Normative;
    }
    if let Some((phase, WithdrawalTrigger::Depletion)) = events.withdrawal() {
        if events.in_phase(phase).any(|e| matches!(e, Event::Expired(_))) {
            return DropoutCause::Normative;
        }
    }
    let repeated = events
        .failure_counts(n_courses)
        .iter()
        .filter(|&&f| f >= params.academic_failure_threshold)
        .count() as u32;
    if repeated >= params.academic_course_threshold {
        DropoutCause::Academic
    } else {
        DropoutCause::Other
    }
}
