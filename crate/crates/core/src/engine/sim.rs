//! The period loop, replications and experiments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::behavior::{feasible_set, select_exams, select_portfolio, DecisionContext, UtilityWeights};
use crate::curriculum::Curriculum;
use crate::dynamics::{
    attribute_cause, check_terminal, effective_effort, learning_increment, pass_probability, regularisation_threshold,
    update_psych, DynamicsParams, Terminal,
};
use crate::engine::results::{EventRecord, ExperimentResult, ReplicationResult, TerminalRecord};
use crate::engine::{ConfigError, PhaseCalendar, Scenario};
use crate::population::{
    population_mean_ability, sample_ability, spawn_population, validate_archetypes, AgentState, Archetype, Event,
    Outcome,
};
use crate::regime::{self, CourseState};

/// Run levers after policy options are folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEffect {
    pub t_exp: u32,
    pub exam_slots: u32,
    pub bridging: bool,
    pub dynamics: DynamicsParams,
}

/// Extended TTL flows through `t_exp`; bridging halves the expiry belonging
/// and stress penalties (the utility bonus lives in the decision context);
/// flexible scheduling adds one exam slot per window.
pub fn apply_policy(scenario: &Scenario) -> PolicyEffect {
    let mut dynamics = scenario.dynamics();
    if scenario.bridging_support {
        dynamics.delta_b_expiry *= 0.5;
        dynamics.expiry_stress_multiplier *= 0.5;
    }
    PolicyEffect {
        t_exp: scenario.t_exp,
        exam_slots: scenario.exam_slots + u32::from(scenario.flexible_scheduling),
        bridging: scenario.bridging_support,
        dynamics,
    }
}

/// Validated, immutable model inputs shared by every replication.
#[derive(Debug, Clone)]
pub struct Simulation {
    curriculum: Curriculum,
    archetypes: Vec<Archetype>,
    scenario: Scenario,
    calendar: PhaseCalendar,
    weights: UtilityWeights,
    policy: PolicyEffect,
    reference_ability: f64,
    thresholds: Vec<f64>,
    caps: Vec<Option<u32>>,
}

impl Simulation {
    pub fn new(curriculum: Curriculum, archetypes: Vec<Archetype>, scenario: Scenario) -> Result<Self, ConfigError> {
        scenario.validate()?;
        let archetypes = validate_archetypes(archetypes)?;
        let reference_ability = scenario
            .reference_ability
            .unwrap_or_else(|| population_mean_ability(&archetypes));
        let caps = scenario.caps_for(&curriculum)?;
        let base = scenario.dynamics();
        let thresholds = curriculum
            .courses()
            .iter()
            .map(|c| regularisation_threshold(c, reference_ability, &base))
            .collect();
        Ok(Self {
            calendar: scenario.calendar(),
            weights: scenario.weights(),
            policy: apply_policy(&scenario),
            curriculum,
            archetypes,
            scenario,
            reference_ability,
            thresholds,
            caps,
        })
    }

    /// Same course thresholds, different archetype parameters.
    pub fn with_archetypes(&self, archetypes: Vec<Archetype>) -> Result<Self, ConfigError> {
        let mut scenario = self.scenario.clone();
        scenario.reference_ability = Some(self.reference_ability);
        Self::new(self.curriculum.clone(), archetypes, scenario)
    }

    pub fn with_scenario(&self, scenario: Scenario) -> Result<Self, ConfigError> {
        Self::new(self.curriculum.clone(), self.archetypes.clone(), scenario)
    }

    pub fn curriculum(&self) -> &Curriculum {
        &self.curriculum
    }

    pub fn archetypes(&self) -> &[Archetype] {
        &self.archetypes
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn calendar(&self) -> &PhaseCalendar {
        &self.calendar
    }

    pub fn policy(&self) -> &PolicyEffect {
        &self.policy
    }

    pub fn reference_ability(&self) -> f64 {
        self.reference_ability
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn new_world(&self, seed: u64) -> World {
        self.world_for(seed, |_| true)
    }

    /// A world holding only the agents whose archetype passes `keep`. Agent ids
    /// and RNG streams are those of the full population.
    pub fn world_for(&self, seed: u64, keep: impl Fn(usize) -> bool) -> World {
        let agents: Vec<AgentState> = spawn_population(&self.archetypes, self.scenario.n_agents, self.curriculum.len())
            .into_iter()
            .filter(|a| keep(a.archetype))
            .collect();
        let rngs = agents
            .iter()
            .map(|a| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(u64::from(a.agent_id));
                rng
            })
            .collect();
        World {
            seed,
            agents,
            rngs,
            occupancy: vec![0; self.curriculum.len()],
            periods_run: 0,
        }
    }

    /// One period for every Active agent, in ascending id order.
    pub fn run_period(&self, world: &mut World, phase: u32) {
        assert!(phase < self.calendar.horizon, "phase {phase} beyond horizon");
        let World {
            agents,
            rngs,
            occupancy,
            ..
        } = world;
        for (agent, rng) in agents.iter_mut().zip(rngs.iter_mut()) {
            if agent.outcome.is_active() {
                self.step_agent(agent, rng, occupancy, phase);
            }
        }
        world.periods_run += 1;
    }

    fn step_agent(&self, agent: &mut AgentState, rng: &mut ChaCha8Rng, occupancy: &mut [u32], phase: u32) {
        let archetype = &self.archetypes[agent.archetype];
        let dynamics = &self.policy.dynamics;
        let ctx = DecisionContext {
            curriculum: &self.curriculum,
            archetype,
            weights: &self.weights,
            t_exp: self.policy.t_exp,
            bridging: self.policy.bridging,
        };
        let first_event = agent.events.len();

        if self.calendar.is_semester_start(phase) {
            agent.semesters_enrolled += 1;
        }
        let ability = sample_ability(archetype, dynamics.sigma_abil, rng);

        let feasible = feasible_set(
            &agent.statuses,
            archetype,
            &self.curriculum,
            phase,
            &self.calendar,
            |c| self.caps[c].is_none_or(|cap| occupancy[c] < cap),
        );
        let portfolio = select_portfolio(&ctx, &agent.statuses, &feasible, rng);

        for &c in &portfolio {
            let before = agent.statuses[c].state;
            if matches!(before, CourseState::Null | CourseState::Expired) {
                agent.statuses[c] = regime::enroll(agent.statuses[c]).expect("feasible course is enrollable");
                occupancy[c] += 1;
                let event = if before == CourseState::Null {
                    Event::Enrolled(c)
                } else {
                    Event::Reenrolled(c)
                };
                agent.events.push(phase, event);
            }
        }

        let plan = effective_effort(
            &self.curriculum,
            &portfolio,
            archetype.effort_capacity,
            agent.fatigued,
            ability,
            dynamics,
        );
        agent.fatigued = plan.overload;
        if plan.overload {
            agent.events.push(phase, Event::Overloaded);
        }
        for &(c, effort) in &plan.efforts {
            let course = self.curriculum.course(c);
            agent.statuses[c].learning += learning_increment(
                plan.effective_ability,
                effort,
                course.difficulty,
                agent.stress,
                dynamics,
            );
        }

        for &c in &portfolio {
            if agent.statuses[c].learning >= self.thresholds[c] {
                agent.statuses[c] = regime::regularize(agent.statuses[c], self.policy.t_exp).expect("enrolled course");
                occupancy[c] -= 1;
                agent.events.push(phase, Event::Regularized(c));
            }
        }

        if self.calendar.is_exam_window(phase) {
            self.sit_exams(agent, &ctx, rng, phase);
        }

        let period_events: Vec<Event> = agent.events.entries()[first_event..].iter().map(|&(_, e)| e).collect();
        update_psych(agent, &period_events, dynamics, archetype);
        if period_events.iter().any(Event::is_progress) {
            agent.periods_without_progress = 0;
        } else {
            agent.periods_without_progress += 1;
        }

        match check_terminal(agent, dynamics, self.scenario.exogenous_hazard, rng) {
            None => {}
            Some(Terminal::Graduated) => {
                agent.outcome = Outcome::Graduated;
                agent.terminal_phase = Some(phase);
            }
            Some(Terminal::Withdrew(trigger)) => {
                agent.events.push(phase, Event::Withdrew(trigger));
                agent.outcome = Outcome::Dropout(attribute_cause(&agent.events, self.curriculum.len(), dynamics));
                agent.terminal_phase = Some(phase);
                for (c, s) in agent.statuses.iter().enumerate() {
                    if s.state == CourseState::Enrolled {
                        occupancy[c] -= 1;
                    }
                }
            }
        }
    }

    fn sit_exams(&self, agent: &mut AgentState, ctx: &DecisionContext<'_>, rng: &mut ChaCha8Rng, phase: u32) {
        let regular: Vec<usize> = (0..self.curriculum.len())
            .filter(|&c| agent.statuses[c].state == CourseState::Regular)
            .collect();
        let chosen = select_exams(ctx, &agent.statuses, &regular, self.policy.exam_slots, rng);
        for c in chosen {
            let p = pass_probability(
                agent.statuses[c].learning,
                self.thresholds[c],
                self.policy.dynamics.sigma_exam,
            );
            if rand::Rng::random::<f64>(rng) < p {
                agent.statuses[c] = regime::credit(agent.statuses[c]).expect("regular course");
                agent.events.push(phase, Event::ExamPassed(c));
            } else {
                agent.statuses[c].exam_failures += 1;
                agent.events.push(phase, Event::ExamFailed(c));
            }
        }
        for c in regular {
            let decayed = regime::decay_ttl(agent.statuses[c], true);
            let (next, expired) = regime::check_expiry(decayed);
            agent.statuses[c] = next;
            if expired {
                agent.events.push(phase, Event::Expired(c));
            }
        }
    }

    /// Runs every period of the horizon and collects terminal records.
    pub fn run_world(&self, mut world: World, keep_events: bool) -> ReplicationResult {
        for phase in 0..self.calendar.horizon {
            self.run_period(&mut world, phase);
        }
        self.finish(world, keep_events)
    }

    pub fn run_replication(&self, seed: u64, keep_events: bool) -> ReplicationResult {
        self.run_world(self.new_world(seed), keep_events)
    }

    fn finish(&self, world: World, keep_events: bool) -> ReplicationResult {
        let horizon = self.calendar.horizon;
        let n = self.curriculum.len();
        let failure_threshold = self.policy.dynamics.academic_failure_threshold;
        let records = world
            .agents
            .iter()
            .map(|a| {
                let failures = a.events.failure_counts(n);
                TerminalRecord {
                    seed: world.seed,
                    agent_id: a.agent_id,
                    archetype: self.archetypes[a.archetype].id.clone(),
                    planning_horizon: self.archetypes[a.archetype].planning_horizon,
                    outcome: a.outcome,
                    trigger: a.events.withdrawal().map(|(_, t)| t),
                    time: a.terminal_phase.map_or(horizon, |p| p + 1),
                    censored: a.outcome.is_active(),
                    expiries: a.expiry_count(),
                    exam_failures: failures.iter().sum(),
                    repeated_failure_courses: failures.iter().filter(|&&f| f >= failure_threshold).count() as u32,
                    credited: a.count_in(CourseState::Credited) as u32,
                    pending_finals: a.pending_finals() as u32,
                    stress: a.stress,
                    belonging: a.belonging,
                    semesters_enrolled: a.semesters_enrolled,
                }
            })
            .collect();
        let events = keep_events.then(|| {
            world
                .agents
                .iter()
                .flat_map(|a| {
                    a.events.entries().iter().map(move |&(phase, e)| EventRecord {
                        seed: world.seed,
                        agent_id: a.agent_id,
                        phase,
                        event: e.kind(),
                        course: e.course().map(|c| self.curriculum.course(c).id.clone()),
                        detail: match e {
                            Event::Withdrew(t) => Some(t.as_str().to_string()),
                            _ => None,
                        },
                    })
                })
                .collect()
        });
        ReplicationResult {
            seed: world.seed,
            records,
            events,
        }
    }

    /// Runs all seeds (sorted, deduplicated) on up to `jobs` threads. The result
    /// does not depend on `jobs` or on the order seeds were given in.
    pub fn run_experiment(&self, seeds: &[u64], jobs: usize, keep_events: bool) -> ExperimentResult {
        let mut seeds = seeds.to_vec();
        seeds.sort_unstable();
        seeds.dedup();
        let run = || {
            seeds
                .par_iter()
                .map(|&s| self.run_replication(s, keep_events))
                .collect::<Vec<_>>()
        };
        let replications = if jobs <= 1 {
            seeds.iter().map(|&s| self.run_replication(s, keep_events)).collect()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map(|pool| pool.install(run))
                .unwrap_or_else(|_| run())
        };
        ExperimentResult { replications }
    }
}

/// Mutable state of one replication.
#[derive(Debug, Clone)]
pub struct World {
    pub seed: u64,
    pub agents: Vec<AgentState>,
    rngs: Vec<ChaCha8Rng>,
    /// Enrolled agents per course, for seat caps.
    pub occupancy: Vec<u32>,
    pub periods_run: u32,
}
