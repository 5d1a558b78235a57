use regtrap_core::curriculum::CourseParams;
use regtrap_core::engine::results::write_records;
use regtrap_core::engine::{apply_policy, ExperimentResult};
use regtrap_core::population::{Archetype, Outcome};
use regtrap_core::{reference, Curriculum, Scenario, Simulation};

fn archetype(id: &str, tau: u8, weight: f64) -> Archetype {
    Archetype {
        id: id.into(),
        planning_horizon: tau,
        base_ability: 0.6,
        initial_belonging: 0.8,
        stress_reactivity: 0.1,
        effort_capacity: 10.0,
        max_final_backlog: 3,
        population_weight: weight,
    }
}

/// Two independent roots and one course needing both.
fn fork_curriculum() -> Curriculum {
    Curriculum::new(vec![
        CourseParams::new("x", 0.3, 1.5, 1.0, 1.0),
        CourseParams::new("y", 0.3, 1.5, 1.0, 1.0),
        CourseParams::new("z", 0.3, 1.5, 1.0, 1.0).with_prerequisites(&["x", "y"]),
    ])
    .unwrap()
}

/// Every draw that matters is pinned: no ability spread, no utility noise,
/// near-certain passes and a negligible withdrawal hazard.
fn pinned_scenario() -> Scenario {
    Scenario {
        n_agents: 10,
        horizon: 8,
        t_exp: 1,
        exam_slots: 1,
        noise_sd: 0.0,
        sigma_abil: 0.0,
        sigma_exam: 1e-6,
        withdrawal_betas: [-60.0, 0.0, 0.0, 0.0, 0.0],
        ..Scenario::default()
    }
}

fn trace_sim() -> Simulation {
    let archs = vec![archetype("M", 0, 0.5), archetype("S", 2, 0.5)];
    Simulation::new(fork_curriculum(), archs, pinned_scenario()).unwrap()
}

fn csv(result: &ExperimentResult) -> Vec<u8> {
    let records: Vec<_> = result.records().cloned().collect();
    let mut buf = Vec::new();
    write_records(&mut buf, &records).unwrap();
    buf
}

#[test]
fn golden_hand_trace() {
    // Phase 0 (teaching): enrol x and y; 5*0.6 learning clears both thresholds.
    // Phase 1 (teaching): nothing to enrol, nothing to sit.
    // Phase 2 (exam, one slot): x is sat and passed, y runs out of TTL.
    // Phase 3 (exam): y is re-enrolled, regularised and passed in the same window.
    // Phase 4 (teaching): z becomes available and is regularised.
    // Phase 6 (exam): z is passed; the agent graduates with time 7.
    let expected = [
        (0, "enrolled", "x"),
        (0, "enrolled", "y"),
        (0, "regularized", "x"),
        (0, "regularized", "y"),
        (2, "exam_passed", "x"),
        (2, "expired", "y"),
        (3, "reenrolled", "y"),
        (3, "regularized", "y"),
        (3, "exam_passed", "y"),
        (4, "enrolled", "z"),
        (4, "regularized", "z"),
        (6, "exam_passed", "z"),
    ];
    let rep = trace_sim().run_replication(3, true);
    assert_eq!(rep.records.len(), 10);
    let events = rep.events.as_ref().unwrap();
    for agent in 0..10u32 {
        let got: Vec<(u32, &str, &str)> = events
            .iter()
            .filter(|e| e.agent_id == agent)
            .map(|e| (e.phase, e.event, e.course.as_deref().unwrap_or("")))
            .collect();
        assert_eq!(got, expected, "agent {agent}");
    }
    let sigma: f64 = 0.1;
    // Stress: 0 -> sigma (one expiry at x1.5, one pass at -0.5) -> 0.48 sigma
    // -> decays twice -> 0.98 * that - 0.5 sigma, clamped at 0.
    let phase5 = 0.48 * sigma * 0.98 * 0.98;
    let final_stress = (phase5 * 0.98 - 0.5 * sigma).max(0.0);
    for r in &rep.records {
        assert_eq!(r.outcome, Outcome::Graduated);
        assert_eq!(r.time, 7);
        assert!(!r.censored);
        assert_eq!(r.expiries, 1);
        assert_eq!(r.exam_failures, 0);
        assert_eq!(r.credited, 3);
        assert_eq!(r.pending_finals, 0);
        assert_eq!(r.semesters_enrolled, 2);
        assert_eq!(r.stress, final_stress);
        assert!((r.belonging - 0.75).abs() < 1e-12);
    }
    assert_eq!(rep.records.iter().filter(|r| r.archetype == "M").count(), 5);
}

#[test]
fn two_slots_avoid_the_expiry() {
    let archs = vec![archetype("S", 2, 1.0)];
    let scenario = Scenario {
        exam_slots: 2,
        ..pinned_scenario()
    };
    let rep = Simulation::new(fork_curriculum(), archs, scenario)
        .unwrap()
        .run_replication(1, false);
    for r in &rep.records {
        assert_eq!(r.expiries, 0);
        assert_eq!(r.outcome, Outcome::Graduated);
        // x and y pass at phase 2; z is taken and passed in the phase 3 window.
        assert_eq!(r.time, 4);
    }
}

#[test]
fn flexible_scheduling_acts_as_an_extra_slot() {
    let archs = vec![archetype("S", 2, 1.0)];
    let scenario = Scenario {
        flexible_scheduling: true,
        ..pinned_scenario()
    };
    assert_eq!(apply_policy(&scenario).exam_slots, 2);
    let rep = Simulation::new(fork_curriculum(), archs, scenario)
        .unwrap()
        .run_replication(1, false);
    assert!(rep.records.iter().all(|r| r.expiries == 0));
}

#[test]
fn policy_levers() {
    let base = Scenario::default();
    let p = apply_policy(&Scenario {
        t_exp: 3,
        ..base.clone()
    });
    assert_eq!(p.t_exp, 3);
    let p = apply_policy(&Scenario {
        bridging_support: true,
        ..base.clone()
    });
    assert!(p.bridging);
    assert!((p.dynamics.delta_b_expiry - -0.025).abs() < 1e-15);
    assert!((p.dynamics.expiry_stress_multiplier * 0.10 - 0.075).abs() < 1e-15);
    let p = apply_policy(&Scenario {
        flexible_scheduling: true,
        ..base
    });
    assert_eq!(p.exam_slots, 3);
}

#[test]
fn bridging_halves_the_expiry_shock_in_the_trace() {
    let archs = vec![archetype("S", 2, 1.0)];
    let scenario = Scenario {
        bridging_support: true,
        ..pinned_scenario()
    };
    let sim = Simulation::new(fork_curriculum(), archs, scenario).unwrap();
    let mut world = sim.new_world(1);
    for phase in 0..3 {
        sim.run_period(&mut world, phase);
    }
    // One expiry at 0.75 sigma and one pass at -0.5 sigma.
    let a = &world.agents[0];
    assert!((a.stress - 0.025).abs() < 1e-12);
    assert!((a.belonging - 0.775).abs() < 1e-12);
}

fn small_reference(n: usize) -> Simulation {
    reference::simulation(Scenario {
        n_agents: n,
        ..Scenario::default()
    })
    .unwrap()
}

#[test]
fn replication_is_deterministic_and_jobs_invariant() {
    let sim = small_reference(60);
    let seeds = [4, 1, 3, 2];
    let a = sim.run_experiment(&seeds, 1, false);
    let b = sim.run_experiment(&seeds, 4, false);
    let c = sim.run_experiment(&[1, 2, 3, 4, 4], 2, false);
    assert_eq!(csv(&a), csv(&b));
    assert_eq!(csv(&a), csv(&c));
    assert_eq!(a.seeds(), vec![1, 2, 3, 4]);
    let r1 = sim.run_replication(1, true);
    let r2 = sim.run_replication(2, true);
    assert_ne!(r1.events, r2.events);
}

#[test]
fn records_cover_the_population_and_respect_the_horizon() {
    let sim = small_reference(80);
    let horizon = sim.calendar().horizon;
    let result = sim.run_experiment(&[7], 1, false);
    assert_eq!(result.replications.len(), 1);
    let records = &result.replications[0].records;
    assert_eq!(records.len(), 80);
    let mut ids: Vec<u32> = records.iter().map(|r| r.agent_id).collect();
    ids.sort_unstable();
    assert_eq!(ids, (0..80).collect::<Vec<_>>());
    for r in records {
        assert!(r.time >= 1 && r.time <= horizon);
        assert_eq!(r.censored, r.outcome == Outcome::Active);
        if r.censored {
            assert_eq!(r.time, horizon);
        }
        assert_eq!(r.is_dropout(), r.trigger.is_some());
    }
}

#[test]
fn agents_are_unaffected_by_population_size() {
    // Per-agent streams depend only on (seed, agent id): agents of the first
    // archetype see the same draws when later archetypes grow. Thresholds
    // follow the population mean ability unless pinned.
    let mut small = reference::archetypes().unwrap();
    let big = small.clone();
    small.truncate(1);
    small[0].population_weight = 1.0;
    let s = Scenario {
        n_agents: 20,
        reference_ability: Some(0.55),
        ..Scenario::default()
    };
    let a = Simulation::new(reference::curriculum().unwrap(), small, s.clone())
        .unwrap()
        .run_replication(5, false);
    let full = Simulation::new(reference::curriculum().unwrap(), big, Scenario { n_agents: 400, ..s })
        .unwrap()
        .run_replication(5, false);
    let first: Vec<_> = full.records.iter().filter(|r| r.agent_id < 20).collect();
    assert!(first.iter().all(|r| r.archetype == a.records[0].archetype));
    for (x, y) in a.records.iter().zip(first) {
        assert_eq!(x, y);
    }
}

#[test]
fn event_logs_follow_the_state_machine() {
    let sim = small_reference(40);
    let cal = sim.calendar().clone();
    let rep = sim.run_replication(11, true);
    let events = rep.events.unwrap();
    for agent in 0..40u32 {
        // Per-course state replayed from the log.
        let mut state: std::collections::BTreeMap<String, &str> = Default::default();
        for e in events.iter().filter(|e| e.agent_id == agent) {
            let Some(course) = e.course.clone() else { continue };
            let prev = state.get(&course).copied().unwrap_or("null");
            let next = match (prev, e.event) {
                ("null", "enrolled") | ("expired", "reenrolled") => "enrolled",
                ("enrolled", "regularized") => "regular",
                ("regular", "exam_passed") => "credited",
                ("regular", "exam_failed") => "regular",
                ("regular", "expired") => "expired",
                other => panic!("agent {agent} course {course}: illegal {other:?}"),
            };
            if matches!(e.event, "exam_passed" | "exam_failed" | "expired") {
                assert!(cal.is_exam_window(e.phase));
            }
            state.insert(course, next);
        }
        let r = &rep.records[agent as usize];
        assert_eq!(
            r.credited as usize,
            state.values().filter(|s| **s == "credited").count()
        );
        assert_eq!(
            r.pending_finals as usize,
            state.values().filter(|s| **s == "regular").count()
        );
    }
}

#[test]
fn micro_curriculum_graduates_and_reference_does_not() {
    let archs = reference::archetypes().unwrap();
    let micro = Simulation::new(
        reference::micro_curriculum().unwrap(),
        archs,
        Scenario {
            n_agents: 50,
            ..Scenario::default()
        },
    )
    .unwrap();
    let grads = micro
        .run_experiment(&[1, 2], 1, false)
        .records()
        .filter(|r| r.outcome == Outcome::Graduated)
        .count();
    assert!(grads >= 1);
    let reference = small_reference(100).run_experiment(&[1, 2], 1, false);
    assert!(reference.records().all(|r| r.outcome != Outcome::Graduated));
}

#[test]
fn phase_accounting() {
    let sim = small_reference(5);
    let cal = sim.calendar();
    assert_eq!(cal.horizon, 61);
    let windows = (0..cal.horizon).filter(|&p| cal.is_exam_window(p)).count();
    assert_eq!(windows, 2 * 15);
    let mut world = sim.new_world(1);
    for p in 0..cal.horizon {
        sim.run_period(&mut world, p);
    }
    assert_eq!(world.periods_run, 61);
}
