//! Bounded-rational choices: which courses to work on each period, and which
//! Regular courses to sit in an examination window.
//!
//! Myopic agents (tau = 0) score by perceived ease only. Strategic agents
//! (tau >= 1) score by TTL urgency, bottleneck status and workload; tau = 2
//! agents add a lookahead bonus to Regular courses whose TTL is at most 2.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::curriculum::{CourseIdx, CourseParams, Curriculum};
use crate::engine::PhaseCalendar;
use crate::population::Archetype;
use crate::regime::{CourseState, CourseStatus};

/// Slack allowed when comparing a portfolio's workload with capacity.
pub const CAPACITY_EPS: f64 = 1e-9;

/// Feasible sets up to this size are solved exactly; larger ones greedily.
pub const EXACT_LIMIT: usize = 20;

/// TTL at or below which tau = 2 agents add the lookahead bonus.
pub const LOOKAHEAD_TTL: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub epsilon: f64,
    pub noise_sd: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self {
            w1: 2.0,
            w2: 1.5,
            w3: 0.5,
            epsilon: 0.1,
            noise_sd: 0.1,
        }
    }
}

impl UtilityWeights {
    pub fn validate(&self) -> Result<(), (&'static str, f64)> {
        for (k, v) in [
            ("w1", self.w1),
            ("w2", self.w2),
            ("w3", self.w3),
            ("noise_sd", self.noise_sd),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err((k, v));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(("epsilon", self.epsilon));
        }
        Ok(())
    }
}

/// `w1/(ttl+eps) + w2*bottleneck - w3/w + noise`.
pub fn utility_strategic(
    course: &CourseParams,
    bottleneck: bool,
    ttl: u32,
    weights: &UtilityWeights,
    noise: f64,
) -> f64 {
    let urgency = weights.w1 / (ttl as f64 + weights.epsilon);
    let bottleneck = if bottleneck { weights.w2 } else { 0.0 };
    urgency + bottleneck - weights.w3 / course.workload + noise
}

/// `1/(difficulty*workload) + noise`. Blind to TTL and to the DAG.
pub fn utility_myopic(course: &CourseParams, noise: f64) -> f64 {
    1.0 / (course.difficulty * course.workload) + noise
}

/// TTL used when scoring: the live counter for Regular courses, `t_exp` otherwise.
pub fn scoring_ttl(status: &CourseStatus, t_exp: u32) -> u32 {
    if status.state == CourseState::Regular {
        status.ttl
    } else {
        t_exp
    }
}

/// Everything a decision needs besides the agent's own statuses.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub curriculum: &'a Curriculum,
    pub archetype: &'a Archetype,
    pub weights: &'a UtilityWeights,
    pub t_exp: u32,
    /// Expired courses get `+w2` when bridging support is on.
    pub bridging: bool,
}

impl DecisionContext<'_> {
    /// Utility of `course` for this agent given its current status and a noise draw.
    pub fn utility(&self, course: CourseIdx, status: &CourseStatus, noise: f64) -> f64 {
        let params = self.curriculum.course(course);
        let mut u = if self.archetype.is_myopic() {
            utility_myopic(params, noise)
        } else {
            let ttl = scoring_ttl(status, self.t_exp);
            let mut u = utility_strategic(params, self.curriculum.is_bottleneck(course), ttl, self.weights, noise);
            if self.archetype.planning_horizon >= 2 && status.state == CourseState::Regular && ttl <= LOOKAHEAD_TTL {
                u += self.weights.w1 / (ttl as f64 + self.weights.epsilon);
            }
            u
        };
        if self.bridging && status.state == CourseState::Expired {
            u += self.weights.w2;
        }
        u
    }

    fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.weights.noise_sd > 0.0 {
            Normal::new(0.0, self.weights.noise_sd)
                .expect("validated noise_sd")
                .sample(rng)
        } else {
            0.0
        }
    }
}

/// Stage 1: courses the agent may work on this period, in course-id order.
///
/// Continuing Enrolled courses are always kept. Null/Expired courses need
/// credited prerequisites, an offering this semester and a free seat, and are
/// all excluded while the agent's pending finals exceed its backlog limit.
pub fn feasible_set(
    statuses: &[CourseStatus],
    archetype: &Archetype,
    curriculum: &Curriculum,
    phase: u32,
    calendar: &PhaseCalendar,
    has_seat: impl Fn(CourseIdx) -> bool,
) -> Vec<CourseIdx> {
    let pending = statuses.iter().filter(|s| s.state == CourseState::Regular).count();
    let blocked = pending > archetype.max_final_backlog as usize;
    (0..curriculum.len())
        .filter(|&c| match statuses[c].state {
            CourseState::Enrolled => true,
            CourseState::Null | CourseState::Expired => {
                !blocked
                    && curriculum.prerequisites_met_idx(statuses, c)
                    && curriculum.offered_in(c, phase, calendar)
                    && has_seat(c)
            }
            CourseState::Regular | CourseState::Credited => false,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub course: CourseIdx,
    pub utility: f64,
    pub workload: f64,
}

/// Scores every feasible course, one noise draw each in course-id order.
pub fn score_candidates<R: Rng + ?Sized>(
    ctx: &DecisionContext<'_>,
    statuses: &[CourseStatus],
    feasible: &[CourseIdx],
    rng: &mut R,
) -> Vec<Candidate> {
    debug_assert!(feasible.windows(2).all(|w| w[0] < w[1]));
    feasible
        .iter()
        .map(|&c| {
            let noise = ctx.draw_noise(rng);
            Candidate {
                course: c,
                utility: ctx.utility(c, &statuses[c], noise),
                workload: ctx.curriculum.course(c).workload,
            }
        })
        .collect()
}

/// Stage 3: the utility-maximal subset within capacity.
pub fn select_portfolio<R: Rng + ?Sized>(
    ctx: &DecisionContext<'_>,
    statuses: &[CourseStatus],
    feasible: &[CourseIdx],
    rng: &mut R,
) -> Vec<CourseIdx> {
    let candidates = score_candidates(ctx, statuses, feasible, rng);
    best_portfolio(&candidates, ctx.archetype.effort_capacity)
}

/// Exact search for small candidate sets, utility-density greedy above
/// [`EXACT_LIMIT`]. Result is sorted by course index.
pub fn best_portfolio(candidates: &[Candidate], capacity: f64) -> Vec<CourseIdx> {
    let mut chosen = if candidates.len() <= EXACT_LIMIT {
        exact_portfolio(candidates, capacity)
    } else {
        greedy_portfolio(candidates, capacity)
    };
    chosen.sort_unstable();
    chosen
}

pub fn portfolio_value(candidates: &[Candidate], chosen: &[CourseIdx]) -> f64 {
    candidates
        .iter()
        .filter(|c| chosen.contains(&c.course))
        .map(|c| c.utility)
        .sum()
}

/// Greedy by utility per unit workload (ties by course id); skips items that
/// no longer fit and never takes a nonpositive utility.
pub fn greedy_portfolio(candidates: &[Candidate], capacity: f64) -> Vec<CourseIdx> {
    let mut order: Vec<&Candidate> = candidates.iter().filter(|c| c.utility > 0.0).collect();
    order.sort_by(|a, b| {
        (b.utility / b.workload)
            .total_cmp(&(a.utility / a.workload))
            .then(a.course.cmp(&b.course))
    });
    let mut load = 0.0;
    let mut chosen = Vec::new();
    for c in order {
        if load + c.workload <= capacity + CAPACITY_EPS {
            load += c.workload;
            chosen.push(c.course);
        }
    }
    chosen
}

/// Depth-first 0/1 knapsack with a fractional upper bound. Exact.
pub fn exact_portfolio(candidates: &[Candidate], capacity: f64) -> Vec<CourseIdx> {
    let mut items: Vec<&Candidate> = candidates.iter().filter(|c| c.utility > 0.0).collect();
    items.sort_by(|a, b| {
        (b.utility / b.workload)
            .total_cmp(&(a.utility / a.workload))
            .then(a.course.cmp(&b.course))
    });

    struct Search<'a> {
        items: Vec<&'a Candidate>,
        capacity: f64,
        best_value: f64,
        best: Vec<usize>,
        current: Vec<usize>,
    }

    impl Search<'_> {
        fn bound(&self, from: usize, load: f64, value: f64) -> f64 {
            let mut room = self.capacity + CAPACITY_EPS - load;
            let mut bound = value;
            for it in &self.items[from..] {
                if it.workload <= room {
                    room -= it.workload;
                    bound += it.utility;
                } else {
                    bound += it.utility * room / it.workload;
                    break;
                }
            }
            bound
        }

        fn go(&mut self, i: usize, load: f64, value: f64) {
            if value > self.best_value {
                self.best_value = value;
                self.best = self.current.clone();
            }
            if i == self.items.len() || self.bound(i, load, value) <= self.best_value {
                return;
            }
            let it = self.items[i];
            if load + it.workload <= self.capacity + CAPACITY_EPS {
                self.current.push(i);
                self.go(i + 1, load + it.workload, value + it.utility);
                self.current.pop();
            }
            self.go(i + 1, load, value);
        }
    }

    let mut s = Search {
        items,
        capacity,
        best_value: 0.0,
        best: Vec::new(),
        current: Vec::new(),
    };
    s.go(0, 0.0, 0.0);
    s.best.iter().map(|&i| s.items[i].course).collect()
}

/// Picks up to `slots` Regular courses by the agent's own utility, ties by course id.
/// One noise draw per Regular course, in course-id order.
pub fn select_exams<R: Rng + ?Sized>(
    ctx: &DecisionContext<'_>,
    statuses: &[CourseStatus],
    regular: &[CourseIdx],
    slots: u32,
    rng: &mut R,
) -> Vec<CourseIdx> {
    let noises: Vec<f64> = regular.iter().map(|_| ctx.draw_noise(rng)).collect();
    rank_exams(ctx, statuses, regular, &noises, slots)
}

/// Deterministic core of [`select_exams`]; `noises[i]` belongs to `regular[i]`.
pub fn rank_exams(
    ctx: &DecisionContext<'_>,
    statuses: &[CourseStatus],
    regular: &[CourseIdx],
    noises: &[f64],
    slots: u32,
) -> Vec<CourseIdx> {
    let mut scored: Vec<(f64, CourseIdx)> = regular
        .iter()
        .zip(noises)
        .map(|(&c, &n)| (ctx.utility(c, &statuses[c], n), c))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<CourseIdx> = scored.into_iter().take(slots as usize).map(|(_, c)| c).collect();
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::OfferedParity;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn archetype(tau: u8, capacity: f64, backlog: u32) -> Archetype {
        Archetype {
            id: "T".into(),
            planning_horizon: tau,
            base_ability: 0.5,
            initial_belonging: 0.6,
            stress_reactivity: 0.1,
            effort_capacity: capacity,
            max_final_backlog: backlog,
            population_weight: 1.0,
        }
    }

    /// Exhaustive reference over all 2^n subsets.
    fn brute_force(candidates: &[Candidate], capacity: f64) -> f64 {
        let n = candidates.len();
        let mut best = 0.0f64;
        for mask in 0u32..(1 << n) {
            let (mut w, mut u) = (0.0, 0.0);
            for (i, c) in candidates.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    w += c.workload;
                    u += c.utility;
                }
            }
            if w <= capacity + CAPACITY_EPS && u > best {
                best = u;
            }
        }
        best
    }

    fn cand(course: usize, workload: f64, utility: f64) -> Candidate {
        Candidate {
            course,
            utility,
            workload,
        }
    }

    #[test]
    fn strategic_formula() {
        let c = CourseParams::new("x", 0.5, 2.0, 0.7, 2.0);
        let w = UtilityWeights::default();
        let u = utility_strategic(&c, true, 1, &w, 0.0);
        assert!((u - (2.0 / 1.1 + 1.5 - 0.25)).abs() < 1e-12);
        assert!((u - 3.0681818181818183).abs() < 1e-9);
        let hi = utility_strategic(&c, true, 1, &w, 0.1);
        let lo = utility_strategic(&c, true, 1, &w, -0.1);
        assert!((hi - lo - 0.2).abs() < 1e-12);
    }

    #[test]
    fn myopic_formula() {
        let w2 = CourseParams::new("x", 0.5, 2.0, 0.7, 2.0);
        assert!((utility_myopic(&w2, 0.0) - 1.0).abs() < 1e-12);
        let easiest = CourseParams::new("y", 0.3, 1.5, 0.7, 2.0);
        assert!((utility_myopic(&easiest, 0.0) - 2.2222222222222223).abs() < 1e-9);
    }

    #[test]
    fn portfolio_examples() {
        assert_eq!(best_portfolio(&[cand(0, 3.0, 2.0), cand(1, 3.0, 1.9)], 3.0), vec![0]);
        assert_eq!(
            best_portfolio(&[cand(0, 2.0, 1.0), cand(1, 2.0, 1.0), cand(2, 2.0, 1.0)], 14.0),
            vec![0, 1, 2]
        );
        let four = [
            cand(0, 3.0, 1.2),
            cand(1, 2.5, 1.4),
            cand(2, 3.5, 2.1),
            cand(3, 2.0, 0.9),
        ];
        let chosen = best_portfolio(&four, 6.0);
        assert_eq!(chosen.len(), 2);
        assert!((portfolio_value(&four, &chosen) - brute_force(&four, 6.0)).abs() < 1e-12);
    }

    #[test]
    fn greedy_fallback_is_density_ordered() {
        // densities: 0 -> 1.0, 1 -> 0.8, 2 -> 0.5, 3 -> 2.0
        let items = [
            cand(0, 2.0, 2.0),
            cand(1, 2.5, 2.0),
            cand(2, 3.0, 1.5),
            cand(3, 1.5, 3.0),
        ];
        assert_eq!(greedy_portfolio(&items, 4.0), vec![3, 0]);
        assert_eq!(greedy_portfolio(&items, 6.0), vec![3, 0, 1]);
        let many: Vec<Candidate> = (0..25).map(|i| cand(i, 2.0, 1.0 + i as f64 * 0.01)).collect();
        let chosen = best_portfolio(&many, 8.0);
        assert_eq!(chosen, vec![21, 22, 23, 24]);
    }

    proptest! {
        #[test]
        fn exact_matches_brute_force(
            items in proptest::collection::vec((1.5f64..3.5, -0.5f64..3.0), 0..12),
            capacity in 8.0f64..14.0,
        ) {
            let cands: Vec<Candidate> = items
                .iter()
                .enumerate()
                .map(|(i, &(w, u))| cand(i, w, u))
                .collect();
            let chosen = best_portfolio(&cands, capacity);
            let load: f64 = cands.iter().filter(|c| chosen.contains(&c.course)).map(|c| c.workload).sum();
            prop_assert!(load <= capacity + CAPACITY_EPS);
            prop_assert!((portfolio_value(&cands, &chosen) - brute_force(&cands, capacity)).abs() < 1e-9);
        }
    }

    fn curriculum() -> Curriculum {
        Curriculum::new(vec![
            CourseParams::new("a", 0.5, 2.0, 0.7, 2.0),
            CourseParams::new("b", 0.4, 2.0, 0.7, 2.0),
            CourseParams::new("c", 0.6, 3.0, 0.7, 2.0),
            CourseParams::new("d", 0.5, 2.0, 0.7, 2.0).with_prerequisites(&["a"]),
            CourseParams::new("e", 0.5, 2.0, 0.7, 2.0).with_parity(OfferedParity::Even),
        ])
        .unwrap()
    }

    #[test]
    fn fresh_agent_sees_only_roots_offered_now() {
        let g = curriculum();
        let cal = PhaseCalendar::default();
        let st = vec![CourseStatus::default(); g.len()];
        let f = feasible_set(&st, &archetype(0, 10.0, 2), &g, 0, &cal, |_| true);
        assert_eq!(f, vec![0, 1, 2]);
        let f = feasible_set(&st, &archetype(0, 10.0, 2), &g, 4, &cal, |_| true);
        assert_eq!(f, vec![0, 1, 2, 4]);
    }

    #[test]
    fn backlog_blocks_new_enrolments_but_keeps_continuing() {
        let g = curriculum();
        let cal = PhaseCalendar::default();
        // a open, b enrolled, c and d regular, e open but even-semester only
        let mut st = vec![CourseStatus::default(); g.len()];
        st[1].state = CourseState::Enrolled;
        st[2] = regular(2);
        st[3] = regular(1);
        let arch = archetype(0, 10.0, 2);
        // 2 pending finals == backlog 2: new enrolment allowed
        assert_eq!(feasible_set(&st, &arch, &g, 0, &cal, |_| true), vec![0, 1]);
        // 3 pending finals > backlog 2: only the Enrolled course remains
        let mut extra = st.clone();
        extra[4] = regular(2);
        assert_eq!(feasible_set(&extra, &arch, &g, 0, &cal, |_| true), vec![1]);
        // a full course excludes a new enrolment but not a continuing one
        assert_eq!(feasible_set(&st, &arch, &g, 0, &cal, |c| c > 1), vec![1]);
    }

    fn regular(ttl: u32) -> CourseStatus {
        CourseStatus {
            state: CourseState::Regular,
            ttl,
            ..Default::default()
        }
    }

    #[test]
    fn strategic_sits_most_urgent_first() {
        let g = curriculum();
        let w = UtilityWeights::default();
        let arch = archetype(1, 10.0, 6);
        let ctx = DecisionContext {
            curriculum: &g,
            archetype: &arch,
            weights: &w,
            t_exp: 2,
            bridging: false,
        };
        let mut st = vec![CourseStatus::default(); g.len()];
        st[0] = regular(2);
        st[1] = regular(2);
        st[2] = regular(1);
        let chosen = rank_exams(&ctx, &st, &[0, 1, 2], &[0.0; 3], 1);
        assert_eq!(chosen, vec![2]);
        assert_eq!(rank_exams(&ctx, &st, &[0, 1, 2], &[0.0; 3], 5), vec![0, 1, 2]);
    }

    #[test]
    fn myopic_sits_the_easy_course_and_risks_expiry() {
        let g = curriculum();
        let w = UtilityWeights::default();
        let arch = archetype(0, 10.0, 2);
        let ctx = DecisionContext {
            curriculum: &g,
            archetype: &arch,
            weights: &w,
            t_exp: 2,
            bridging: false,
        };
        let mut st = vec![CourseStatus::default(); g.len()];
        st[0] = regular(1); // harder (0.5 * 2.0)
        st[1] = regular(2); // easier (0.4 * 2.0)
        assert_eq!(rank_exams(&ctx, &st, &[0, 1], &[0.0; 2], 1), vec![1]);
    }

    #[test]
    fn myopic_choice_is_ttl_blind() {
        let g = curriculum();
        let w = UtilityWeights::default();
        let arch = archetype(0, 10.0, 2);
        let ctx = DecisionContext {
            curriculum: &g,
            archetype: &arch,
            weights: &w,
            t_exp: 2,
            bridging: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let noises: Vec<f64> = (0..3).map(|_| rng.random_range(-0.3..0.3)).collect();
            let mut st = vec![CourseStatus::default(); g.len()];
            let ttls = [1, 2, 3];
            for i in 0..3 {
                st[i] = regular(ttls[i]);
            }
            let base = rank_exams(&ctx, &st, &[0, 1, 2], &noises, 1);
            for i in 0..3 {
                st[i] = regular(ttls[(i + 1) % 3]);
            }
            assert_eq!(rank_exams(&ctx, &st, &[0, 1, 2], &noises, 1), base);
        }
    }

    #[test]
    fn lower_ttl_never_lowers_strategic_rank() {
        let g = curriculum();
        let w = UtilityWeights::default();
        for tau in [1u8, 2] {
            let arch = archetype(tau, 10.0, 6);
            let ctx = DecisionContext {
                curriculum: &g,
                archetype: &arch,
                weights: &w,
                t_exp: 4,
                bridging: false,
            };
            for ttl in 2..=4u32 {
                let s_hi = regular(ttl);
                let s_lo = regular(ttl - 1);
                assert!(
                    ctx.utility(0, &s_lo, 0.0) > ctx.utility(0, &s_hi, 0.0),
                    "tau {tau} ttl {ttl}"
                );
            }
        }
    }

    #[test]
    fn bridging_bonus_applies_to_expired_only() {
        let g = curriculum();
        let w = UtilityWeights::default();
        let arch = archetype(0, 10.0, 2);
        let on = DecisionContext {
            curriculum: &g,
            archetype: &arch,
            weights: &w,
            t_exp: 2,
            bridging: true,
        };
        let off = DecisionContext { bridging: false, ..on };
        let expired = CourseStatus {
            state: CourseState::Expired,
            ..Default::default()
        };
        assert!((on.utility(0, &expired, 0.0) - off.utility(0, &expired, 0.0) - 1.5).abs() < 1e-12);
        let null = CourseStatus::default();
        assert_eq!(on.utility(0, &null, 0.0), off.utility(0, &null, 0.0));
    }

    #[test]
    fn selection_is_deterministic_for_a_seed() {
        let g = curriculum();
        let w = UtilityWeights::default();
        let arch = archetype(2, 5.0, 6);
        let ctx = DecisionContext {
            curriculum: &g,
            archetype: &arch,
            weights: &w,
            t_exp: 2,
            bridging: false,
        };
        let st = vec![CourseStatus::default(); g.len()];
        let a = select_portfolio(&ctx, &st, &[0, 1, 2], &mut ChaCha8Rng::seed_from_u64(9));
        let b = select_portfolio(&ctx, &st, &[0, 1, 2], &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        let load: f64 = a.iter().map(|&c| g.course(c).workload).sum();
        assert!(load <= 5.0);
    }
}
