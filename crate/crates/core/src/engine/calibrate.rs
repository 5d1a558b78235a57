//! Coordinate-descent fit of archetype ability, belonging and stress
//! reactivity to per-archetype dropout and expiry targets.

use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{ConfigError, Simulation};
use crate::population::{Archetype, ABILITY_RANGE, BELONGING_RANGE, STRESS_REACTIVITY_RANGE};

/// Smallest denominator used for relative errors.
pub const RELATIVE_ERROR_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub archetype: String,
    pub dropout_rate: f64,
    pub mean_expiries: f64,
}

pub fn load_targets<R: Read>(reader: R) -> Result<Vec<CalibrationTarget>, ConfigError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    rdr.deserialize()
        .map(|r| r.map_err(|e| ConfigError::invalid("targets", e)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub seeds: Vec<u64>,
    /// Candidate evaluations allowed after the baseline.
    pub max_evaluations: usize,
    /// Initial steps for (mu_abil, b0, sigma_stress).
    pub initial_steps: [f64; 3],
    pub min_step: f64,
    pub jobs: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            seeds: (1..=5).collect(),
            max_evaluations: 300,
            initial_steps: [0.04, 0.04, 0.02],
            min_step: 0.0025,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub archetypes: Vec<Archetype>,
    pub initial_objective: f64,
    pub objective: f64,
    /// Objective after the baseline and after every accepted move.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    /// The evaluation budget ran out before the steps shrank below `min_step`.
    pub budget_exhausted: bool,
}

/// `(dropout_rate, mean_expiries)` for one archetype.
pub type Moments = (f64, f64);

fn relative_sq(value: f64, target: f64) -> f64 {
    let e = (value - target) / target.abs().max(RELATIVE_ERROR_FLOOR);
    e * e
}

pub fn target_error(moments: Moments, target: &CalibrationTarget) -> f64 {
    relative_sq(moments.0, target.dropout_rate) + relative_sq(moments.1, target.mean_expiries)
}

/// Simulated moments per archetype over `seeds`. With `only`, just that
/// archetype's agents are simulated and the other entries are `None`.
pub fn archetype_moments(sim: &Simulation, seeds: &[u64], only: Option<usize>, jobs: usize) -> Vec<Option<Moments>> {
    let k = sim.archetypes().len();
    let per_seed = |&seed: &u64| {
        let world = sim.world_for(seed, |a| only.is_none_or(|o| o == a));
        let result = sim.run_world(world, false);
        let mut acc = vec![(0u64, 0u64, 0u64); k];
        for r in &result.records {
            let idx = sim
                .archetypes()
                .iter()
                .position(|a| a.id == r.archetype)
                .expect("record archetype");
            acc[idx].0 += 1;
            acc[idx].1 += u64::from(r.is_dropout());
            acc[idx].2 += u64::from(r.expiries);
        }
        acc
    };
    let parts: Vec<Vec<(u64, u64, u64)>> = if jobs <= 1 {
        seeds.iter().map(per_seed).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map(|pool| pool.install(|| seeds.par_iter().map(per_seed).collect()))
            .unwrap_or_else(|_| seeds.iter().map(per_seed).collect())
    };
    (0..k)
        .map(|i| {
            let (n, d, e) = parts
                .iter()
                .fold((0, 0, 0), |t, p| (t.0 + p[i].0, t.1 + p[i].1, t.2 + p[i].2));
            (n > 0).then(|| (d as f64 / n as f64, e as f64 / n as f64))
        })
        .collect()
}

fn get(a: &Archetype, p: usize) -> f64 {
    [a.base_ability, a.initial_belonging, a.stress_reactivity][p]
}

fn set(a: &mut Archetype, p: usize, v: f64) {
    let (lo, hi) = [ABILITY_RANGE, BELONGING_RANGE, STRESS_REACTIVITY_RANGE][p];
    let v = v.clamp(lo, hi);
    match p {
        0 => a.base_ability = v,
        1 => a.initial_belonging = v,
        _ => a.stress_reactivity = v,
    }
}

/// Coordinate descent from the simulation's current archetypes. Archetypes are
/// fitted independently (each simulated alone) unless seat caps couple them.
/// Course thresholds stay those of the starting configuration.
pub fn calibrate(
    sim: &Simulation,
    targets: &[CalibrationTarget],
    search: &SearchConfig,
) -> Result<CalibrationResult, ConfigError> {
    if search.seeds.is_empty() {
        return Err(ConfigError::invalid("seeds", "empty"));
    }
    let base = sim.with_archetypes(sim.archetypes().to_vec())?;
    let mut fitted: Vec<(usize, &CalibrationTarget)> = Vec::new();
    for t in targets {
        let idx = base
            .archetypes()
            .iter()
            .position(|a| a.id == t.archetype)
            .ok_or_else(|| ConfigError::invalid("targets", format!("unknown archetype `{}`", t.archetype)))?;
        fitted.push((idx, t));
    }
    let coupled = !base.scenario().course_caps.trim().is_empty();
    let mut archetypes = base.archetypes().to_vec();

    // Per-target error of the current parameters.
    let evaluate = |archs: &[Archetype], only: Option<usize>| -> Result<Vec<f64>, ConfigError> {
        let s = base.with_archetypes(archs.to_vec())?;
        let m = archetype_moments(&s, &search.seeds, only, search.jobs);
        Ok(fitted
            .iter()
            .map(|&(i, t)| m[i].map_or(f64::NAN, |m| target_error(m, t)))
            .collect())
    };

    let mut errors = if coupled {
        evaluate(&archetypes, None)?
    } else {
        let mut e = Vec::with_capacity(fitted.len());
        for (j, &(i, _)) in fitted.iter().enumerate() {
            e.push(evaluate(&archetypes, Some(i))?[j]);
        }
        e
    };
    let total = |e: &[f64]| e.iter().sum::<f64>();
    let initial_objective = total(&errors);
    let mut trace = vec![initial_objective];
    let mut steps: Vec<[f64; 3]> = vec![search.initial_steps; fitted.len()];
    let mut evaluations = 0usize;
    let mut budget_exhausted = false;

    'search: loop {
        let mut active = false;
        for (j, &(i, _)) in fitted.iter().enumerate() {
            if steps[j].iter().all(|&s| s < search.min_step) || errors[j] == 0.0 {
                continue;
            }
            active = true;
            let mut improved = false;
            #[allow(clippy::needless_range_loop)]
            for p in 0..3 {
                for dir in [1.0, -1.0] {
                    let mut candidate = archetypes.clone();
                    set(&mut candidate[i], p, get(&archetypes[i], p) + dir * steps[j][p]);
                    if get(&candidate[i], p) == get(&archetypes[i], p) {
                        continue;
                    }
                    if evaluations >= search.max_evaluations {
                        budget_exhausted = true;
                        break 'search;
                    }
                    evaluations += 1;
                    let new_errors = if coupled {
                        evaluate(&candidate, None)?
                    } else {
                        let mut e = errors.clone();
                        e[j] = evaluate(&candidate, Some(i))?[j];
                        e
                    };
                    if total(&new_errors) < total(&errors) {
                        archetypes = candidate;
                        errors = new_errors;
                        trace.push(total(&errors));
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                for s in &mut steps[j] {
                    *s *= 0.5;
                }
            }
        }
        if !active {
            break;
        }
    }

    Ok(CalibrationResult {
        archetypes,
        initial_objective,
        objective: total(&errors),
        trace,
        evaluations,
        budget_exhausted,
    })
}
