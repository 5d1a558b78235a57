//! Product-limit survival estimate over phase-valued times.

use std::collections::BTreeMap;

use super::AnalyticsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalPoint {
    pub time: u32,
    pub at_risk: u64,
    pub events: u64,
    pub censored: u64,
    pub survival: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    /// Starts at time 0 with survival 1, then one point per distinct observed time.
    pub points: Vec<SurvivalPoint>,
}

impl SurvivalCurve {
    /// Right-continuous step value at `t`.
    pub fn at(&self, t: u32) -> f64 {
        self.points
            .iter()
            .take_while(|p| p.time <= t)
            .last()
            .map_or(1.0, |p| p.survival)
    }
}

/// `(time, is_event)` pairs; `false` marks a censored observation.
pub fn kaplan_meier(records: &[(u32, bool)]) -> Result<SurvivalCurve, AnalyticsError> {
    let mut counts: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    for &(t, event) in records {
        let e = counts.entry(t).or_default();
        if event {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    kaplan_meier_counts(&counts)
}

/// Same estimator from `time -> (events, censored)` counts.
pub fn kaplan_meier_counts(counts: &BTreeMap<u32, (u64, u64)>) -> Result<SurvivalCurve, AnalyticsError> {
    let total: u64 = counts.values().map(|(e, c)| e + c).sum();
    if total == 0 {
        return Err(AnalyticsError::EmptyInput);
    }
    let mut points = vec![SurvivalPoint {
        time: 0,
        at_risk: total,
        events: 0,
        censored: 0,
        survival: 1.0,
    }];
    let mut at_risk = total;
    let mut survival = 1.0;
    for (&time, &(events, censored)) in counts {
        if events > 0 {
            survival *= 1.0 - events as f64 / at_risk as f64;
        }
        if time == 0 {
            points[0] = SurvivalPoint {
                time,
                at_risk,
                events,
                censored,
                survival,
            };
        } else {
            points.push(SurvivalPoint {
                time,
                at_risk,
                events,
                censored,
                survival,
            });
        }
        at_risk -= events + censored;
    }
    Ok(SurvivalCurve { points })
}
