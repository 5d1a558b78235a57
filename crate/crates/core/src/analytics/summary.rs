//! Aggregation of terminal records into the global, per-archetype, expiry and
//! terminal-state tables.
//!
//! [`Accumulator`] keeps only integer counts plus the raw terminal stress and
//! belonging values, which are sorted before summation. Merging two
//! accumulators in any order therefore yields bit-identical tables.

use std::collections::BTreeMap;

use super::stats::{bonferroni_threshold, bootstrap_ci, chi_square_independence, kruskal_wallis, quantile_sorted};
use super::survival::{kaplan_meier_counts, SurvivalCurve};
use super::AnalyticsError;
use crate::engine::{ExperimentResult, TerminalRecord};
use crate::population::{DropoutCause, Outcome};

#[derive(Debug, Clone, Default, PartialEq)]
struct ArchetypeAcc {
    tau: u8,
    n: u64,
    dropouts: u64,
    graduated: u64,
    causes: [u64; 3],
    expiries: BTreeMap<u32, u64>,
    times: BTreeMap<u32, u64>,
    pending_finals: u64,
    stress: Vec<f64>,
    belonging: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Accumulator {
    archetypes: BTreeMap<String, ArchetypeAcc>,
    /// seed -> (agents, dropouts)
    per_seed: BTreeMap<u64, (u64, u64)>,
    /// time -> (events, censored)
    survival: BTreeMap<u32, (u64, u64)>,
    dropout_times: BTreeMap<u32, u64>,
    /// (sum, count) of expiries among dropouts and among actives.
    expiries_dropout: (u64, u64),
    expiries_active: (u64, u64),
    horizon: u32,
}

fn cause_index(c: DropoutCause) -> usize {
    match c {
        DropoutCause::Normative => 0,
        DropoutCause::Academic => 1,
        DropoutCause::Other => 2,
    }
}

impl Accumulator {
    pub fn add(&mut self, r: &TerminalRecord) {
        let a = self.archetypes.entry(r.archetype.clone()).or_default();
        a.tau = r.planning_horizon;
        a.n += 1;
        *a.expiries.entry(r.expiries).or_default() += 1;
        *a.times.entry(r.time).or_default() += 1;
        a.pending_finals += u64::from(r.pending_finals);
        a.stress.push(r.stress);
        a.belonging.push(r.belonging);
        let seed = self.per_seed.entry(r.seed).or_default();
        seed.0 += 1;
        let surv = self.survival.entry(r.time).or_default();
        match r.outcome {
            Outcome::Dropout(c) => {
                a.dropouts += 1;
                a.causes[cause_index(c)] += 1;
                seed.1 += 1;
                surv.0 += 1;
                *self.dropout_times.entry(r.time).or_default() += 1;
                self.expiries_dropout.0 += u64::from(r.expiries);
                self.expiries_dropout.1 += 1;
            }
            Outcome::Graduated => {
                a.graduated += 1;
                surv.1 += 1;
            }
            Outcome::Active => {
                surv.1 += 1;
                self.expiries_active.0 += u64::from(r.expiries);
                self.expiries_active.1 += 1;
                self.horizon = self.horizon.max(r.time);
            }
        }
    }

    /// Horizon to report when it cannot be read off censored records.
    pub fn set_horizon(&mut self, horizon: u32) {
        self.horizon = self.horizon.max(horizon);
    }

    pub fn add_experiment(&mut self, experiment: &ExperimentResult) {
        for r in experiment.records() {
            self.add(r);
        }
    }

    pub fn merge(&mut self, other: Accumulator) {
        for (id, o) in other.archetypes {
            let a = self.archetypes.entry(id).or_default();
            a.tau = o.tau;
            a.n += o.n;
            a.dropouts += o.dropouts;
            a.graduated += o.graduated;
            for i in 0..3 {
                a.causes[i] += o.causes[i];
            }
            for (k, v) in o.expiries {
                *a.expiries.entry(k).or_default() += v;
            }
            for (k, v) in o.times {
                *a.times.entry(k).or_default() += v;
            }
            a.pending_finals += o.pending_finals;
            a.stress.extend(o.stress);
            a.belonging.extend(o.belonging);
        }
        for (k, v) in other.per_seed {
            let e = self.per_seed.entry(k).or_default();
            e.0 += v.0;
            e.1 += v.1;
        }
        for (k, v) in other.survival {
            let e = self.survival.entry(k).or_default();
            e.0 += v.0;
            e.1 += v.1;
        }
        for (k, v) in other.dropout_times {
            *self.dropout_times.entry(k).or_default() += v;
        }
        self.expiries_dropout.0 += other.expiries_dropout.0;
        self.expiries_dropout.1 += other.expiries_dropout.1;
        self.expiries_active.0 += other.expiries_active.0;
        self.expiries_active.1 += other.expiries_active.1;
        self.horizon = self.horizon.max(other.horizon);
    }

    pub fn finish(&self, analytics_seed: u64, bootstrap_draws: usize) -> Result<SummaryTables, AnalyticsError> {
        if self.per_seed.is_empty() {
            return Err(AnalyticsError::EmptyInput);
        }
        let n: u64 = self.archetypes.values().map(|a| a.n).sum();
        let dropouts: u64 = self.archetypes.values().map(|a| a.dropouts).sum();
        let graduated: u64 = self.archetypes.values().map(|a| a.graduated).sum();
        let mut causes = [0u64; 3];
        let mut expiry_hist: BTreeMap<u32, u64> = BTreeMap::new();
        for a in self.archetypes.values() {
            for (total, k) in causes.iter_mut().zip(a.causes) {
                *total += k;
            }
            for (&k, &v) in &a.expiries {
                *expiry_hist.entry(k).or_default() += v;
            }
        }
        let share = |k: u64| if dropouts > 0 { k as f64 / dropouts as f64 } else { 0.0 };
        let (sum_e, sum_e2) = expiry_hist.iter().fold((0u64, 0u64), |(s, s2), (&k, &v)| {
            (s + u64::from(k) * v, s2 + u64::from(k) * u64::from(k) * v)
        });
        let mean_expiries = sum_e as f64 / n as f64;
        let sd_expiries = if n > 1 {
            ((sum_e2 as f64 - n as f64 * mean_expiries * mean_expiries) / (n - 1) as f64)
                .max(0.0)
                .sqrt()
        } else {
            0.0
        };
        let rates: Vec<f64> = self.per_seed.values().map(|&(m, d)| d as f64 / m as f64).collect();
        let dropout_ci = if rates.len() >= 2 {
            Some(bootstrap_ci(&rates, bootstrap_draws, 0.95, analytics_seed)?)
        } else {
            None
        };
        let ratio = |(s, c): (u64, u64)| (c > 0).then(|| s as f64 / c as f64);

        let archetypes: Vec<ArchetypeSummary> = self
            .archetypes
            .iter()
            .map(|(id, a)| {
                let active = a.n - a.dropouts - a.graduated;
                let e_sum: u64 = a.expiries.iter().map(|(&k, &v)| u64::from(k) * v).sum();
                ArchetypeSummary {
                    archetype: id.clone(),
                    tau: a.tau,
                    n: a.n,
                    dropout_rate: a.dropouts as f64 / a.n as f64,
                    graduation_rate: a.graduated as f64 / a.n as f64,
                    active_rate: active as f64 / a.n as f64,
                    normative_share: (a.dropouts > 0).then(|| a.causes[0] as f64 / a.dropouts as f64),
                    mean_expiries: e_sum as f64 / a.n as f64,
                }
            })
            .collect();
        let dropout_range = archetypes.iter().fold(None, |acc: Option<(f64, f64)>, a| {
            Some(acc.map_or((a.dropout_rate, a.dropout_rate), |(lo, hi)| {
                (lo.min(a.dropout_rate), hi.max(a.dropout_rate))
            }))
        });

        let global = GlobalSummary {
            replications: self.per_seed.len() as u64,
            agents_per_run: n / self.per_seed.len() as u64,
            total_agents: n,
            horizon: self.horizon,
            dropout_rate: dropouts as f64 / n as f64,
            dropout_ci,
            graduation_rate: graduated as f64 / n as f64,
            active_rate: (n - dropouts - graduated) as f64 / n as f64,
            normative_share: share(causes[0]),
            academic_share: share(causes[1]),
            other_share: share(causes[2]),
            dropouts,
            mean_expiries,
            sd_expiries,
            mean_expiries_dropouts: ratio(self.expiries_dropout),
            mean_expiries_active: ratio(self.expiries_active),
            median_time_to_event: median_from_counts(&self.dropout_times),
            archetype_dropout_range: dropout_range,
        };

        let expiry_histogram = expiry_hist
            .iter()
            .map(|(&k, &v)| HistogramBin {
                expiries: k,
                count: v,
                share: v as f64 / n as f64,
            })
            .collect();
        let expiry_boxplots = self
            .archetypes
            .iter()
            .map(|(id, a)| five_numbers(id, &a.expiries))
            .collect();
        let psych = self
            .archetypes
            .iter()
            .map(|(id, a)| PsychRow {
                archetype: id.clone(),
                pending_finals: a.pending_finals as f64 / a.n as f64,
                stress: sorted_mean(&a.stress),
                belonging: sorted_mean(&a.belonging),
            })
            .collect();
        Ok(SummaryTables {
            global,
            archetypes,
            expiry_histogram,
            expiry_boxplots,
            psych,
            survival: kaplan_meier_counts(&self.survival)?,
        })
    }

    /// Kruskal-Wallis on expiries and on time-to-event across archetypes,
    /// chi-square on the archetype-by-dropout table and Bonferroni-flagged
    /// pairwise chi-squares.
    pub fn tests(&self, alpha: f64) -> Vec<TestRow> {
        let mut rows = Vec::new();
        let ids: Vec<&String> = self.archetypes.keys().collect();
        let expand = |counts: &BTreeMap<u32, u64>| -> Vec<f64> {
            counts
                .iter()
                .flat_map(|(&k, &v)| std::iter::repeat_n(f64::from(k), v as usize))
                .collect()
        };
        let expiries: Vec<Vec<f64>> = self.archetypes.values().map(|a| expand(&a.expiries)).collect();
        let times: Vec<Vec<f64>> = self.archetypes.values().map(|a| expand(&a.times)).collect();
        let all = ids.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("|");
        let push =
            |rows: &mut Vec<TestRow>, test: &str, groups: String, r: Result<_, AnalyticsError>, threshold: f64| {
                let (statistic, df, p_value) = match r {
                    Ok(super::stats::TestResult { statistic, df, p_value }) => (statistic, df, p_value),
                    Err(_) => (f64::NAN, f64::NAN, f64::NAN),
                };
                rows.push(TestRow {
                    test: test.to_string(),
                    groups,
                    statistic,
                    df,
                    p_value,
                    alpha: threshold,
                    significant: p_value < threshold,
                });
            };
        push(
            &mut rows,
            "kruskal_wallis_expiries",
            all.clone(),
            kruskal_wallis(&expiries),
            alpha,
        );
        push(
            &mut rows,
            "kruskal_wallis_time_to_event",
            all.clone(),
            kruskal_wallis(&times),
            alpha,
        );
        let table: Vec<Vec<f64>> = self
            .archetypes
            .values()
            .map(|a| vec![a.dropouts as f64, (a.n - a.dropouts) as f64])
            .collect();
        push(
            &mut rows,
            "chi_square_dropout",
            all,
            chi_square_independence(&table),
            alpha,
        );
        let pairs = ids.len() * ids.len().saturating_sub(1) / 2;
        if pairs > 0 {
            let threshold = bonferroni_threshold(alpha, pairs);
            for i in 0..ids.len() {
                for j in i + 1..ids.len() {
                    push(
                        &mut rows,
                        "chi_square_dropout_pairwise",
                        format!("{}|{}", ids[i], ids[j]),
                        chi_square_independence(&[table[i].clone(), table[j].clone()]),
                        threshold,
                    );
                }
            }
        }
        rows
    }

    /// Per-seed dropout rates, by seed.
    pub fn seed_dropout_rates(&self) -> BTreeMap<u64, f64> {
        self.per_seed
            .iter()
            .map(|(&s, &(n, d))| (s, d as f64 / n as f64))
            .collect()
    }
}

fn sorted_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

fn median_from_counts(counts: &BTreeMap<u32, u64>) -> Option<f64> {
    let n: u64 = counts.values().sum();
    if n == 0 {
        return None;
    }
    let nth = |k: u64| {
        let mut seen = 0;
        for (&t, &c) in counts {
            seen += c;
            if seen > k {
                return f64::from(t);
            }
        }
        unreachable!("k < n")
    };
    Some(if n % 2 == 1 {
        nth(n / 2)
    } else {
        (nth(n / 2 - 1) + nth(n / 2)) / 2.0
    })
}

fn five_numbers(id: &str, counts: &BTreeMap<u32, u64>) -> FiveNumber {
    let values: Vec<f64> = counts
        .iter()
        .flat_map(|(&k, &v)| std::iter::repeat_n(f64::from(k), v as usize))
        .collect();
    FiveNumber {
        archetype: id.to_string(),
        min: values[0],
        q1: quantile_sorted(&values, 0.25),
        median: quantile_sorted(&values, 0.5),
        q3: quantile_sorted(&values, 0.75),
        max: values[values.len() - 1],
    }
}

pub fn summarize(
    experiment: &ExperimentResult,
    analytics_seed: u64,
    bootstrap_draws: usize,
) -> Result<SummaryTables, AnalyticsError> {
    let mut acc = Accumulator::default();
    acc.add_experiment(experiment);
    acc.finish(analytics_seed, bootstrap_draws)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSummary {
    pub replications: u64,
    pub agents_per_run: u64,
    pub total_agents: u64,
    pub horizon: u32,
    pub dropout_rate: f64,
    pub dropout_ci: Option<(f64, f64)>,
    pub graduation_rate: f64,
    pub active_rate: f64,
    pub normative_share: f64,
    pub academic_share: f64,
    pub other_share: f64,
    pub dropouts: u64,
    pub mean_expiries: f64,
    pub sd_expiries: f64,
    pub mean_expiries_dropouts: Option<f64>,
    pub mean_expiries_active: Option<f64>,
    /// Over dropouts only; `None` when nobody dropped out.
    pub median_time_to_event: Option<f64>,
    pub archetype_dropout_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchetypeSummary {
    pub archetype: String,
    pub tau: u8,
    pub n: u64,
    pub dropout_rate: f64,
    pub graduation_rate: f64,
    pub active_rate: f64,
    /// Normative dropouts over all dropouts; `None` without dropouts.
    pub normative_share: Option<f64>,
    pub mean_expiries: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub expiries: u32,
    pub count: u64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiveNumber {
    pub archetype: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsychRow {
    pub archetype: String,
    pub pending_finals: f64,
    pub stress: f64,
    pub belonging: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRow {
    pub test: String,
    pub groups: String,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTables {
    pub global: GlobalSummary,
    pub archetypes: Vec<ArchetypeSummary>,
    pub expiry_histogram: Vec<HistogramBin>,
    pub expiry_boxplots: Vec<FiveNumber>,
    pub psych: Vec<PsychRow>,
    pub survival: SurvivalCurve,
}
