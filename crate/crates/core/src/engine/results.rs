//! Replication outputs and their delimited-text form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::population::{DropoutCause, Outcome, WithdrawalTrigger};

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad record field `{field}`: {value}")]
    Field { field: &'static str, value: String },
}

/// One agent at the end of a replication.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalRecord {
    pub seed: u64,
    pub agent_id: u32,
    pub archetype: String,
    pub planning_horizon: u8,
    pub outcome: Outcome,
    pub trigger: Option<WithdrawalTrigger>,
    /// Phases until the terminal event, or the horizon when censored.
    pub time: u32,
    pub censored: bool,
    pub expiries: u32,
    pub exam_failures: u32,
    pub repeated_failure_courses: u32,
    pub credited: u32,
    pub pending_finals: u32,
    pub stress: f64,
    pub belonging: f64,
    pub semesters_enrolled: u32,
}

impl TerminalRecord {
    pub fn is_dropout(&self) -> bool {
        matches!(self.outcome, Outcome::Dropout(_))
    }

    pub fn cause(&self) -> Option<DropoutCause> {
        match self.outcome {
            Outcome::Dropout(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seed: u64,
    pub agent_id: u32,
    pub phase: u32,
    pub event: &'static str,
    pub course: Option<String>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub seed: u64,
    pub records: Vec<TerminalRecord>,
    pub events: Option<Vec<EventRecord>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    /// Sorted by seed.
    pub replications: Vec<ReplicationResult>,
}

impl ExperimentResult {
    pub fn records(&self) -> impl Iterator<Item = &TerminalRecord> {
        self.replications.iter().flat_map(|r| r.records.iter())
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.replications.iter().map(|r| r.seed).collect()
    }
}

pub const RECORD_COLUMNS: [&str; 17] = [
    "seed",
    "agent_id",
    "archetype",
    "tau",
    "outcome",
    "cause",
    "trigger",
    "time",
    "censored",
    "expiries",
    "exam_failures",
    "repeated_failure_courses",
    "credited",
    "pending_finals",
    "stress",
    "belonging",
    "semesters_enrolled",
];

/// Flat row form of a [`TerminalRecord`], in [`RECORD_COLUMNS`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub seed: u64,
    pub agent_id: u32,
    pub archetype: String,
    pub tau: u8,
    pub outcome: String,
    pub cause: String,
    pub trigger: String,
    pub time: u32,
    pub censored: u8,
    pub expiries: u32,
    pub exam_failures: u32,
    pub repeated_failure_courses: u32,
    pub credited: u32,
    pub pending_finals: u32,
    pub stress: f64,
    pub belonging: f64,
    pub semesters_enrolled: u32,
}

impl From<&TerminalRecord> for Row {
    fn from(r: &TerminalRecord) -> Self {
        Row {
            seed: r.seed,
            agent_id: r.agent_id,
            archetype: r.archetype.clone(),
            tau: r.planning_horizon,
            outcome: r.outcome.label().to_string(),
            cause: r.cause().map_or("", |c| c.as_str()).to_string(),
            trigger: r.trigger.map_or("", |t| t.as_str()).to_string(),
            time: r.time,
            censored: u8::from(r.censored),
            expiries: r.expiries,
            exam_failures: r.exam_failures,
            repeated_failure_courses: r.repeated_failure_courses,
            credited: r.credited,
            pending_finals: r.pending_finals,
            stress: r.stress,
            belonging: r.belonging,
            semesters_enrolled: r.semesters_enrolled,
        }
    }
}

impl TryFrom<Row> for TerminalRecord {
    type Error = ResultsError;

    fn try_from(r: Row) -> Result<Self, ResultsError> {
        let cause = match r.cause.as_str() {
            "" => None,
            "normative" => Some(DropoutCause::Normative),
            "academic" => Some(DropoutCause::Academic),
            "other" => Some(DropoutCause::Other),
            v => {
                return Err(ResultsError::Field {
                    field: "cause",
                    value: v.into(),
                })
            }
        };
        let outcome = match (r.outcome.as_str(), cause) {
            ("active", None) => Outcome::Active,
            ("graduated", None) => Outcome::Graduated,
            ("dropout", Some(c)) => Outcome::Dropout(c),
            (v, _) => {
                return Err(ResultsError::Field {
                    field: "outcome",
                    value: v.into(),
                })
            }
        };
        let trigger = match r.trigger.as_str() {
            "" => None,
            "depletion" => Some(WithdrawalTrigger::Depletion),
            "stagnation" => Some(WithdrawalTrigger::Stagnation),
            "voluntary" => Some(WithdrawalTrigger::Voluntary),
            "exogenous" => Some(WithdrawalTrigger::Exogenous),
            v => {
                return Err(ResultsError::Field {
                    field: "trigger",
                    value: v.into(),
                })
            }
        };
        Ok(TerminalRecord {
            seed: r.seed,
            agent_id: r.agent_id,
            archetype: r.archetype,
            planning_horizon: r.tau,
            outcome,
            trigger,
            time: r.time,
            censored: r.censored != 0,
            expiries: r.expiries,
            exam_failures: r.exam_failures,
            repeated_failure_courses: r.repeated_failure_courses,
            credited: r.credited,
            pending_finals: r.pending_finals,
            stress: r.stress,
            belonging: r.belonging,
            semesters_enrolled: r.semesters_enrolled,
        })
    }
}

pub fn write_records<W: Write>(out: W, records: &[TerminalRecord]) -> Result<(), ResultsError> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(RECORD_COLUMNS)?;
    }
    for r in records {
        w.serialize(Row::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<TerminalRecord>, ResultsError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(RECORD_COLUMNS) {
        return Err(ResultsError::Field {
            field: "header",
            value: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    rdr.deserialize::<Row>()
        .map(|row| TerminalRecord::try_from(row?))
        .collect()
}

pub fn write_events<W: Write>(out: W, events: &[EventRecord]) -> Result<(), ResultsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seed", "agent_id", "phase", "event", "course", "detail"])?;
    for e in events {
        w.write_record([
            e.seed.to_string(),
            e.agent_id.to_string(),
            e.phase.to_string(),
            e.event.to_string(),
            e.course.clone().unwrap_or_default(),
            e.detail.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(outcome: Outcome) -> TerminalRecord {
        TerminalRecord {
            seed: 3,
            agent_id: 7,
            archetype: "PSICO_10".into(),
            planning_horizon: 0,
            outcome,
            trigger: matches!(outcome, Outcome::Dropout(_)).then_some(WithdrawalTrigger::Depletion),
            time: 5,
            censored: outcome.is_active(),
            expiries: 6,
            exam_failures: 2,
            repeated_failure_courses: 0,
            credited: 3,
            pending_finals: 1,
            stress: 0.1 + 0.2,
            belonging: 0.14999999999999997,
            semesters_enrolled: 2,
        }
    }

    #[test]
    fn records_round_trip_exactly() {
        let recs = vec![
            record(Outcome::Dropout(DropoutCause::Normative)),
            record(Outcome::Active),
            record(Outcome::Graduated),
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&RECORD_COLUMNS.join(",")));
        assert_eq!(read_records(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn empty_table_keeps_header() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[]).unwrap();
        assert!(read_records(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn rejects_inconsistent_outcome() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[record(Outcome::Active)]).unwrap();
        let text = String::from_utf8(buf).unwrap().replace(",active,,", ",dropout,,");
        assert!(read_records(text.as_bytes()).is_err());
    }
}
