//! Per agent-course regularity state machine.
//!
//! Legal paths: `Null -> Enrolled -> Regular -> {Credited | Expired}` and
//! `Expired -> Enrolled`. TTL is only meaningful while Regular; it is set on
//! entering Regular and decays once per examination window.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub enum CourseState {
    #[default]
    Null,
    Enrolled,
    Regular,
    Credited,
    Expired,
}

impl CourseState {
    pub const ALL: [CourseState; 5] = [
        CourseState::Null,
        CourseState::Enrolled,
        CourseState::Regular,
        CourseState::Credited,
        CourseState::Expired,
    ];
}

impl fmt::Display for CourseState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("illegal transition: cannot {op} a course in state {from}")]
pub struct IllegalTransition {
    pub from: CourseState,
    pub op: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CourseStatus {
    pub state: CourseState,
    pub ttl: u32,
    pub learning: f64,
    pub exam_failures: u32,
    pub enrolment_count: u32,
}

impl CourseStatus {
    pub fn is_pending_final(&self) -> bool {
        self.state == CourseState::Regular
    }
}

/// `Null | Expired -> Enrolled`. Re-enrolment wipes accumulated learning.
pub fn enroll(status: CourseStatus) -> Result<CourseStatus, IllegalTransition> {
    match status.state {
        CourseState::Null | CourseState::Expired => Ok(CourseStatus {
            state: CourseState::Enrolled,
            ttl: 0,
            learning: 0.0,
            enrolment_count: status.enrolment_count + 1,
            ..status
        }),
        from => Err(IllegalTransition { from, op: "enroll" }),
    }
}

/// `Enrolled -> Regular` with a fresh TTL. The learning threshold is the caller's job.
pub fn regularize(status: CourseStatus, t_exp: u32) -> Result<CourseStatus, IllegalTransition> {
    match status.state {
        CourseState::Enrolled => Ok(CourseStatus {
            state: CourseState::Regular,
            ttl: t_exp,
            ..status
        }),
        from => Err(IllegalTransition { from, op: "regularize" }),
    }
}

pub fn decay_ttl(status: CourseStatus, phase_is_exam_window: bool) -> CourseStatus {
    if status.state == CourseState::Regular && phase_is_exam_window {
        CourseStatus {
            ttl: status.ttl.saturating_sub(1),
            ..status
        }
    } else {
        status
    }
}

/// Looks only at state and TTL; learning progress never prevents expiry.
pub fn check_expiry(status: CourseStatus) -> (CourseStatus, bool) {
    if status.state == CourseState::Regular && status.ttl == 0 {
        (
            CourseStatus {
                state: CourseState::Expired,
                ..status
            },
            true,
        )
    } else {
        (status, false)
    }
}

pub fn credit(status: CourseStatus) -> Result<CourseStatus, IllegalTransition> {
    match status.state {
        CourseState::Regular => Ok(CourseStatus {
            state: CourseState::Credited,
            ttl: 0,
            ..status
        }),
        from => Err(IllegalTransition { from, op: "credit" }),
    }
}
