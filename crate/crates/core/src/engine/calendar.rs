//! Phase calendar: semesters of fixed length with a teaching/exam mask.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCalendar {
    pub phases_per_semester: u32,
    /// One entry per phase of a semester; `true` marks an examination window.
    pub exam_window_pattern: Vec<bool>,
    pub horizon: u32,
}

impl Default for PhaseCalendar {
    fn default() -> Self {
        Self {
            phases_per_semester: 4,
            exam_window_pattern: vec![false, false, true, true],
            horizon: 61,
        }
    }
}

impl PhaseCalendar {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.horizon == 0 {
            return Err(("horizon", "0".into()));
        }
        if self.phases_per_semester == 0 {
            return Err(("phases_per_semester", "0".into()));
        }
        if self.exam_window_pattern.len() != self.phases_per_semester as usize {
            return Err((
                "exam_window_pattern",
                format!(
                    "{} entries for {} phases per semester",
                    self.exam_window_pattern.len(),
                    self.phases_per_semester
                ),
            ));
        }
        if !self.exam_window_pattern.iter().any(|&e| e) {
            return Err(("exam_window_pattern", "no examination window".into()));
        }
        Ok(())
    }

    /// 1-based semester number of a phase.
    pub fn semester_of(&self, phase: u32) -> u32 {
        phase / self.phases_per_semester + 1
    }

    pub fn is_odd_semester(&self, phase: u32) -> bool {
        self.semester_of(phase) % 2 == 1
    }

    pub fn is_semester_start(&self, phase: u32) -> bool {
        phase.is_multiple_of(self.phases_per_semester)
    }

    pub fn is_exam_window(&self, phase: u32) -> bool {
        self.exam_window_pattern[(phase % self.phases_per_semester) as usize]
    }

    pub fn exam_window_count(&self) -> u32 {
        (0..self.horizon).filter(|&p| self.is_exam_window(p)).count() as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_calendar() {
        let c = PhaseCalendar::default();
        c.validate().unwrap();
        assert_eq!(c.horizon, 61);
        let exams: Vec<u32> = (0..8).filter(|&p| c.is_exam_window(p)).collect();
        assert_eq!(exams, vec![2, 3, 6, 7]);
        // 15 full semesters of 2 windows, then one teaching phase
        assert_eq!(c.exam_window_count(), 30);
        assert_eq!(c.semester_of(60), 16);
        assert!(c.is_odd_semester(0) && !c.is_odd_semester(4) && c.is_odd_semester(8));
    }

    #[test]
    fn rejects_bad_masks() {
        let mut c = PhaseCalendar {
            exam_window_pattern: vec![false; 4],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.exam_window_pattern = vec![true; 3];
        assert!(c.validate().is_err());
        c = PhaseCalendar {
            horizon: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
