//! Course catalogue and prerequisite DAG.
//!
//! Courses are stored in ascending id order, and that index is used everywhere
//! else in the crate as the course handle. Any iteration "in course-id order"
//! is therefore a plain index loop.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::engine::PhaseCalendar;
use crate::regime::{CourseState, CourseStatus};

/// Index of a course inside a [`Curriculum`] (position in id order).
pub type CourseIdx = usize;

/// Downstream-count threshold at which a course is treated as a bottleneck.
pub const BOTTLENECK_THRESHOLD: usize = 3;

pub const DIFFICULTY_RANGE: (f64, f64) = (0.3, 0.8);
pub const WORKLOAD_RANGE: (f64, f64) = (1.5, 3.5);
pub const PASS_RATE_RANGE: (f64, f64) = (0.5, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurriculumError {
    #[error("prerequisite cycle detected: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("course `{course}` lists unknown prerequisite `{missing}`")]
    DanglingPrerequisite { course: String, missing: String },
    #[error("course `{course}`: {field} = {value} is out of range")]
    ParameterOutOfRange {
        course: String,
        field: &'static str,
        value: String,
    },
    #[error("unknown course `{0}`")]
    UnknownCourse(String),
    #[error("duplicate course id `{0}`")]
    DuplicateId(String),
    #[error("curriculum has no courses")]
    Empty,
    #[error("malformed curriculum table: {0}")]
    Malformed(String),
}

/// Semesters in which a course can be enrolled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OfferedParity {
    Odd,
    Even,
    All,
}

impl FromStr for OfferedParity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "odd" => Ok(Self::Odd),
            "even" => Ok(Self::Even),
            "all" | "" => Ok(Self::All),
            other => Err(format!("offered_parity must be odd, even or all, got `{other}`")),
        }
    }
}

impl fmt::Display for OfferedParity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Odd => "odd",
            Self::Even => "even",
            Self::All => "all",
        })
    }
}

/// Static parameters of one course.
#[derive(Debug, Clone, PartialEq)]
pub struct CourseParams {
    pub id: String,
    pub name: String,
    pub difficulty: f64,
    /// Course-units of effort required per period of study.
    pub workload: f64,
    pub pass_rate: f64,
    /// Mean periods of study needed to regularise, for a reference student.
    pub reg_time: f64,
    pub prerequisites: Vec<String>,
    pub offered_parity: OfferedParity,
}

impl CourseParams {
    /// A course with no prerequisites, offered every semester.
    pub fn new(id: &str, difficulty: f64, workload: f64, pass_rate: f64, reg_time: f64) -> Self {
        Self {
            id: id.to_string(),
            name: id.to_string(),
            difficulty,
            workload,
            pass_rate,
            reg_time,
            prerequisites: Vec::new(),
            offered_parity: OfferedParity::All,
        }
    }

    pub fn with_prerequisites(mut self, prereqs: &[&str]) -> Self {
        self.prerequisites = prereqs.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_parity(mut self, parity: OfferedParity) -> Self {
        self.offered_parity = parity;
        self
    }

    fn validate(&self) -> Result<(), CurriculumError> {
        let check = |field: &'static str, value: f64, (lo, hi): (f64, f64)| {
            if value.is_finite() && value >= lo && value <= hi {
                Ok(())
            } else {
                Err(CurriculumError::ParameterOutOfRange {
                    course: self.id.clone(),
                    field,
                    value: value.to_string(),
                })
            }
        };
        check("difficulty", self.difficulty, DIFFICULTY_RANGE)?;
        check("workload", self.workload, WORKLOAD_RANGE)?;
        check("pass_rate", self.pass_rate, PASS_RATE_RANGE)?;
        if !(self.reg_time.is_finite() && self.reg_time > 0.0) {
            return Err(CurriculumError::ParameterOutOfRange {
                course: self.id.clone(),
                field: "reg_time_periods",
                value: self.reg_time.to_string(),
            });
        }
        if self.prerequisites.iter().any(|p| p == &self.id) {
            return Err(CurriculumError::CycleDetected(vec![self.id.clone(), self.id.clone()]));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct CourseRow {
    id: String,
    name: String,
    difficulty: f64,
    workload: f64,
    pass_rate: f64,
    reg_time_periods: f64,
    prerequisites: String,
    offered_parity: String,
}

const CURRICULUM_COLUMNS: [&str; 8] = [
    "id",
    "name",
    "difficulty",
    "workload",
    "pass_rate",
    "reg_time_periods",
    "prerequisites",
    "offered_parity",
];

/// Validated, immutable prerequisite DAG.
#[derive(Debug, Clone)]
pub struct Curriculum {
    courses: Vec<CourseParams>,
    index: HashMap<String, CourseIdx>,
    prereqs: Vec<Vec<CourseIdx>>,
    dependents: Vec<Vec<CourseIdx>>,
}

impl Curriculum {
    /// Builds and validates a curriculum. Input order does not matter.
    pub fn new(mut courses: Vec<CourseParams>) -> Result<Self, CurriculumError> {
        if courses.is_empty() {
            return Err(CurriculumError::Empty);
        }
        courses.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in courses.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(CurriculumError::DuplicateId(pair[0].id.clone()));
            }
        }
        for c in &courses {
            c.validate()?;
        }
        let index: HashMap<String, CourseIdx> = courses.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect();

        let mut prereqs = Vec::with_capacity(courses.len());
        let mut dependents = vec![Vec::new(); courses.len()];
        for (j, c) in courses.iter().enumerate() {
            let mut list = Vec::with_capacity(c.prerequisites.len());
            for p in &c.prerequisites {
                let i = *index.get(p).ok_or_else(|| CurriculumError::DanglingPrerequisite {
                    course: c.id.clone(),
                    missing: p.clone(),
                })?;
                list.push(i);
            }
            list.sort_unstable();
            list.dedup();
            for &i in &list {
                dependents[i].push(j);
            }
            prereqs.push(list);
        }

        let curriculum = Self {
            courses,
            index,
            prereqs,
            dependents,
        };
        if let Some(cycle) = curriculum.find_cycle() {
            return Err(CurriculumError::CycleDetected(cycle));
        }
        Ok(curriculum)
    }

    /// Parses the delimited course table (comment lines start with `#`).
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, CurriculumError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| CurriculumError::Malformed(e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != CURRICULUM_COLUMNS {
            return Err(CurriculumError::Malformed(format!(
                "expected columns {}, found {}",
                CURRICULUM_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut courses = Vec::new();
        for row in rdr.deserialize::<CourseRow>() {
            let row = row.map_err(|e| CurriculumError::Malformed(e.to_string()))?;
            let offered_parity = row
                .offered_parity
                .parse()
                .map_err(|value| CurriculumError::ParameterOutOfRange {
                    course: row.id.clone(),
                    field: "offered_parity",
                    value,
                })?;
            courses.push(CourseParams {
                prerequisites: row
                    .prerequisites
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect(),
                id: row.id,
                name: row.name,
                difficulty: row.difficulty,
                workload: row.workload,
                pass_rate: row.pass_rate,
                reg_time: row.reg_time_periods,
                offered_parity,
            });
        }
        Self::new(courses)
    }

    pub fn len(&self) -> usize {
        self.courses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.courses.is_empty()
    }

    pub fn courses(&self) -> &[CourseParams] {
        &self.courses
    }

    pub fn course(&self, idx: CourseIdx) -> &CourseParams {
        &self.courses[idx]
    }

    pub fn index_of(&self, id: &str) -> Result<CourseIdx, CurriculumError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| CurriculumError::UnknownCourse(id.to_string()))
    }

    pub fn prerequisites_of(&self, idx: CourseIdx) -> &[CourseIdx] {
        &self.prereqs[idx]
    }

    pub fn edge_count(&self) -> usize {
        self.prereqs.iter().map(Vec::len).sum()
    }

    /// True iff every prerequisite of `course` is Credited.
    pub fn prerequisites_met(&self, statuses: &[CourseStatus], course: &str) -> Result<bool, CurriculumError> {
        Ok(self.prerequisites_met_idx(statuses, self.index_of(course)?))
    }

    pub fn prerequisites_met_idx(&self, statuses: &[CourseStatus], idx: CourseIdx) -> bool {
        self.prereqs[idx]
            .iter()
            .all(|&p| statuses[p].state == CourseState::Credited)
    }

    /// Number of courses that list `course` as a prerequisite.
    pub fn downstream_count(&self, course: &str) -> Result<usize, CurriculumError> {
        Ok(self.dependents[self.index_of(course)?].len())
    }

    pub fn downstream_count_idx(&self, idx: CourseIdx) -> usize {
        self.dependents[idx].len()
    }

    pub fn is_bottleneck(&self, idx: CourseIdx) -> bool {
        self.dependents[idx].len() >= BOTTLENECK_THRESHOLD
    }

    /// Whether the course may be enrolled during `phase`.
    pub fn offered_in(&self, idx: CourseIdx, phase: u32, calendar: &PhaseCalendar) -> bool {
        match self.courses[idx].offered_parity {
            OfferedParity::All => true,
            OfferedParity::Odd => calendar.is_odd_semester(phase),
            OfferedParity::Even => !calendar.is_odd_semester(phase),
        }
    }

    /// Kahn's algorithm. Returns `None` when the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<CourseIdx>> {
        let mut indegree: Vec<usize> = self.prereqs.iter().map(Vec::len).collect();
        let mut queue: VecDeque<CourseIdx> = (0..self.len()).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &d in &self.dependents[i] {
                indegree[d] -= 1;
                if indegree[d] == 0 {
                    queue.push_back(d);
                }
            }
        }
        (order.len() == self.len()).then_some(order)
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        if self.topological_order().is_some() {
            return None;
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut mark = vec![0u8; self.len()];
        let mut stack: Vec<CourseIdx> = Vec::new();
        fn visit(g: &Curriculum, v: CourseIdx, mark: &mut [u8], stack: &mut Vec<CourseIdx>) -> Option<Vec<String>> {
            mark[v] = 1;
            stack.push(v);
            for &d in &g.dependents[v] {
                if mark[d] == 1 {
                    let start = stack.iter().position(|&x| x == d).unwrap();
                    let mut cycle: Vec<String> = stack[start..].iter().map(|&i| g.courses[i].id.clone()).collect();
                    cycle.push(g.courses[d].id.clone());
                    return Some(cycle);
                }
                if mark[d] == 0 {
                    if let Some(c) = visit(g, d, mark, stack) {
                        return Some(c);
                    }
                }
            }
            stack.pop();
            mark[v] = 2;
            None
        }
        for v in 0..self.len() {
            if mark[v] == 0 {
                if let Some(c) = visit(self, v, &mut mark, &mut stack) {
                    return Some(c);
                }
            }
        }
        unreachable!("Kahn's algorithm reported a cycle that DFS could not find")
    }

    /// Longest prerequisite chain (in courses) ending at each course.
    pub fn depths(&self) -> BTreeMap<String, usize> {
        let order = self.topological_order().expect("validated acyclic");
        let mut depth = vec![1usize; self.len()];
        for &i in &order {
            for &d in &self.dependents[i] {
                depth[d] = depth[d].max(depth[i] + 1);
            }
        }
        self.courses.iter().zip(depth).map(|(c, d)| (c.id.clone(), d)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regime::CourseStatus;

    fn chain() -> Curriculum {
        Curriculum::new(vec![
            CourseParams::new("a", 0.5, 2.0, 0.7, 2.0),
            CourseParams::new("b", 0.5, 2.0, 0.7, 2.0).with_prerequisites(&["a"]),
            CourseParams::new("c", 0.5, 2.0, 0.7, 2.0).with_prerequisites(&["a", "b"]),
            CourseParams::new("d", 0.5, 2.0, 0.7, 2.0).with_prerequisites(&["a"]),
            CourseParams::new("e", 0.5, 2.0, 0.7, 2.0).with_prerequisites(&["b"]),
        ])
        .unwrap()
    }

    #[test]
    fn two_course_cycle_is_rejected() {
        let err = Curriculum::new(vec![
            CourseParams::new("a", 0.5, 2.0, 0.7, 2.0).with_prerequisites(&["b"]),
            CourseParams::new("b", 0.5, 2.0, 0.7, 2.0).with_prerequisites(&["a"]),
        ])
        .unwrap_err();
        match err {
            CurriculumError::CycleDetected(c) => {
                assert_eq!(c.first(), c.last());
                assert_eq!(c.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let err = Curriculum::new(vec![
            CourseParams::new("a", 0.5, 2.0, 0.7, 2.0).with_prerequisites(&["a"])
        ])
        .unwrap_err();
        assert!(matches!(err, CurriculumError::CycleDetected(_)));
    }

    #[test]
    fn out_of_range_difficulty() {
        let err = Curriculum::new(vec![CourseParams::new("a", 0.9, 2.0, 0.7, 2.0)]).unwrap_err();
        assert_eq!(
            err,
            CurriculumError::ParameterOutOfRange {
                course: "a".into(),
                field: "difficulty",
                value: "0.9".into()
            }
        );
    }

    #[test]
    fn dangling_prerequisite_names_missing_id() {
        let err = Curriculum::new(vec![
            CourseParams::new("a", 0.5, 2.0, 0.7, 2.0).with_prerequisites(&["zz"])
        ])
        .unwrap_err();
        assert_eq!(
            err,
            CurriculumError::DanglingPrerequisite {
                course: "a".into(),
                missing: "zz".into()
            }
        );
    }

    #[test]
    fn prerequisites_need_credit_not_regularity() {
        let g = chain();
        let mut st = vec![CourseStatus::default(); g.len()];
        assert!(g.prerequisites_met(&st, "a").unwrap());
        st[0].state = CourseState::Regular;
        assert!(!g.prerequisites_met(&st, "b").unwrap());
        st[0].state = CourseState::Credited;
        assert!(g.prerequisites_met(&st, "b").unwrap());
        assert!(!g.prerequisites_met(&st, "c").unwrap());
        st[1].state = CourseState::Credited;
        assert!(g.prerequisites_met(&st, "c").unwrap());
        assert!(matches!(
            g.prerequisites_met(&st, "nope"),
            Err(CurriculumError::UnknownCourse(_))
        ));
    }

    #[test]
    fn downstream_counts_and_bottleneck() {
        let g = chain();
        assert_eq!(g.downstream_count("a").unwrap(), 3);
        assert!(g.is_bottleneck(g.index_of("a").unwrap()));
        assert_eq!(g.downstream_count("b").unwrap(), 2);
        assert!(!g.is_bottleneck(g.index_of("b").unwrap()));
        assert_eq!(g.downstream_count("e").unwrap(), 0);
        let total: usize = (0..g.len()).map(|i| g.downstream_count_idx(i)).sum();
        assert_eq!(total, g.edge_count());
    }

    #[test]
    fn insertion_order_is_irrelevant() {
        let mut courses = chain().courses().to_vec();
        courses.reverse();
        let g = Curriculum::new(courses).unwrap();
        assert_eq!(g.course(0).id, "a");
        assert_eq!(g.topological_order().unwrap().len(), 5);
        assert_eq!(g.depths()["e"], 3);
    }

    #[test]
    fn offering_parity_over_first_eight_phases() {
        let cal = PhaseCalendar::default();
        let g = Curriculum::new(vec![
            CourseParams::new("odd", 0.5, 2.0, 0.7, 2.0).with_parity(OfferedParity::Odd),
            CourseParams::new("even", 0.5, 2.0, 0.7, 2.0).with_parity(OfferedParity::Even),
            CourseParams::new("x_all", 0.5, 2.0, 0.7, 2.0),
        ])
        .unwrap();
        let (even, odd, all) = (0, 1, 2);
        // phases 0..4 are semester 1, 4..8 are semester 2
        for phase in 0..8 {
            let first = phase < 4;
            assert_eq!(g.offered_in(odd, phase, &cal), first, "phase {phase}");
            assert_eq!(g.offered_in(even, phase, &cal), !first, "phase {phase}");
            assert!(g.offered_in(all, phase, &cal));
        }
    }

    #[test]
    fn parses_table_with_comments() {
        let text = "# header comment\n\
            id,name,difficulty,workload,pass_rate,reg_time_periods,prerequisites,offered_parity\n\
            01_calculo_i,Cálculo I,0.8,1.875,0.50,1.5,,odd\n\
            02_x,X,0.5,2.0,0.7,2.0,01_calculo_i,all\n";
        let g = Curriculum::from_reader(text.as_bytes()).unwrap();
        assert_eq!(g.course(0).pass_rate, 0.50);
        assert_eq!(g.course(0).offered_parity, OfferedParity::Odd);
        assert_eq!(g.prerequisites_of(1), &[0]);
    }

    #[test]
    fn wrong_header_is_malformed() {
        let text = "id,name\na,b\n";
        assert!(matches!(
            Curriculum::from_reader(text.as_bytes()),
            Err(CurriculumError::Malformed(_))
        ));
    }
}
