//! Structured textbook content: lessons, problems and steps, ingested from
//! the canonical CSV interchange format.
//!
//! Columns, header required and in this order:
//!
//! `lesson_id, lesson_title, problem_id, problem_body, step_id, step_body,
//! answer, answer_type, choices, human_hints`
//!
//! `choices` is `|`-separated. `human_hints` holds a raw hint pathway (see
//! [`crate::validator`]) or is empty. A row whose problem and step columns
//! are all empty declares a lesson with no problems yet.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::answer::{is_decimal, AnswerType};
use crate::validator::{parse_pathway, HintPathway};

pub const CSV_COLUMNS: [&str; 10] = [
    "lesson_id",
    "lesson_title",
    "problem_id",
    "problem_body",
    "step_id",
    "step_body",
    "answer",
    "answer_type",
    "choices",
    "human_hints",
];

/// `<problem_id>:<step_id>`, the key used in batch output objects.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StepRef {
    pub problem_id: String,
    pub step_id: String,
}

impl StepRef {
    pub fn new(problem_id: impl Into<String>, step_id: impl Into<String>) -> Self {
        StepRef {
            problem_id: problem_id.into(),
            step_id: step_id.into(),
        }
    }
}

impl fmt::Display for StepRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.problem_id, self.step_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("step reference {0:?} is not of the form problem_id:step_id")]
pub struct BadStepRef(pub String);

impl FromStr for StepRef {
    type Err = BadStepRef;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.rsplit_once(':') {
            Some((p, st)) if !p.is_empty() && !st.is_empty() => Ok(StepRef::new(p, st)),
            _ => Err(BadStepRef(s.to_string())),
        }
    }
}

impl Serialize for StepRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StepRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub step_id: String,
    pub body: String,
    pub answer: String,
    pub answer_type: AnswerType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_hints: Option<HintPathway>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub problem_id: String,
    pub body: String,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lesson {
    pub lesson_id: String,
    pub title: String,
    pub problems: Vec<Problem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentPool {
    pub pool_id: String,
    pub source_uri: String,
    pub textbook_title: String,
    pub lessons: Vec<Lesson>,
    pub ingested_at: DateTime<Utc>,
}

/// A step located inside its pool.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub lesson: &'a Lesson,
    pub problem: &'a Problem,
    pub step: &'a Step,
}

impl StepContext<'_> {
    pub fn step_ref(&self) -> StepRef {
        StepRef::new(&self.problem.problem_id, &self.step.step_id)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PoolError {
    #[error("row {row}: malformed CSV: {message}")]
    MalformedCsv { row: usize, message: String },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("row {row}: invalid answer type {value:?}")]
    InvalidAnswerType { row: usize, value: String },
    #[error("row {row}: answer {answer:?} is not among the choices")]
    ChoiceMismatch { row: usize, answer: String },
    #[error("row {row}: numeric answer {answer:?} is not a decimal number")]
    NonNumericAnswer { row: usize, answer: String },
    #[error("lesson {0:?} not found")]
    NotFound(String),
    #[error("could not read source {uri}: {message}")]
    Source { uri: String, message: String },
}

impl ContentPool {
    /// Looks up a lesson by its identifier.
    pub fn get_lesson(&self, lesson_id: &str) -> Result<&Lesson, PoolError> {
        self.lessons
            .iter()
            .find(|l| l.lesson_id == lesson_id)
            .ok_or_else(|| PoolError::NotFound(lesson_id.to_string()))
    }

    /// Lessons ingested without any problems.
    pub fn empty_lessons(&self) -> Vec<&str> {
        self.lessons
            .iter()
            .filter(|l| l.problems.is_empty())
            .map(|l| l.lesson_id.as_str())
            .collect()
    }

    pub fn steps(&self) -> impl Iterator<Item = StepContext<'_>> {
        self.lessons.iter().flat_map(|lesson| {
            lesson.problems.iter().flat_map(move |problem| {
                problem.steps.iter().map(move |step| StepContext {
                    lesson,
                    problem,
                    step,
                })
            })
        })
    }

    pub fn step_count(&self) -> usize {
        self.steps().count()
    }

    pub fn problem_count(&self) -> usize {
        self.lessons.iter().map(|l| l.problems.len()).sum()
    }

    pub fn resolve(&self, step_ref: &StepRef) -> Option<StepContext<'_>> {
        self.steps().find(|c| {
            c.problem.problem_id == step_ref.problem_id && c.step.step_id == step_ref.step_id
        })
    }

    /// Index from step reference to its position in pool order.
    pub fn step_index(&self) -> HashMap<StepRef, usize> {
        self.steps().enumerate().map(|(i, c)| (c.step_ref(), i)).collect()
    }

    pub fn summary(&self) -> PoolSummary {
        PoolSummary {
            pool_id: self.pool_id.clone(),
            textbook_title: self.textbook_title.clone(),
            lessons: self.lessons.len(),
            problems: self.problem_count(),
            steps: self.step_count(),
            empty_lessons: self.empty_lessons().into_iter().map(String::from).collect(),
        }
    }

    /// Writes the pool back out in the canonical CSV format.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for lesson in &self.lessons {
            if lesson.problems.is_empty() {
                w.write_record([&lesson.lesson_id, &lesson.title, "", "", "", "", "", "", "", ""])?;
            }
            for problem in &lesson.problems {
                for step in &problem.steps {
                    let choices = step.choices.as_ref().map(|c| c.join("|")).unwrap_or_default();
                    let hints = step
                        .human_hints
                        .as_ref()
                        .map(HintPathway::to_text)
                        .unwrap_or_default();
                    w.write_record([
                        lesson.lesson_id.as_str(),
                        &lesson.title,
                        &problem.problem_id,
                        &problem.body,
                        &step.step_id,
                        &step.body,
                        &step.answer,
                        step.answer_type.as_str(),
                        &choices,
                        &hints,
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("pool text is UTF-8")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub pool_id: String,
    pub textbook_title: String,
    pub lessons: usize,
    pub problems: usize,
    pub steps: usize,
    pub empty_lessons: Vec<String>,
}

/// Ingests a CSV byte stream, stamping the current time.
pub fn ingest_csv<R: Read>(source: R, pool_id: &str) -> Result<ContentPool, PoolError> {
    ingest_csv_at(source, pool_id, Utc::now())
}

/// Deterministic ingestion: identical bytes and timestamp give identical pools.
pub fn ingest_csv_at<R: Read>(
    source: R,
    pool_id: &str,
    ingested_at: DateTime<Utc>,
) -> Result<ContentPool, PoolError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);

    let headers = reader.headers().map_err(|e| PoolError::MalformedCsv {
        row: 1,
        message: e.to_string(),
    })?;
    let header_names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    for (pos, expected) in CSV_COLUMNS.iter().enumerate() {
        if header_names.get(pos).map(String::as_str) != Some(*expected) {
            return Err(PoolError::MissingColumn(expected.to_string()));
        }
    }
    if header_names.len() != CSV_COLUMNS.len() {
        return Err(PoolError::MalformedCsv {
            row: 1,
            message: format!(
                "expected {} columns, header has {}",
                CSV_COLUMNS.len(),
                header_names.len()
            ),
        });
    }

    let mut lessons: Vec<Lesson> = Vec::new();
    let mut lesson_pos: HashMap<String, usize> = HashMap::new();
    // problem_id -> (lesson index, problem index)
    let mut problem_pos: HashMap<String, (usize, usize)> = HashMap::new();

    for (i, record) in reader.records().enumerate() {
        // Row 1 is the header.
        let row = i + 2;
        let record = record.map_err(|e| PoolError::MalformedCsv {
            row,
            message: e.to_string(),
        })?;
        let field = |n: usize| record.get(n).unwrap_or_default();
        let lesson_id = field(0).trim();
        if lesson_id.is_empty() {
            return Err(PoolError::MalformedCsv {
                row,
                message: "lesson_id is empty".into(),
            });
        }
        let li = *lesson_pos.entry(lesson_id.to_string()).or_insert_with(|| {
            lessons.push(Lesson {
                lesson_id: lesson_id.to_string(),
                title: field(1).to_string(),
                problems: Vec::new(),
            });
            lessons.len() - 1
        });

        let problem_id = field(2).trim();
        let step_id = field(4).trim();
        if problem_id.is_empty() && step_id.is_empty() && (5..10).all(|n| field(n).is_empty()) {
            continue;
        }
        if problem_id.is_empty() || step_id.is_empty() {
            return Err(PoolError::MalformedCsv {
                row,
                message: "problem_id and step_id are required on step rows".into(),
            });
        }

        let answer = field(6).to_string();
        let answer_type: AnswerType = field(7).parse().map_err(|_| PoolError::InvalidAnswerType {
            row,
            value: field(7).to_string(),
        })?;
        let choices: Option<Vec<String>> = match field(8) {
            "" => None,
            raw => Some(raw.split('|').map(|c| c.trim().to_string()).collect()),
        };
        match answer_type {
            AnswerType::MultipleChoice => {
                let ok = choices
                    .as_ref()
                    .is_some_and(|c| c.len() >= 2 && c.contains(&answer));
                if !ok {
                    return Err(PoolError::ChoiceMismatch { row, answer });
                }
            }
            AnswerType::Numeric if !is_decimal(&answer) => {
                return Err(PoolError::NonNumericAnswer { row, answer });
            }
            _ => {}
        }
        let human_hints = match field(9).trim() {
            "" => None,
            raw => Some(parse_pathway(raw).map_err(|e| PoolError::MalformedCsv {
                row,
                message: format!("human_hints: {e}"),
            })?),
        };
        let step = Step {
            step_id: step_id.to_string(),
            body: field(5).to_string(),
            answer,
            answer_type,
            choices,
            human_hints,
        };

        let (pli, ppi) = match problem_pos.get(problem_id) {
            Some(&pos) => pos,
            None => {
                let problems = &mut lessons[li].problems;
                problems.push(Problem {
                    problem_id: problem_id.to_string(),
                    body: field(3).to_string(),
                    steps: Vec::new(),
                });
                let pos = (li, problems.len() - 1);
                problem_pos.insert(problem_id.to_string(), pos);
                pos
            }
        };
        if pli != li {
            return Err(PoolError::MalformedCsv {
                row,
                message: format!(
                    "problem {problem_id:?} already belongs to lesson {:?}",
                    lessons[pli].lesson_id
                ),
            });
        }
        let problem = &mut lessons[pli].problems[ppi];
        if problem.steps.iter().any(|s| s.step_id == step.step_id) {
            return Err(PoolError::MalformedCsv {
                row,
                message: format!("duplicate step {problem_id}:{}", step.step_id),
            });
        }
        problem.steps.push(step);
    }

    Ok(ContentPool {
        pool_id: pool_id.to_string(),
        source_uri: String::new(),
        textbook_title: String::new(),
        lessons,
        ingested_at,
    })
}

/// Reads pool bytes from an `http(s)://` URL or a local path.
pub fn fetch_source(uri: &str) -> Result<Vec<u8>, PoolError> {
    let source_err = |message: String| PoolError::Source {
        uri: uri.to_string(),
        message,
    };
    if uri.starts_with("http://") || uri.starts_with("https://") {
        let resp = reqwest::blocking::get(uri).map_err(|e| source_err(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(source_err(format!("HTTP {}", resp.status())));
        }
        let bytes = resp.bytes().map_err(|e| source_err(e.to_string()))?;
        Ok(bytes.to_vec())
    } else {
        let path = uri.strip_prefix("file://").unwrap_or(uri);
        std::fs::read(Path::new(path)).map_err(|e| source_err(e.to_string()))
    }
}

/// Fetches and ingests in one go, recording `uri` as the pool source.
pub fn ingest_uri(uri: &str, pool_id: &str) -> Result<ContentPool, PoolError> {
    let bytes = fetch_source(uri)?;
    let mut pool = ingest_csv(bytes.as_slice(), pool_id)?;
    pool.source_uri = uri.to_string();
    Ok(pool)
}

/// Lesson → problem count, handy for summaries.
pub fn problems_per_lesson(pool: &ContentPool) -> BTreeMap<&str, usize> {
    pool.lessons
        .iter()
        .map(|l| (l.lesson_id.as_str(), l.problems.len()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "lesson_id,lesson_title,problem_id,problem_body,step_id,step_body,answer,answer_type,choices,human_hints\n";

    fn at() -> DateTime<Utc> {
        DateTime::from_timestamp(1_700_000_000, 0).unwrap()
    }

    fn ingest(body: &str) -> Result<ContentPool, PoolError> {
        ingest_csv_at(format!("{HEADER}{body}").as_bytes(), "t", at())
    }

    #[test]
    fn rows_sharing_problem_merge() {
        let pool = ingest(
            "2.5,Linear,P1,Solve it,s1,First,3,numeric,,\n\
             2.5,Linear,P1,Solve it,s2,Second,x,string_exact,,\n",
        )
        .unwrap();
        assert_eq!(pool.lessons.len(), 1);
        let p = &pool.lessons[0].problems;
        assert_eq!(p.len(), 1);
        let ids: Vec<_> = p[0].steps.iter().map(|s| s.step_id.as_str()).collect();
        assert_eq!(ids, ["s1", "s2"]);
    }

    #[test]
    fn choice_mismatch_reports_row() {
        let err = ingest(
            "1.1,L,P1,b,s1,b,1,numeric,,\n\
             1.1,L,P2,b,s1,b,d,multiple choice,a|b|c,\n",
        )
        .unwrap_err();
        assert!(matches!(err, PoolError::ChoiceMismatch { row: 3, ref answer } if answer == "d"));
    }

    #[test]
    fn invalid_answer_type() {
        let err = ingest("1.1,L,P1,b,s1,b,1,essay,,\n").unwrap_err();
        assert!(matches!(err, PoolError::InvalidAnswerType { row: 2, .. }));
    }

    #[test]
    fn non_numeric_answer() {
        let err = ingest("1.1,L,P1,b,s1,b,x=2,numeric,,\n").unwrap_err();
        assert!(matches!(err, PoolError::NonNumericAnswer { row: 2, .. }));
    }

    #[test]
    fn missing_column_is_named() {
        let err = ingest_csv_at(
            "lesson_id,lesson_title,problem_id\n1,a,b\n".as_bytes(),
            "t",
            at(),
        )
        .unwrap_err();
        assert!(matches!(err, PoolError::MissingColumn(ref c) if c == "problem_body"));
    }

    #[test]
    fn ragged_row_is_malformed() {
        let err = ingest("1.1,L,P1,b,s1\n").unwrap_err();
        assert!(matches!(err, PoolError::MalformedCsv { row: 2, .. }));
    }

    #[test]
    fn problem_in_two_lessons_is_rejected() {
        let err = ingest(
            "1.1,L,P1,b,s1,b,1,numeric,,\n\
             1.2,M,P1,b,s2,b,1,numeric,,\n",
        )
        .unwrap_err();
        assert!(matches!(err, PoolError::MalformedCsv { row: 3, .. }));
    }

    #[test]
    fn empty_lesson_is_flagged_not_fatal() {
        let pool = ingest("9.9,Later,,,,,,,,\n1.1,L,P1,b,s1,b,1,numeric,,\n").unwrap();
        assert_eq!(pool.lessons.len(), 2);
        assert_eq!(pool.empty_lessons(), ["9.9"]);
        assert_eq!(pool.step_count(), 1);
    }

    #[test]
    fn human_hints_parse() {
        let pool = ingest("1.1,L,P1,b,s1,b,1,numeric,,\"HINT a :: b\nSCAFFOLD c :: d? :: 1 :: numeric\"\n").unwrap();
        let step = &pool.lessons[0].problems[0].steps[0];
        assert_eq!(step.human_hints.as_ref().unwrap().items.len(), 2);
        let err = ingest("1.1,L,P1,b,s1,b,1,numeric,,\"WAT x\"\n").unwrap_err();
        assert!(matches!(err, PoolError::MalformedCsv { row: 2, .. }));
    }

    #[test]
    fn get_lesson_lookup() {
        let pool = ingest("2.5,Linear,P1,b,s1,b,1,numeric,,\n").unwrap();
        assert_eq!(pool.get_lesson("2.5").unwrap().title, "Linear");
        assert!(matches!(pool.get_lesson("99.9"), Err(PoolError::NotFound(_))));
        let empty = ingest("").unwrap();
        assert!(matches!(empty.get_lesson("2.5"), Err(PoolError::NotFound(_))));
    }

    #[test]
    fn step_ref_text_form() {
        let r: StepRef = "P1:s2".parse().unwrap();
        assert_eq!(r, StepRef::new("P1", "s2"));
        assert_eq!(r.to_string(), "P1:s2");
        assert!("P1".parse::<StepRef>().is_err());
        assert!(":s".parse::<StepRef>().is_err());
        assert_eq!(serde_json::to_string(&r).unwrap(), "\"P1:s2\"");
    }

    #[test]
    fn local_file_source() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("book.csv");
        std::fs::write(&path, format!("{HEADER}1.1,L,P1,b,s1,b,1,numeric,,\n")).unwrap();
        let pool = ingest_uri(path.to_str().unwrap(), "book").unwrap();
        assert_eq!(pool.source_uri, path.to_str().unwrap());
        assert_eq!(pool.step_count(), 1);
        assert!(matches!(
            ingest_uri("/definitely/not/here.csv", "x"),
            Err(PoolError::Source { .. })
        ));
    }
}
