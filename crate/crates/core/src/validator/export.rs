//! Deployment export: one JSON record per step with its hint pathway.
//!
//! Document schema `hintforge.content/v1`:
//!
//! ```json
//! {
//!   "schema": "hintforge.content/v1",
//!   "pool": {"pool_id": "...", "textbook_title": "...", "source_uri": "..."},
//!   "records": [
//!     {"lesson_id": "...", "problem_id": "...", "step_id": "...",
//!      "problem_body": "...", "step_body": "...", "answer": "...",
//!      "answer_type": "numeric", "choices": ["..."]?, "pathway": [ ...items ]}
//!   ]
//! }
//! ```
//!
//! Records follow pool order. Output is pretty-printed with a trailing newline.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{validate, HintPathway, ValidationReport};
use crate::answer::AnswerType;
use crate::content_pool::{ContentPool, StepRef};

pub const EXPORT_SCHEMA: &str = "hintforge.content/v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolHeader {
    pub pool_id: String,
    pub textbook_title: String,
    pub source_uri: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentRecord {
    pub lesson_id: String,
    pub problem_id: String,
    pub step_id: String,
    pub problem_body: String,
    pub step_body: String,
    pub answer: String,
    pub answer_type: AnswerType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<String>>,
    pub pathway: HintPathway,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentDocument {
    pub schema: String,
    pub pool: PoolHeader,
    pub records: Vec<ContentRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("step references not in pool: {}", join(.0))]
    UnresolvedStepRef(Vec<StepRef>),
    #[error("invalid pathways for: {}", join(.0.keys()))]
    InvalidPathway(BTreeMap<StepRef, ValidationReport>),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
}

fn join<'a>(refs: impl IntoIterator<Item = &'a StepRef>) -> String {
    refs.into_iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// Builds the content document, or explains why it cannot be built.
pub fn render_content(
    pool: &ContentPool,
    pathways: &BTreeMap<StepRef, HintPathway>,
) -> Result<ContentDocument, ExportError> {
    let index = pool.step_index();
    let unresolved: Vec<StepRef> = pathways
        .keys()
        .filter(|r| !index.contains_key(*r))
        .cloned()
        .collect();
    if !unresolved.is_empty() {
        return Err(ExportError::UnresolvedStepRef(unresolved));
    }

    let invalid: BTreeMap<StepRef, ValidationReport> = pathways
        .iter()
        .map(|(r, p)| (r.clone(), validate(p)))
        .filter(|(_, report)| !report.ok)
        .collect();
    if !invalid.is_empty() {
        return Err(ExportError::InvalidPathway(invalid));
    }

    let records = pool
        .steps()
        .filter_map(|ctx| {
            let pathway = pathways.get(&ctx.step_ref())?;
            Some(ContentRecord {
                lesson_id: ctx.lesson.lesson_id.clone(),
                problem_id: ctx.problem.problem_id.clone(),
                step_id: ctx.step.step_id.clone(),
                problem_body: ctx.problem.body.clone(),
                step_body: ctx.step.body.clone(),
                answer: ctx.step.answer.clone(),
                answer_type: ctx.step.answer_type,
                choices: ctx.step.choices.clone(),
                pathway: pathway.clone(),
            })
        })
        .collect();

    Ok(ContentDocument {
        schema: EXPORT_SCHEMA.to_string(),
        pool: PoolHeader {
            pool_id: pool.pool_id.clone(),
            textbook_title: pool.textbook_title.clone(),
            source_uri: pool.source_uri.clone(),
        },
        records,
    })
}

impl ContentDocument {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("content document serializes");
        bytes.push(b'\n');
        bytes
    }
}

/// Writes the document to `out` only when every pathway resolves and
/// validates; on error nothing is written.
pub fn export_content<W: Write>(
    pool: &ContentPool,
    pathways: &BTreeMap<StepRef, HintPathway>,
    mut out: W,
) -> Result<ContentDocument, ExportError> {
    let doc = render_content(pool, pathways)?;
    out.write_all(&doc.to_bytes())?;
    out.flush()?;
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content_pool::ingest_csv_at;
    use crate::validator::parse_pathway;
    use chrono::DateTime;

    fn pool() -> ContentPool {
        let csv = "lesson_id,lesson_title,problem_id,problem_body,step_id,step_body,answer,answer_type,choices,human_hints\n\
                   1.1,L,P1,Body one,s1,Step one,2,numeric,,\n\
                   1.1,L,P2,Body two,s1,Step two,b,multiple_choice,a|b,\n";
        ingest_csv_at(csv.as_bytes(), "demo", DateTime::from_timestamp(0, 0).unwrap()).unwrap()
    }

    fn good() -> HintPathway {
        parse_pathway("HINT a :: b\nSCAFFOLD c :: d? :: 1 :: numeric").unwrap()
    }

    #[test]
    fn empty_map_gives_header_only() {
        let mut out = Vec::new();
        let doc = export_content(&pool(), &BTreeMap::new(), &mut out).unwrap();
        assert!(doc.records.is_empty());
        let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(v["schema"], EXPORT_SCHEMA);
        assert_eq!(v["pool"]["pool_id"], "demo");
    }

    #[test]
    fn records_follow_pool_order_and_reexport_is_identical() {
        let mut map = BTreeMap::new();
        map.insert(StepRef::new("P2", "s1"), good());
        map.insert(StepRef::new("P1", "s1"), good());
        let mut a = Vec::new();
        let mut b = Vec::new();
        export_content(&pool(), &map, &mut a).unwrap();
        export_content(&pool(), &map, &mut b).unwrap();
        assert_eq!(a, b);
        let doc: ContentDocument = serde_json::from_slice(&a).unwrap();
        assert_eq!(doc.records[0].problem_id, "P1");
        assert_eq!(doc.records[1].choices.as_deref().unwrap(), ["a", "b"]);
    }

    #[test]
    fn invalid_pathway_writes_nothing() {
        let mut map = BTreeMap::new();
        map.insert(StepRef::new("P1", "s1"), good());
        map.insert(StepRef::new("P2", "s1"), parse_pathway("HINT a :: $x").unwrap());
        let mut out = Vec::new();
        let err = export_content(&pool(), &map, &mut out).unwrap_err();
        match err {
            ExportError::InvalidPathway(bad) => {
                assert_eq!(bad.keys().cloned().collect::<Vec<_>>(), [StepRef::new("P2", "s1")]);
            }
            other => panic!("unexpected {other}"),
        }
        assert!(out.is_empty());
    }

    #[test]
    fn unresolved_ref() {
        let mut map = BTreeMap::new();
        map.insert(StepRef::new("P9", "s1"), good());
        let mut out = Vec::new();
        assert!(matches!(
            export_content(&pool(), &map, &mut out),
            Err(ExportError::UnresolvedStepRef(_))
        ));
        assert!(out.is_empty());
    }
}
