//! Hint pathways: the line-oriented text format the generator emits, the
//! structural checks run before deployment, answer-type normalization, and
//! the content export document.
//!
//! Raw pathway grammar, one item per non-blank line:
//!
//! ```text
//! HINT <title> :: <body>
//! SCAFFOLD <title> :: <body> :: <answer> :: <type> [:: choice|choice|...]
//! ```
//!
//! Fields are trimmed. `<type>` is kept verbatim by the parser so that an
//! unrecognized type surfaces as a validation issue rather than a parse
//! failure.

mod check;
mod export;
mod normalize;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::answer::AnswerType;

pub use check::{math_is_balanced, validate, IssueCode, Severity, ValidationIssue, ValidationReport};
pub use export::{export_content, render_content, ContentDocument, ContentRecord, ExportError, EXPORT_SCHEMA};
pub use normalize::{normalize_answer_type, Normalized};

/// Items longer than this produce a `PATHWAY_TOO_LONG` warning.
pub const MAX_PATHWAY_ITEMS: usize = 12;

const FIELD_SEP: &str = "::";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Hint,
    Scaffold,
}

/// A scaffold's declared answer type, as written by the generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeclaredType {
    Known(AnswerType),
    Unrecognized(String),
}

impl DeclaredType {
    pub fn parse(raw: &str) -> Self {
        match raw.parse() {
            Ok(t) => DeclaredType::Known(t),
            Err(_) => DeclaredType::Unrecognized(raw.trim().to_string()),
        }
    }

    pub fn known(&self) -> Option<AnswerType> {
        match self {
            DeclaredType::Known(t) => Some(*t),
            DeclaredType::Unrecognized(_) => None,
        }
    }
}

impl fmt::Display for DeclaredType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeclaredType::Known(t) => t.fmt(f),
            DeclaredType::Unrecognized(s) => f.write_str(s),
        }
    }
}

impl Serialize for DeclaredType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DeclaredType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Ok(DeclaredType::parse(&raw))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathwayItem {
    pub kind: ItemKind,
    pub title: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaffold_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaffold_answer_type: Option<DeclaredType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaffold_choices: Option<Vec<String>>,
}

impl PathwayItem {
    pub fn hint(title: impl Into<String>, body: impl Into<String>) -> Self {
        PathwayItem {
            kind: ItemKind::Hint,
            title: title.into(),
            body: body.into(),
            scaffold_answer: None,
            scaffold_answer_type: None,
            scaffold_choices: None,
        }
    }

    pub fn scaffold(
        title: impl Into<String>,
        body: impl Into<String>,
        answer: impl Into<String>,
        answer_type: AnswerType,
        choices: Option<Vec<String>>,
    ) -> Self {
        PathwayItem {
            kind: ItemKind::Scaffold,
            title: title.into(),
            body: body.into(),
            scaffold_answer: Some(answer.into()),
            scaffold_answer_type: Some(DeclaredType::Known(answer_type)),
            scaffold_choices: choices,
        }
    }
}

/// Ordered hints and scaffolds attached to one problem step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HintPathway {
    pub items: Vec<PathwayItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PathwayParseError {
    #[error("pathway text is empty")]
    EmptyPathway,
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
}

impl PathwayParseError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        PathwayParseError::ParseError {
            line,
            message: message.into(),
        }
    }
}

/// Parses the raw pathway text. Line numbers in errors are 1-based.
pub fn parse_pathway(raw: &str) -> Result<HintPathway, PathwayParseError> {
    let mut items = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (keyword, rest) = split_keyword(line);
        let fields: Vec<&str> = rest.split(FIELD_SEP).map(str::trim).collect();
        let item = match keyword {
            "HINT" => {
                if fields.len() != 2 {
                    return Err(PathwayParseError::at(
                        lineno,
                        format!("HINT expects `title :: body`, found {} field(s)", fields.len()),
                    ));
                }
                PathwayItem::hint(fields[0], fields[1])
            }
            "SCAFFOLD" => {
                if fields.len() < 4 {
                    return Err(PathwayParseError::at(
                        lineno,
                        "SCAFFOLD expects `title :: body :: answer :: type`",
                    ));
                }
                if fields.len() > 5 {
                    return Err(PathwayParseError::at(lineno, "SCAFFOLD has too many fields"));
                }
                if fields[2].is_empty() {
                    return Err(PathwayParseError::at(lineno, "SCAFFOLD answer is empty"));
                }
                if fields[3].is_empty() {
                    return Err(PathwayParseError::at(lineno, "SCAFFOLD answer type is empty"));
                }
                let choices = fields
                    .get(4)
                    .map(|c| c.split('|').map(|s| s.trim().to_string()).collect());
                PathwayItem {
                    kind: ItemKind::Scaffold,
                    title: fields[0].to_string(),
                    body: fields[1].to_string(),
                    scaffold_answer: Some(fields[2].to_string()),
                    scaffold_answer_type: Some(DeclaredType::parse(fields[3])),
                    scaffold_choices: choices,
                }
            }
            other => {
                return Err(PathwayParseError::at(
                    lineno,
                    format!("unknown line kind {other:?}"),
                ))
            }
        };
        items.push(item);
    }
    if items.is_empty() {
        return Err(PathwayParseError::EmptyPathway);
    }
    Ok(HintPathway { items })
}

fn split_keyword(line: &str) -> (&str, &str) {
    let end = line
        .find(|c: char| c.is_whitespace() || c == ':')
        .unwrap_or(line.len());
    (&line[..end], &line[end..])
}

impl HintPathway {
    /// Canonical text form: one item per line, single spaces around `::`,
    /// trailing newline.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            match item.kind {
                ItemKind::Hint => {
                    out.push_str("HINT ");
                    out.push_str(&item.title);
                    out.push_str(" :: ");
                    out.push_str(&item.body);
                }
                ItemKind::Scaffold => {
                    out.push_str("SCAFFOLD ");
                    out.push_str(&item.title);
                    out.push_str(" :: ");
                    out.push_str(&item.body);
                    out.push_str(" :: ");
                    out.push_str(item.scaffold_answer.as_deref().unwrap_or_default());
                    out.push_str(" :: ");
                    if let Some(t) = &item.scaffold_answer_type {
                        out.push_str(&t.to_string());
                    }
                    if let Some(choices) = &item.scaffold_choices {
                        out.push_str(" :: ");
                        out.push_str(&choices.join("|"));
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn scaffolds(&self) -> impl Iterator<Item = &PathwayItem> {
        self.items.iter().filter(|i| i.kind == ItemKind::Scaffold)
    }
}

impl fmt::Display for HintPathway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
