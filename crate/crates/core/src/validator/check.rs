use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DeclaredType, HintPathway, ItemKind, PathwayItem, MAX_PATHWAY_ITEMS};
use crate::answer::{is_decimal, AnswerType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    EmptyPathway,
    HintHasAnswer,
    MissingScaffoldAnswer,
    InvalidAnswerType,
    MissingChoices,
    ChoiceMismatch,
    EmptyChoice,
    UnbalancedMath,
    NonNumericAnswer,
    EmptyTitle,
    PathwayTooLong,
    NeedsReview,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::EmptyPathway => "EMPTY_PATHWAY",
            IssueCode::HintHasAnswer => "HINT_HAS_ANSWER",
            IssueCode::MissingScaffoldAnswer => "MISSING_SCAFFOLD_ANSWER",
            IssueCode::InvalidAnswerType => "INVALID_ANSWER_TYPE",
            IssueCode::MissingChoices => "MISSING_CHOICES",
            IssueCode::ChoiceMismatch => "CHOICE_MISMATCH",
            IssueCode::EmptyChoice => "EMPTY_CHOICE",
            IssueCode::UnbalancedMath => "UNBALANCED_MATH",
            IssueCode::NonNumericAnswer => "NON_NUMERIC_ANSWER",
            IssueCode::EmptyTitle => "EMPTY_TITLE",
            IssueCode::PathwayTooLong => "PATHWAY_TOO_LONG",
            IssueCode::NeedsReview => "NEEDS_REVIEW",
        }
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub code: IssueCode,
    /// `item[<n>]` or `item[<n>].<field>`, 0-based; `pathway` for whole-pathway findings.
    pub location: String,
    pub message: String,
}

impl ValidationIssue {
    pub fn error(code: IssueCode, location: impl Into<String>, message: impl Into<String>) -> Self {
        ValidationIssue {
            severity: Severity::Error,
            code,
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn warning(code: IssueCode, location: impl Into<String>, message: impl Into<String>) -> Self {
        ValidationIssue {
            severity: Severity::Warning,
            code,
            location: location.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn from_issues(issues: Vec<ValidationIssue>) -> Self {
        let ok = !issues.iter().any(|i| i.severity == Severity::Error);
        ValidationReport { ok, issues }
    }

    pub fn has_code(&self, code: IssueCode) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }

    pub fn errors(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }
}

/// Runs every structural check on a parsed pathway. Never fails: findings
/// are collected in the report, errors first by check order then warnings.
pub fn validate(pathway: &HintPathway) -> ValidationReport {
    let mut issues = Vec::new();
    let mut warnings = Vec::new();

    if pathway.items.is_empty() {
        issues.push(ValidationIssue::error(
            IssueCode::EmptyPathway,
            "pathway",
            "pathway has no items",
        ));
    }

    for (idx, item) in pathway.items.iter().enumerate() {
        check_item_shape(idx, item, &mut issues);
    }
    for (idx, item) in pathway.items.iter().enumerate() {
        if let Some(DeclaredType::Unrecognized(raw)) = &item.scaffold_answer_type {
            issues.push(ValidationIssue::error(
                IssueCode::InvalidAnswerType,
                format!("item[{idx}].answer_type"),
                format!("answer type {raw:?} is not one of numeric, multiple_choice, string_exact"),
            ));
        }
    }
    for (idx, item) in pathway.items.iter().enumerate() {
        check_choices(idx, item, &mut issues);
    }
    for (idx, item) in pathway.items.iter().enumerate() {
        for (field, text) in item_texts(item) {
            if !math_is_balanced(text) {
                issues.push(ValidationIssue::error(
                    IssueCode::UnbalancedMath,
                    format!("item[{idx}].{field}"),
                    "unclosed or mismatched `$`/`$$` math delimiter",
                ));
            }
        }
    }
    for (idx, item) in pathway.items.iter().enumerate() {
        if item.scaffold_answer_type.as_ref().and_then(DeclaredType::known) == Some(AnswerType::Numeric) {
            if let Some(answer) = &item.scaffold_answer {
                if !is_decimal(answer) {
                    issues.push(ValidationIssue::error(
                        IssueCode::NonNumericAnswer,
                        format!("item[{idx}].answer"),
                        format!("numeric answer {answer:?} is not a decimal number"),
                    ));
                }
            }
        }
        if item.title.trim().is_empty() {
            warnings.push(ValidationIssue::warning(
                IssueCode::EmptyTitle,
                format!("item[{idx}].title"),
                "item has an empty title",
            ));
        }
    }
    if pathway.items.len() > MAX_PATHWAY_ITEMS {
        warnings.push(ValidationIssue::warning(
            IssueCode::PathwayTooLong,
            "pathway",
            format!(
                "pathway has {} items (more than {MAX_PATHWAY_ITEMS})",
                pathway.items.len()
            ),
        ));
    }

    issues.extend(warnings);
    ValidationReport::from_issues(issues)
}

fn check_item_shape(idx: usize, item: &PathwayItem, issues: &mut Vec<ValidationIssue>) {
    match item.kind {
        ItemKind::Hint => {
            if item.scaffold_answer.is_some()
                || item.scaffold_answer_type.is_some()
                || item.scaffold_choices.is_some()
            {
                issues.push(ValidationIssue::error(
                    IssueCode::HintHasAnswer,
                    format!("item[{idx}]"),
                    "hint items must not carry scaffold answer fields",
                ));
            }
        }
        ItemKind::Scaffold => {
            let answer_missing = item
                .scaffold_answer
                .as_deref()
                .is_none_or(|a| a.trim().is_empty());
            if answer_missing || item.scaffold_answer_type.is_none() {
                issues.push(ValidationIssue::error(
                    IssueCode::MissingScaffoldAnswer,
                    format!("item[{idx}]"),
                    "scaffold needs both an answer and an answer type",
                ));
            }
        }
    }
}

fn check_choices(idx: usize, item: &PathwayItem, issues: &mut Vec<ValidationIssue>) {
    let declared = item.scaffold_answer_type.as_ref().and_then(DeclaredType::known);
    if declared != Some(AnswerType::MultipleChoice) {
        return;
    }
    let choices = item.scaffold_choices.as_deref().unwrap_or_default();
    if choices.len() < 2 {
        issues.push(ValidationIssue::error(
            IssueCode::MissingChoices,
            format!("item[{idx}].choices"),
            "multiple_choice scaffold needs at least two choices",
        ));
        return;
    }
    if let Some(slot) = choices.iter().position(|c| c.trim().is_empty()) {
        issues.push(ValidationIssue::error(
            IssueCode::EmptyChoice,
            format!("item[{idx}].choices[{slot}]"),
            "choice slot is empty",
        ));
    }
    if let Some(answer) = &item.scaffold_answer {
        if !choices.iter().any(|c| c == answer) {
            issues.push(ValidationIssue::error(
                IssueCode::ChoiceMismatch,
                format!("item[{idx}].answer"),
                format!("answer {answer:?} is not among the choices"),
            ));
        }
    }
}

fn item_texts(item: &PathwayItem) -> Vec<(&'static str, &str)> {
    let mut out = vec![("title", item.title.as_str()), ("body", item.body.as_str())];
    if let Some(a) = &item.scaffold_answer {
        out.push(("answer", a));
    }
    if let Some(cs) = &item.scaffold_choices {
        out.extend(cs.iter().map(|c| ("choices", c.as_str())));
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum MathMode {
    Text,
    Inline,
    Display,
}

/// Delimiter balance for `$...$` and `$$...$$`. `\$` is a literal dollar.
/// Inside inline math a doubled `$$` reads as close-then-open; inside display
/// math a lone `$` is a mismatch.
pub fn math_is_balanced(text: &str) -> bool {
    let bytes = text.as_bytes();
    let mut mode = MathMode::Text;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => {
                i += 2;
                continue;
            }
            b'$' => {
                let doubled = bytes.get(i + 1) == Some(&b'$');
                match (mode, doubled) {
                    (MathMode::Text, true) => {
                        mode = MathMode::Display;
                        i += 2;
                        continue;
                    }
                    (MathMode::Text, false) => mode = MathMode::Inline,
                    (MathMode::Inline, _) => mode = MathMode::Text,
                    (MathMode::Display, true) => {
                        mode = MathMode::Text;
                        i += 2;
                        continue;
                    }
                    (MathMode::Display, false) => return false,
                }
            }
            _ => {}
        }
        i += 1;
    }
    mode == MathMode::Text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validator::parse_pathway;

    fn codes(report: &ValidationReport) -> Vec<IssueCode> {
        report.issues.iter().map(|i| i.code).collect()
    }

    #[test]
    fn well_formed_pathway_is_clean() {
        let p = parse_pathway(
            "HINT Plan :: Isolate $x$ first.\n\
             HINT Move :: Subtract 3 from both sides.\n\
             SCAFFOLD Solve :: What is $x$ if $x+3=5$? :: 2 :: numeric\n",
        )
        .unwrap();
        let r = validate(&p);
        assert!(r.ok);
        assert!(r.issues.is_empty());
    }

    #[test]
    fn essay_type_is_invalid() {
        let p = parse_pathway("SCAFFOLD Explain :: Why? :: because :: essay").unwrap();
        let r = validate(&p);
        assert!(!r.ok);
        assert_eq!(codes(&r), vec![IssueCode::InvalidAnswerType]);
        assert_eq!(r.issues[0].location, "item[0].answer_type");
    }

    #[test]
    fn unbalanced_math() {
        let p = parse_pathway("HINT Go :: solve $x+1").unwrap();
        let r = validate(&p);
        assert_eq!(codes(&r), vec![IssueCode::UnbalancedMath]);
        assert_eq!(r.issues[0].location, "item[0].body");
    }

    #[test]
    fn choice_checks() {
        let p = parse_pathway("SCAFFOLD Pick :: Which? :: d :: multiple_choice :: a|b|c").unwrap();
        assert_eq!(codes(&validate(&p)), vec![IssueCode::ChoiceMismatch]);
        let p = parse_pathway("SCAFFOLD Pick :: Which? :: a :: multiple_choice").unwrap();
        assert_eq!(codes(&validate(&p)), vec![IssueCode::MissingChoices]);
        let p = parse_pathway("SCAFFOLD Pick :: Which? :: a :: multiple_choice :: a|").unwrap();
        assert_eq!(codes(&validate(&p)), vec![IssueCode::EmptyChoice]);
    }

    #[test]
    fn numeric_answer_must_be_decimal() {
        let p = parse_pathway("SCAFFOLD S :: Value? :: 3/4 :: numeric").unwrap();
        assert_eq!(codes(&validate(&p)), vec![IssueCode::NonNumericAnswer]);
    }

    #[test]
    fn warnings_do_not_fail() {
        let mut raw = String::from("HINT :: untitled\n");
        for i in 0..12 {
            raw.push_str(&format!("HINT h{i} :: body\n"));
        }
        let r = validate(&parse_pathway(&raw).unwrap());
        assert!(r.ok);
        assert_eq!(codes(&r), vec![IssueCode::EmptyTitle, IssueCode::PathwayTooLong]);
    }

    #[test]
    fn hand_built_hint_with_answer() {
        let mut item = PathwayItem::hint("t", "b");
        item.scaffold_answer = Some("4".into());
        let r = validate(&HintPathway { items: vec![item] });
        assert_eq!(codes(&r), vec![IssueCode::HintHasAnswer]);
        let r = validate(&HintPathway { items: vec![] });
        assert_eq!(codes(&r), vec![IssueCode::EmptyPathway]);
    }

    #[test]
    fn math_balance_cases() {
        assert!(math_is_balanced("no math"));
        assert!(math_is_balanced("$a$ and $$b$$"));
        assert!(math_is_balanced("$a$$b$"));
        assert!(math_is_balanced(r"costs \$5"));
        assert!(!math_is_balanced("$a"));
        assert!(!math_is_balanced("$$a$"));
        assert!(!math_is_balanced("$$a$ b$$"));
        assert!(!math_is_balanced("$$a"));
    }
}
