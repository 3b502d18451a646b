//! Answer-type normalization applied before export.
//!
//! Rules, applied per scaffold in order:
//!
//! 1. `multiple_choice` scaffolds are left alone.
//! 2. An answer that admits several forms (`or`, `and`, `±`, `+/-`, `,` or
//!    `;` separated alternatives) becomes `multiple_choice`. If the step is
//!    itself multiple choice and lists the answer, the step's choices are
//!    reused; otherwise the answer is kept as the first choice followed by
//!    two empty distractor slots, and a `NEEDS_REVIEW` warning is raised.
//!    The empty slots fail validation until someone fills them in.
//! 3. A `numeric` scaffold whose answer is not a decimal literal becomes
//!    `string_exact`, with a `NEEDS_REVIEW` warning.
//! 4. Everything else is unchanged.

use super::check::{IssueCode, ValidationIssue};
use super::{DeclaredType, HintPathway, ItemKind};
use crate::answer::{is_decimal, AnswerType};
use crate::content_pool::Step;

pub const DISTRACTOR_SLOTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub pathway: HintPathway,
    pub issues: Vec<ValidationIssue>,
}

pub fn normalize_answer_type(step: &Step, pathway: &HintPathway) -> Normalized {
    let mut out = pathway.clone();
    let mut issues = Vec::new();

    for (idx, item) in out.items.iter_mut().enumerate() {
        if item.kind != ItemKind::Scaffold {
            continue;
        }
        let Some(declared) = item.scaffold_answer_type.as_ref().and_then(DeclaredType::known) else {
            continue;
        };
        let Some(answer) = item.scaffold_answer.clone() else {
            continue;
        };
        if declared == AnswerType::MultipleChoice {
            continue;
        }

        if has_multiple_forms(&answer) {
            item.scaffold_answer_type = Some(DeclaredType::Known(AnswerType::MultipleChoice));
            let reusable = step.answer_type == AnswerType::MultipleChoice
                && step.choices.as_ref().is_some_and(|c| c.contains(&answer));
            if reusable {
                item.scaffold_choices = step.choices.clone();
            } else {
                let mut choices = vec![answer.clone()];
                choices.extend(std::iter::repeat_n(String::new(), DISTRACTOR_SLOTS));
                item.scaffold_choices = Some(choices);
                issues.push(ValidationIssue::warning(
                    IssueCode::NeedsReview,
                    format!("item[{idx}].choices"),
                    format!(
                        "answer {answer:?} admits several forms; converted to multiple_choice, \
                         fill in {DISTRACTOR_SLOTS} distractors"
                    ),
                ));
            }
            continue;
        }

        if declared == AnswerType::Numeric && !is_decimal(&answer) {
            item.scaffold_answer_type = Some(DeclaredType::Known(AnswerType::StringExact));
            issues.push(ValidationIssue::warning(
                IssueCode::NeedsReview,
                format!("item[{idx}].answer_type"),
                format!("numeric answer {answer:?} is not a decimal; converted to string_exact"),
            ));
        }
    }

    Normalized {
        pathway: out,
        issues,
    }
}

/// Detects answers that list alternatives, ignoring anything inside `$...$`.
fn has_multiple_forms(answer: &str) -> bool {
    let mut outside = String::new();
    let mut in_math = false;
    for c in answer.chars() {
        if c == '$' {
            in_math = !in_math;
            outside.push(' ');
        } else if !in_math {
            outside.push(c);
        }
    }
    let lower = outside.to_lowercase();
    if lower.contains('±') || answer.contains("\\pm") || lower.contains("+/-") {
        return true;
    }
    if lower.contains(',') || lower.contains(';') {
        return true;
    }
    lower
        .split_whitespace()
        .any(|w| w == "or" || w == "and")
}
