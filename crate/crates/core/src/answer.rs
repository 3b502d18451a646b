//! Answer types shared by content steps and scaffold items.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// How a student's answer to a step or scaffold is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    Numeric,
    MultipleChoice,
    StringExact,
}

impl AnswerType {
    pub const ALL: [AnswerType; 3] = [
        AnswerType::Numeric,
        AnswerType::MultipleChoice,
        AnswerType::StringExact,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnswerType::Numeric => "numeric",
            AnswerType::MultipleChoice => "multiple_choice",
            AnswerType::StringExact => "string_exact",
        }
    }
}

impl fmt::Display for AnswerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown answer type {0:?}")]
pub struct UnknownAnswerType(pub String);

impl FromStr for AnswerType {
    type Err = UnknownAnswerType;

    /// Accepts the canonical snake_case names plus the spellings tutors
    /// tend to type by hand: `multiple choice`, `multiple-choice`, `string`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        match folded.as_str() {
            "numeric" => Ok(AnswerType::Numeric),
            "multiple_choice" => Ok(AnswerType::MultipleChoice),
            "string_exact" | "string" => Ok(AnswerType::StringExact),
            _ => Err(UnknownAnswerType(s.to_string())),
        }
    }
}

/// True when `s` is a plain decimal literal: optional sign, digits, optional
/// fractional part. No exponents, no thousands separators.
pub fn is_decimal(s: &str) -> bool {
    let s = s.trim();
    let s = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (s, None),
    };
    let digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
    match frac {
        None => !int.is_empty() && digits(int),
        Some(f) => (!int.is_empty() || !f.is_empty()) && digits(int) && digits(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_aliases() {
        assert_eq!("multiple choice".parse(), Ok(AnswerType::MultipleChoice));
        assert_eq!("Multiple-Choice".parse(), Ok(AnswerType::MultipleChoice));
        assert_eq!("string".parse(), Ok(AnswerType::StringExact));
        assert_eq!(" numeric ".parse(), Ok(AnswerType::Numeric));
        assert!("essay".parse::<AnswerType>().is_err());
    }

    #[test]
    fn decimal_literals() {
        for ok in ["0", "-3", "+2.5", "12.", ".75", " 4 "] {
            assert!(is_decimal(ok), "{ok}");
        }
        for bad in ["", ".", "-", "1e5", "1,000", "x=2", "3/4", "inf", "NaN"] {
            assert!(!is_decimal(bad), "{bad}");
        }
    }
}
