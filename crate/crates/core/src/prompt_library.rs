//! The shared prompt library: committed prompts at textbook or lesson level,
//! with clone/edit lineage and per-voter upvotes.
//!
//! State is a fold over an append-only operation history. When opened on a
//! path, each operation is journaled as one JSON line:
//!
//! ```text
//! {"op":"commit","prompt_id":"prm-000001","author":"p5","level":"textbook","lesson_id":null,
//!  "body":"...","parent_id":null,"origin":"commit","committed_at":"...","sequence":1}
//! {"op":"upvote","prompt_id":"prm-000001","voter":"p2","at":"..."}
//! ```
//!
//! Upvotes are counted once per (voter, prompt); authors may upvote their
//! own prompts.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::journal::{Journal, JournalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Textbook,
    Lesson,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Textbook => "textbook",
            Level::Lesson => "lesson",
        })
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "textbook" => Ok(Level::Textbook),
            "lesson" => Ok(Level::Lesson),
            other => Err(format!("unknown level {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Commit,
    Clone,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub prompt_id: String,
    pub author: String,
    pub level: Level,
    pub lesson_id: Option<String>,
    pub body: String,
    pub parent_id: Option<String>,
    pub origin: Origin,
    pub upvotes: u64,
    pub committed_at: DateTime<Utc>,
    pub sequence: u64,
}

/// What a caller supplies to commit a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewPrompt {
    pub author: String,
    pub level: Level,
    #[serde(default)]
    pub lesson_id: Option<String>,
    pub body: String,
    #[serde(default)]
    pub parent_id: Option<String>,
}

impl NewPrompt {
    pub fn textbook(author: impl Into<String>, body: impl Into<String>) -> Self {
        NewPrompt {
            author: author.into(),
            level: Level::Textbook,
            lesson_id: None,
            body: body.into(),
            parent_id: None,
        }
    }

    pub fn lesson(author: impl Into<String>, lesson_id: impl Into<String>, body: impl Into<String>) -> Self {
        NewPrompt {
            author: author.into(),
            level: Level::Lesson,
            lesson_id: Some(lesson_id.into()),
            body: body.into(),
            parent_id: None,
        }
    }

    pub fn with_parent(mut self, parent_id: impl Into<String>) -> Self {
        self.parent_id = Some(parent_id.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LibraryOp {
    Commit {
        prompt_id: String,
        author: String,
        level: Level,
        lesson_id: Option<String>,
        body: String,
        parent_id: Option<String>,
        origin: Origin,
        committed_at: DateTime<Utc>,
        sequence: u64,
    },
    Upvote {
        prompt_id: String,
        voter: String,
        at: DateTime<Utc>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryOrder {
    Sequence,
    Upvotes,
}

#[derive(Debug, thiserror::Error)]
pub enum LibraryError {
    #[error("prompt body is empty")]
    EmptyBody,
    #[error("unknown parent prompt {0:?}")]
    UnknownParent(String),
    #[error("unknown prompt {0:?}")]
    UnknownPrompt(String),
    #[error("{0}")]
    LessonMismatch(String),
    #[error("journal replay: {0}")]
    Replay(String),
    #[error(transparent)]
    Journal(#[from] JournalError),
}

#[derive(Debug, Default)]
pub struct Library {
    prompts: Vec<Prompt>,
    by_id: HashMap<String, usize>,
    voters: HashMap<String, BTreeSet<String>>,
    history: Vec<LibraryOp>,
    journal: Option<Journal>,
}

fn check_level(level: Level, lesson_id: Option<&str>) -> Result<(), LibraryError> {
    let has_lesson = lesson_id.is_some_and(|l| !l.trim().is_empty());
    match (level, has_lesson) {
        (Level::Lesson, false) => Err(LibraryError::LessonMismatch(
            "lesson-level prompts need a lesson_id".into(),
        )),
        (Level::Textbook, true) => Err(LibraryError::LessonMismatch(
            "textbook-level prompts take no lesson_id".into(),
        )),
        _ => Ok(()),
    }
}

impl Library {
    pub fn new() -> Self {
        Library::default()
    }

    /// Opens a journaled library, replaying whatever the journal holds.
    pub fn open(path: &Path) -> Result<Self, LibraryError> {
        let (journal, ops) = Journal::open::<LibraryOp>(path)?;
        let mut lib = Library::replay(ops)?;
        lib.journal = Some(journal);
        Ok(lib)
    }

    /// Rebuilds a library from its operation history.
    pub fn replay(ops: impl IntoIterator<Item = LibraryOp>) -> Result<Self, LibraryError> {
        let mut lib = Library::new();
        for op in ops {
            lib.apply(op)?;
        }
        Ok(lib)
    }

    fn apply(&mut self, op: LibraryOp) -> Result<(), LibraryError> {
        match &op {
            LibraryOp::Commit {
                prompt_id,
                author,
                level,
                lesson_id,
                body,
                parent_id,
                origin,
                committed_at,
                sequence,
            } => {
                if *sequence != self.prompts.len() as u64 + 1 || self.by_id.contains_key(prompt_id) {
                    return Err(LibraryError::Replay(format!(
                        "out-of-order commit {prompt_id} (sequence {sequence})"
                    )));
                }
                if let Some(p) = parent_id {
                    if !self.by_id.contains_key(p) {
                        return Err(LibraryError::UnknownParent(p.clone()));
                    }
                }
                self.by_id.insert(prompt_id.clone(), self.prompts.len());
                self.prompts.push(Prompt {
                    prompt_id: prompt_id.clone(),
                    author: author.clone(),
                    level: *level,
                    lesson_id: lesson_id.clone(),
                    body: body.clone(),
                    parent_id: parent_id.clone(),
                    origin: *origin,
                    upvotes: 0,
                    committed_at: *committed_at,
                    sequence: *sequence,
                });
            }
            LibraryOp::Upvote { prompt_id, voter, .. } => {
                let idx = *self
                    .by_id
                    .get(prompt_id)
                    .ok_or_else(|| LibraryError::UnknownPrompt(prompt_id.clone()))?;
                let set = self.voters.entry(prompt_id.clone()).or_default();
                set.insert(voter.clone());
                self.prompts[idx].upvotes = set.len() as u64;
            }
        }
        self.history.push(op);
        Ok(())
    }

    fn record(&mut self, op: LibraryOp) -> Result<(), LibraryError> {
        if let Some(j) = self.journal.as_mut() {
            j.append(&op)?;
        }
        self.apply(op)
    }

    fn next_sequence(&self) -> u64 {
        self.prompts.len() as u64 + 1
    }

    pub fn commit(&mut self, new: NewPrompt) -> Result<Prompt, LibraryError> {
        self.commit_at(new, Utc::now())
    }

    pub fn commit_at(&mut self, new: NewPrompt, at: DateTime<Utc>) -> Result<Prompt, LibraryError> {
        if new.body.trim().is_empty() {
            return Err(LibraryError::EmptyBody);
        }
        check_level(new.level, new.lesson_id.as_deref())?;
        if let Some(p) = &new.parent_id {
            if !self.by_id.contains_key(p) {
                return Err(LibraryError::UnknownParent(p.clone()));
            }
        }
        self.append_prompt(new, Origin::Commit, at)
    }

    fn append_prompt(&mut self, new: NewPrompt, origin: Origin, at: DateTime<Utc>) -> Result<Prompt, LibraryError> {
        let sequence = self.next_sequence();
        let prompt_id = format!("prm-{sequence:06}");
        self.record(LibraryOp::Commit {
            prompt_id: prompt_id.clone(),
            author: new.author,
            level: new.level,
            lesson_id: new.lesson_id.filter(|l| !l.trim().is_empty()),
            body: new.body,
            parent_id: new.parent_id,
            origin,
            committed_at: at,
            sequence,
        })?;
        Ok(self.prompts.last().expect("just appended").clone())
    }

    /// Copies a prompt's body into a new prompt whose parent is the source.
    pub fn clone_prompt(
        &mut self,
        prompt_id: &str,
        author: &str,
        target_level: Level,
        lesson_id: Option<&str>,
    ) -> Result<Prompt, LibraryError> {
        self.clone_prompt_at(prompt_id, author, target_level, lesson_id, Utc::now())
    }

    pub fn clone_prompt_at(
        &mut self,
        prompt_id: &str,
        author: &str,
        target_level: Level,
        lesson_id: Option<&str>,
        at: DateTime<Utc>,
    ) -> Result<Prompt, LibraryError> {
        let source = self
            .get(prompt_id)
            .ok_or_else(|| LibraryError::UnknownPrompt(prompt_id.to_string()))?;
        check_level(target_level, lesson_id)?;
        let new = NewPrompt {
            author: author.to_string(),
            level: target_level,
            lesson_id: lesson_id.map(String::from),
            body: source.body.clone(),
            parent_id: Some(source.prompt_id.clone()),
        };
        self.append_prompt(new, Origin::Clone, at)
    }

    /// Returns the prompt's upvote count after recording the vote.
    pub fn upvote(&mut self, prompt_id: &str, voter: &str) -> Result<u64, LibraryError> {
        let prompt = self
            .get(prompt_id)
            .ok_or_else(|| LibraryError::UnknownPrompt(prompt_id.to_string()))?;
        let already = self
            .voters
            .get(prompt_id)
            .is_some_and(|v| v.contains(voter));
        if already {
            return Ok(prompt.upvotes);
        }
        self.record(LibraryOp::Upvote {
            prompt_id: prompt_id.to_string(),
            voter: voter.to_string(),
            at: Utc::now(),
        })?;
        Ok(self.get(prompt_id).expect("exists").upvotes)
    }

    pub fn get(&self, prompt_id: &str) -> Option<&Prompt> {
        self.by_id.get(prompt_id).map(|&i| &self.prompts[i])
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    /// All prompts in sequence order.
    pub fn prompts(&self) -> &[Prompt] {
        &self.prompts
    }

    pub fn history(&self) -> &[LibraryOp] {
        &self.history
    }

    pub fn voters(&self, prompt_id: &str) -> Vec<&str> {
        self.voters
            .get(prompt_id)
            .map(|v| v.iter().map(String::as_str).collect())
            .unwrap_or_default()
    }

    pub fn query(&self, level: Option<Level>, lesson_id: Option<&str>, order: QueryOrder) -> Vec<Prompt> {
        let mut out: Vec<Prompt> = self
            .prompts
            .iter()
            .filter(|p| level.is_none_or(|l| p.level == l))
            .filter(|p| lesson_id.is_none_or(|l| p.lesson_id.as_deref() == Some(l)))
            .cloned()
            .collect();
        if order == QueryOrder::Upvotes {
            out.sort_by(|a, b| b.upvotes.cmp(&a.upvotes).then(a.sequence.cmp(&b.sequence)));
        }
        out
    }

    /// The prompt followed by each ancestor up to its lineage root.
    pub fn lineage(&self, prompt_id: &str) -> Vec<&Prompt> {
        let mut chain = Vec::new();
        let mut cur = self.get(prompt_id);
        while let Some(p) = cur {
            chain.push(p);
            cur = p.parent_id.as_deref().and_then(|id| self.get(id));
        }
        chain
    }

    pub fn lineage_root(&self, prompt_id: &str) -> Option<&Prompt> {
        self.lineage(prompt_id).last().copied()
    }

    /// Derived snapshot of current state.
    pub fn snapshot(&self) -> LibrarySnapshot {
        LibrarySnapshot {
            schema: "hintforge.library-snapshot/v1".into(),
            operations: self.history.len(),
            prompts: self.prompts.clone(),
        }
    }

    pub fn write_snapshot(&self, path: &Path) -> std::io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(&self.snapshot()).expect("snapshot serializes");
        bytes.push(b'\n');
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(tmp, path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibrarySnapshot {
    pub schema: String,
    pub operations: usize,
    pub prompts: Vec<Prompt>,
}
