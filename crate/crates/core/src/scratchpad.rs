//! Per-user scratchpad sessions: labeled prompt variants, executions
//! against sampled steps, and sentence-level diffs between iterations.
//!
//! Execution log nodes are linked as follows: a variant's execution hangs
//! under that variant's previous execution; a variant's first execution
//! hangs under the latest node of the variant it was derived from; a variant
//! with neither starts a new root.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::consistency::Embedder;
use crate::content_pool::{ContentPool, StepRef};
use crate::llm_gateway::{Gateway, GatewayError, GenerationStep};
use crate::log_engine::{BlobPayloadSink, EventLog, ExecutionData, LogError, LogNode, NodeData};
use crate::pipeline::{run_generation, GenerationPlan, StepOutcome};
use crate::prompt_library::Level;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub variant_label: String,
    pub body: String,
    pub derived_from: Option<String>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub execution_id: String,
    pub session_id: String,
    pub variant_label: String,
    pub prompt_body_snapshot: String,
    pub sampled_step_refs: Vec<StepRef>,
    pub outputs: BTreeMap<StepRef, StepOutcome>,
    pub provider: String,
    pub k: usize,
    pub seed: u64,
    pub generations: usize,
    pub log_node_id: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScratchpadError {
    #[error("variant body is empty")]
    EmptyBody,
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
    #[error("unresolved step refs: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))]
    UnresolvedStepRef(Vec<StepRef>),
    #[error("no steps to execute")]
    NoSteps,
    #[error("provider unavailable: {0}")]
    GatewayUnavailable(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Log(#[from] LogError),
}

/// Label for the `n`th variant (1-based): A…Z, AA…AZ, BA…
pub fn variant_label(mut n: usize) -> String {
    assert!(n > 0, "labels start at 1");
    let mut out = Vec::new();
    while n > 0 {
        n -= 1;
        out.push(b'A' + (n % 26) as u8);
        n /= 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub author: String,
    pub pool_id: String,
    #[serde(default)]
    pub level: Option<Level>,
    #[serde(default)]
    pub lesson_id: Option<String>,
    pub variants: Vec<Variant>,
    /// Variants ever created, deleted ones included.
    pub created: usize,
    pub executions: Vec<ExecutionRecord>,
    /// Latest log node per variant label.
    pub last_node: BTreeMap<String, String>,
}

/// What an execution runs against.
pub struct ExecutionEnv<'a> {
    pub pool: &'a ContentPool,
    pub gateway: &'a Gateway,
    pub embedder: &'a dyn Embedder,
    pub provider: &'a str,
    pub jobs: usize,
}

impl Session {
    pub fn new(session_id: impl Into<String>, author: impl Into<String>, pool_id: impl Into<String>) -> Self {
        Session {
            session_id: session_id.into(),
            author: author.into(),
            pool_id: pool_id.into(),
            level: None,
            lesson_id: None,
            variants: Vec::new(),
            created: 0,
            executions: Vec::new(),
            last_node: BTreeMap::new(),
        }
    }

    pub fn variant(&self, label: &str) -> Option<&Variant> {
        self.variants.iter().find(|v| v.variant_label == label)
    }

    pub fn create_variant(&mut self, body: &str, derived_from: Option<&str>) -> Result<Variant, ScratchpadError> {
        if body.trim().is_empty() {
            return Err(ScratchpadError::EmptyBody);
        }
        if let Some(d) = derived_from {
            if self.variant(d).is_none() {
                return Err(ScratchpadError::UnknownVariant(d.to_string()));
            }
        }
        self.created += 1;
        let v = Variant {
            variant_label: variant_label(self.created),
            body: body.to_string(),
            derived_from: derived_from.map(String::from),
            created_at: Utc::now(),
        };
        self.variants.push(v.clone());
        Ok(v)
    }

    /// Removes a variant. Its label is never handed out again.
    pub fn delete_variant(&mut self, label: &str) -> Result<Variant, ScratchpadError> {
        let pos = self
            .variants
            .iter()
            .position(|v| v.variant_label == label)
            .ok_or_else(|| ScratchpadError::UnknownVariant(label.to_string()))?;
        Ok(self.variants.remove(pos))
    }

    fn parent_node(&self, label: &str) -> Option<String> {
        if let Some(n) = self.last_node.get(label) {
            return Some(n.clone());
        }
        let mut cur = self.variant(label).and_then(|v| v.derived_from.clone());
        while let Some(d) = cur {
            if let Some(n) = self.last_node.get(&d) {
                return Some(n.clone());
            }
            cur = self.variant(&d).and_then(|v| v.derived_from.clone());
        }
        None
    }

    /// Records that `node_id` is now the latest log node for `label`.
    pub fn note_node(&mut self, label: &str, node_id: &str) {
        self.last_node.insert(label.to_string(), node_id.to_string());
    }

    /// The log node a commit of `label` should hang under.
    pub fn commit_parent(&self, label: &str) -> Option<String> {
        self.parent_node(label)
    }

    pub fn execute(
        &mut self,
        label: &str,
        step_refs: &[StepRef],
        env: &ExecutionEnv<'_>,
        log: &Mutex<EventLog>,
        k: usize,
        seed: u64,
    ) -> Result<ExecutionRecord, ScratchpadError> {
        let variant = self
            .variant(label)
            .cloned()
            .ok_or_else(|| ScratchpadError::UnknownVariant(label.to_string()))?;
        if step_refs.is_empty() {
            return Err(ScratchpadError::NoSteps);
        }
        let unresolved: Vec<StepRef> = step_refs
            .iter()
            .filter(|r| env.pool.resolve(r).is_none())
            .cloned()
            .collect();
        if !unresolved.is_empty() {
            return Err(ScratchpadError::UnresolvedStepRef(unresolved));
        }
        let steps: Vec<GenerationStep> = step_refs
            .iter()
            .map(|r| GenerationStep::from_pool(env.pool, r).expect("resolved above"))
            .collect();

        let started_at = Utc::now();
        let blobs = Arc::clone(log.lock().expect("log poisoned").blobs());
        let sink = BlobPayloadSink::new(Arc::clone(&blobs));
        let mut plan = GenerationPlan::new(variant.body.clone(), steps, env.provider, k, seed);
        plan.jobs = env.jobs;
        let run = run_generation(env.gateway, env.embedder, &plan, &sink, &|_, _| {})?;
        if run.generations == 0 {
            if let Some(e) = &run.provider_error {
                return Err(ScratchpadError::GatewayUnavailable(e.clone()));
            }
        }

        let mut output_digests = BTreeMap::new();
        for (key, outcome) in &run.outcomes {
            if let StepOutcome::Ok(r) = outcome {
                output_digests.insert(key.clone(), blobs.put(r.raw.as_bytes()).map_err(LogError::from)?);
            }
        }
        let execution_id = format!("{}-x{:04}", self.session_id, self.executions.len() + 1);
        let data = NodeData::Execution(ExecutionData {
            session_id: self.session_id.clone(),
            execution_id: execution_id.clone(),
            variant_label: label.to_string(),
            prompt_snapshot: variant.body.clone(),
            level: self.level,
            lesson_id: self.lesson_id.clone(),
            provider: env.provider.to_string(),
            k,
            step_refs: step_refs.to_vec(),
            output_digests,
            payload_digests: sink.into_digests(),
            generations: run.generations,
            failures: run.failures(),
        });
        let parent_id = self.parent_node(label);
        let node_id = log.lock().expect("log poisoned").append_with(|node_id| LogNode {
            node_id,
            parent_id,
            author: self.author.clone(),
            timestamp: Utc::now(),
            data,
        })?;
        self.note_node(label, &node_id);

        let record = ExecutionRecord {
            execution_id,
            session_id: self.session_id.clone(),
            variant_label: label.to_string(),
            prompt_body_snapshot: variant.body,
            sampled_step_refs: step_refs.to_vec(),
            outputs: run.outcomes,
            provider: env.provider.to_string(),
            k,
            seed,
            generations: run.generations,
            log_node_id: node_id,
            started_at,
            finished_at: Utc::now(),
        };
        self.executions.push(record.clone());
        Ok(record)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    /// Position in the old list (removals) or the new list (additions).
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDiff {
    pub removed: Vec<SentenceSpan>,
    pub added: Vec<SentenceSpan>,
    pub unchanged_count: usize,
}

impl PromptDiff {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }
}

/// Splits on `.`, `!` or `?` followed by whitespace. Sentences are trimmed;
/// empty ones are dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            if let Some(&(_, next)) = chars.peek() {
                if next.is_whitespace() {
                    let end = i + c.len_utf8();
                    push_sentence(&mut out, &text[start..end]);
                    start = end;
                }
            }
        }
    }
    push_sentence(&mut out, &text[start..]);
    out
}

fn push_sentence(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

/// Sentence-level LCS diff from `old` to `new`.
pub fn diff(old: &str, new: &str) -> PromptDiff {
    let a = split_sentences(old);
    let b = split_sentences(new);
    let (n, m) = (a.len(), b.len());
    // lcs[i][j] = LCS length of a[i..] and b[j..]
    let mut lcs = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if a[i] == b[j] {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let mut d = PromptDiff::default();
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && a[i] == b[j] {
            d.unchanged_count += 1;
            i += 1;
            j += 1;
        } else if j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j]) {
            d.added.push(SentenceSpan { index: j, text: b[j].clone() });
            j += 1;
        } else {
            d.removed.push(SentenceSpan { index: i, text: a[i].clone() });
            i += 1;
        }
    }
    d
}

/// Applies a diff to `old`, giving the new body's sentence list.
pub fn apply_diff(old: &str, diff: &PromptDiff) -> Vec<String> {
    let removed: std::collections::BTreeSet<usize> = diff.removed.iter().map(|s| s.index).collect();
    let mut out: Vec<String> = split_sentences(old)
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, s)| s)
        .collect();
    for span in &diff.added {
        out.insert(span.index.min(out.len()), span.text.clone());
    }
    out
}
