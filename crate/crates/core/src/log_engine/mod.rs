//! Append-only, tree-structured record of every execution and commit.
//!
//! Nodes form a forest: a node's parent must already be in the log, nodes
//! never change once appended, and sequence numbers count up from 1 in
//! append order. A journaled log writes one line per node before an append
//! returns:
//!
//! ```text
//! {"seq":1,"node_id":"...","parent_id":null,"author":"p5","timestamp":"...","kind":"execution","data":{...}}
//! ```
//!
//! Execution outputs are not stored inline. Each raw text is kept in a
//! content-addressed [`BlobStore`] and nodes carry its digest; the export can
//! optionally inline them.

mod analytics;
mod export;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::content_pool::StepRef;
use crate::digest::content_digest;
use crate::journal::{Journal, JournalError};
use crate::llm_gateway::{PayloadEvent, PayloadSink};
use crate::prompt_library::Level;

pub use analytics::{
    influence_graph, influence_summary, InfluenceEdge, InfluenceReport, SourceInfluence, UserStats,
};
pub use export::{ExportFilter, ExportOptions, LOG_EXPORT_SCHEMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Execution,
    Commit,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Execution => "execution",
            NodeKind::Commit => "commit",
        })
    }
}

impl std::str::FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "execution" => Ok(NodeKind::Execution),
            "commit" => Ok(NodeKind::Commit),
            other => Err(format!("unknown node kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionData {
    pub session_id: String,
    pub execution_id: String,
    pub variant_label: String,
    pub prompt_snapshot: String,
    #[serde(default)]
    pub level: Option<Level>,
    #[serde(default)]
    pub lesson_id: Option<String>,
    pub provider: String,
    pub k: usize,
    pub step_refs: Vec<StepRef>,
    /// Digest of the selected raw output per step; failed steps are absent.
    pub output_digests: BTreeMap<StepRef, String>,
    /// Digests of every raw provider payload, in arrival order.
    pub payload_digests: Vec<String>,
    pub generations: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitData {
    pub prompt_id: String,
    pub level: Level,
    #[serde(default)]
    pub lesson_id: Option<String>,
    pub body: String,
    #[serde(default)]
    pub parent_prompt_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum NodeData {
    Execution(ExecutionData),
    Commit(CommitData),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogNode {
    pub node_id: String,
    pub parent_id: Option<String>,
    pub author: String,
    pub timestamp: DateTime<Utc>,
    #[serde(flatten)]
    pub data: NodeData,
}

impl LogNode {
    pub fn kind(&self) -> NodeKind {
        match self.data {
            NodeData::Execution(_) => NodeKind::Execution,
            NodeData::Commit(_) => NodeKind::Commit,
        }
    }

    /// The prompt text this node captured.
    pub fn prompt_body(&self) -> &str {
        match &self.data {
            NodeData::Execution(e) => &e.prompt_snapshot,
            NodeData::Commit(c) => &c.body,
        }
    }

    pub fn level(&self) -> Option<Level> {
        match &self.data {
            NodeData::Execution(e) => e.level,
            NodeData::Commit(c) => Some(c.level),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequencedNode {
    pub seq: u64,
    #[serde(flatten)]
    pub node: LogNode,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("unknown parent node {0:?}")]
    UnknownParent(String),
    #[error("duplicate node id {0:?}")]
    DuplicateId(String),
    #[error("unknown root node {0:?}")]
    UnknownRoot(String),
    #[error("cannot import log export: {0}")]
    Import(String),
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error("blob store: {0}")]
    Blob(#[from] std::io::Error),
}

/// Content-addressed store for raw generation text.
#[derive(Debug, Default)]
pub struct BlobStore {
    dir: Option<PathBuf>,
    blobs: Mutex<BTreeMap<String, Vec<u8>>>,
}

impl BlobStore {
    pub fn in_memory() -> Self {
        BlobStore::default()
    }

    /// Blobs persisted as files named by digest under `dir`.
    pub fn on_disk(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let mut blobs = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().to_string();
            if let Some(hex) = name.strip_suffix(".blob") {
                blobs.insert(format!("sha256:{hex}"), std::fs::read(entry.path())?);
            }
        }
        Ok(BlobStore {
            dir: Some(dir.to_path_buf()),
            blobs: Mutex::new(blobs),
        })
    }

    pub fn put(&self, bytes: &[u8]) -> std::io::Result<String> {
        let digest = content_digest(bytes);
        let mut blobs = self.blobs.lock().expect("blob store poisoned");
        if !blobs.contains_key(&digest) {
            if let Some(dir) = &self.dir {
                let file = dir.join(format!("{}.blob", digest.trim_start_matches("sha256:")));
                std::fs::write(file, bytes)?;
            }
            blobs.insert(digest.clone(), bytes.to_vec());
        }
        Ok(digest)
    }

    pub fn get(&self, digest: &str) -> Option<Vec<u8>> {
        self.blobs.lock().expect("blob store poisoned").get(digest).cloned()
    }

    pub fn len(&self) -> usize {
        self.blobs.lock().expect("blob store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Collects the digests of raw payloads as they are stored.
pub struct BlobPayloadSink {
    store: Arc<BlobStore>,
    digests: Mutex<Vec<String>>,
}

impl BlobPayloadSink {
    pub fn new(store: Arc<BlobStore>) -> Self {
        BlobPayloadSink {
            store,
            digests: Mutex::new(Vec::new()),
        }
    }

    pub fn into_digests(self) -> Vec<String> {
        self.digests.into_inner().expect("sink poisoned")
    }
}

impl PayloadSink for BlobPayloadSink {
    fn record(&self, event: &PayloadEvent) {
        let bytes = serde_json::to_vec(event).expect("payload events serialize");
        // A lost blob must not take down the batch; the digest is still
        // listed so the gap is visible.
        let digest = self.store.put(&bytes).unwrap_or_else(|_| content_digest(&bytes));
        self.digests.lock().expect("sink poisoned").push(digest);
    }
}

#[derive(Debug)]
pub struct EventLog {
    nodes: Vec<SequencedNode>,
    index: HashMap<String, usize>,
    children: HashMap<String, Vec<usize>>,
    journal: Option<Journal>,
    blobs: Arc<BlobStore>,
}

impl Default for EventLog {
    fn default() -> Self {
        EventLog::new()
    }
}

impl EventLog {
    pub fn new() -> Self {
        EventLog::with_blobs(Arc::new(BlobStore::in_memory()))
    }

    pub fn with_blobs(blobs: Arc<BlobStore>) -> Self {
        EventLog {
            nodes: Vec::new(),
            index: HashMap::new(),
            children: HashMap::new(),
            journal: None,
            blobs,
        }
    }

    /// Opens a journaled log in `dir` (`log.jsonl` plus `blobs/`).
    pub fn open(dir: &Path) -> Result<Self, LogError> {
        let blobs = Arc::new(BlobStore::on_disk(&dir.join("blobs"))?);
        let (journal, records) = Journal::open::<SequencedNode>(&dir.join("log.jsonl"))?;
        let mut log = EventLog::with_blobs(blobs);
        for rec in records {
            if rec.seq != log.nodes.len() as u64 + 1 {
                return Err(LogError::Import(format!("journal sequence gap at {}", rec.seq)));
            }
            log.insert(rec.node)?;
        }
        log.journal = Some(journal);
        Ok(log)
    }

    pub fn blobs(&self) -> &Arc<BlobStore> {
        &self.blobs
    }

    fn check(&self, node: &LogNode) -> Result<(), LogError> {
        if self.index.contains_key(&node.node_id) {
            return Err(LogError::DuplicateId(node.node_id.clone()));
        }
        if let Some(p) = &node.parent_id {
            if !self.index.contains_key(p) {
                return Err(LogError::UnknownParent(p.clone()));
            }
        }
        Ok(())
    }

    fn insert(&mut self, node: LogNode) -> Result<u64, LogError> {
        self.check(&node)?;
        let seq = self.nodes.len() as u64 + 1;
        let pos = self.nodes.len();
        self.index.insert(node.node_id.clone(), pos);
        if let Some(p) = &node.parent_id {
            self.children.entry(p.clone()).or_default().push(pos);
        }
        self.nodes.push(SequencedNode { seq, node });
        Ok(seq)
    }

    /// Appends a node, journaling it first when the log is durable.
    pub fn append(&mut self, node: LogNode) -> Result<u64, LogError> {
        self.check(&node)?;
        if let Some(j) = self.journal.as_mut() {
            let rec = SequencedNode {
                seq: self.nodes.len() as u64 + 1,
                node: node.clone(),
            };
            j.append(&rec)?;
        }
        self.insert(node)
    }

    /// Appends a node built around the next free `node-NNNNNN` id.
    pub fn append_with(&mut self, build: impl FnOnce(String) -> LogNode) -> Result<String, LogError> {
        let mut n = self.nodes.len() + 1;
        let mut id = format!("node-{n:06}");
        while self.index.contains_key(&id) {
            n += 1;
            id = format!("node-{n:06}");
        }
        self.append(build(id.clone()))?;
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[SequencedNode] {
        &self.nodes
    }

    pub fn get(&self, node_id: &str) -> Option<&SequencedNode> {
        self.index.get(node_id).map(|&i| &self.nodes[i])
    }

    pub fn children_of(&self, node_id: &str) -> impl Iterator<Item = &SequencedNode> {
        self.children
            .get(node_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.nodes[i])
    }

    /// Latest commit node recording `prompt_id`.
    pub fn commit_node_for(&self, prompt_id: &str) -> Option<&SequencedNode> {
        self.nodes.iter().rev().find(|n| {
            matches!(&n.node.data, NodeData::Commit(c) if c.prompt_id == prompt_id)
        })
    }

    /// Positions of `node_id` and all of its descendants, in append order.
    fn subtree(&self, node_id: &str) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.index[node_id]];
        while let Some(i) = stack.pop() {
            out.push(i);
            if let Some(kids) = self.children.get(&self.nodes[i].node.node_id) {
                stack.extend(kids.iter().copied());
            }
        }
        out.sort_unstable();
        out
    }

    /// Prompt bodies along the path from `root` to the author's final node
    /// at `level` beneath it. The final node is the author's latest commit in
    /// the subtree if there is one, else their latest node. Executions that
    /// carry no level match any level.
    pub fn iteration_chain(&self, author: &str, level: Level, root: &str) -> Result<Vec<String>, LogError> {
        if !self.index.contains_key(root) {
            return Err(LogError::UnknownRoot(root.to_string()));
        }
        let candidates: Vec<usize> = self
            .subtree(root)
            .into_iter()
            .filter(|&i| {
                let n = &self.nodes[i].node;
                n.author == author && n.level().is_none_or(|l| l == level)
            })
            .collect();
        let target = candidates
            .iter()
            .rev()
            .find(|&&i| self.nodes[i].node.kind() == NodeKind::Commit)
            .or_else(|| candidates.last())
            .copied()
            .unwrap_or(self.index[root]);

        let mut path = Vec::new();
        let mut cur = Some(target);
        while let Some(i) = cur {
            let node = &self.nodes[i].node;
            path.push(node.prompt_body().to_string());
            if node.node_id == root {
                break;
            }
            cur = node.parent_id.as_ref().map(|p| self.index[p]);
        }
        path.reverse();
        Ok(path)
    }

    /// Executions and commits per author.
    pub fn user_stats(&self) -> BTreeMap<String, UserStats> {
        let mut out: BTreeMap<String, UserStats> = BTreeMap::new();
        for n in &self.nodes {
            let s = out.entry(n.node.author.clone()).or_default();
            match n.node.kind() {
                NodeKind::Execution => s.executions += 1,
                NodeKind::Commit => s.commits += 1,
            }
        }
        out
    }

    pub fn count_by_kind(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.node.kind() == kind).count()
    }
}
