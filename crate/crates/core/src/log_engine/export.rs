//! Nested JSON forest export (`hintforge.log-forest/v1`).
//!
//! ```json
//! {"schema":"hintforge.log-forest/v1","inline_outputs":false,"filter":null,
//!  "roots":[{"seq":1,"node_id":"...","parent_id":null,"author":"...","timestamp":"...",
//!            "kind":"execution","data":{...},"children":[...]}]}
//! ```
//!
//! Children are ordered by sequence number. With a filter, nodes that do not
//! match but have matching descendants are kept as stubs
//! `{"seq":n,"node_id":"...","elided":true,"children":[...]}`; everything
//! else that does not match is dropped. Only unfiltered exports can be
//! imported. Output is compact JSON with a trailing newline.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{EventLog, LogError, LogNode, NodeData, NodeKind};
use crate::digest::content_digest;

pub const LOG_EXPORT_SCHEMA: &str = "hintforge.log-forest/v1";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<NodeKind>,
    /// Inclusive lower bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<DateTime<Utc>>,
    /// Inclusive upper bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<DateTime<Utc>>,
}

impl ExportFilter {
    pub fn is_empty(&self) -> bool {
        self == &ExportFilter::default()
    }

    pub fn matches(&self, node: &LogNode) -> bool {
        self.author.as_ref().is_none_or(|a| &node.author == a)
            && self.kind.is_none_or(|k| node.kind() == k)
            && self.from.is_none_or(|t| node.timestamp >= t)
            && self.to.is_none_or(|t| node.timestamp <= t)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExportOptions {
    pub filter: ExportFilter,
    pub inline_outputs: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ForestDocument {
    schema: String,
    inline_outputs: bool,
    filter: Option<ExportFilter>,
    roots: Vec<ExportNode>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ExportNode {
    Full(FullNode),
    Stub(StubNode),
}

#[derive(Debug, Serialize, Deserialize)]
struct FullNode {
    seq: u64,
    #[serde(flatten)]
    node: LogNode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outputs: Option<BTreeMap<String, String>>,
    children: Vec<ExportNode>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StubNode {
    seq: u64,
    node_id: String,
    elided: bool,
    children: Vec<ExportNode>,
}

impl EventLog {
    pub fn export_json(&self, options: &ExportOptions) -> Vec<u8> {
        let n = self.nodes.len();
        let keep: Vec<bool> = self.nodes.iter().map(|s| options.filter.matches(&s.node)).collect();
        // Children always come after their parent, so one reverse pass
        // propagates "has a kept descendant" upward.
        let mut include = keep.clone();
        for i in (0..n).rev() {
            if include[i] {
                if let Some(p) = &self.nodes[i].node.parent_id {
                    include[self.index[p]] = true;
                }
            }
        }

        let roots = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(i, s)| s.node.parent_id.is_none() && include[*i])
            .map(|(i, _)| self.export_node(i, &keep, &include, options.inline_outputs))
            .collect();
        let doc = ForestDocument {
            schema: LOG_EXPORT_SCHEMA.to_string(),
            inline_outputs: options.inline_outputs,
            filter: (!options.filter.is_empty()).then(|| options.filter.clone()),
            roots,
        };
        let mut bytes = serde_json::to_vec(&doc).expect("log export serializes");
        bytes.push(b'\n');
        bytes
    }

    fn export_node(&self, i: usize, keep: &[bool], include: &[bool], inline: bool) -> ExportNode {
        let s = &self.nodes[i];
        let children = self
            .children
            .get(&s.node.node_id)
            .into_iter()
            .flatten()
            .filter(|&&c| include[c])
            .map(|&c| self.export_node(c, keep, include, inline))
            .collect();
        if !keep[i] {
            return ExportNode::Stub(StubNode {
                seq: s.seq,
                node_id: s.node.node_id.clone(),
                elided: true,
                children,
            });
        }
        let outputs = match (&s.node.data, inline) {
            (NodeData::Execution(e), true) => Some(
                e.output_digests
                    .values()
                    .filter_map(|d| {
                        let bytes = self.blobs.get(d)?;
                        Some((d.clone(), String::from_utf8_lossy(&bytes).into_owned()))
                    })
                    .collect(),
            ),
            _ => None,
        };
        ExportNode::Full(FullNode {
            seq: s.seq,
            node: s.node.clone(),
            outputs,
            children,
        })
    }

    /// Rebuilds an in-memory log from an unfiltered export.
    pub fn import_json(bytes: &[u8]) -> Result<EventLog, LogError> {
        let mut de = serde_json::Deserializer::from_slice(bytes);
        de.disable_recursion_limit();
        let doc = ForestDocument::deserialize(&mut de).map_err(|e| LogError::Import(e.to_string()))?;
        if doc.schema != LOG_EXPORT_SCHEMA {
            return Err(LogError::Import(format!("unsupported schema {:?}", doc.schema)));
        }
        if doc.filter.is_some() {
            return Err(LogError::Import("filtered exports cannot be imported".into()));
        }

        let mut flat: Vec<(u64, LogNode, BTreeMap<String, String>)> = Vec::new();
        let mut stack: Vec<ExportNode> = doc.roots;
        while let Some(node) = stack.pop() {
            match node {
                ExportNode::Full(f) => {
                    flat.push((f.seq, f.node, f.outputs.unwrap_or_default()));
                    stack.extend(f.children);
                }
                ExportNode::Stub(s) => {
                    return Err(LogError::Import(format!("elided node {} in export", s.node_id)))
                }
            }
        }
        flat.sort_by_key(|(seq, _, _)| *seq);

        let mut log = EventLog::new();
        for (seq, node, outputs) in flat {
            if seq != log.len() as u64 + 1 {
                return Err(LogError::Import(format!("sequence gap at {seq}")));
            }
            for (digest, text) in outputs {
                if content_digest(text.as_bytes()) != digest {
                    return Err(LogError::Import(format!("output does not match digest {digest}")));
                }
                log.blobs.put(text.as_bytes())?;
            }
            log.insert(node)?;
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{commit, exec, ts};
    use super::*;
    use crate::content_pool::StepRef;
    use std::collections::BTreeSet;

    #[test]
    fn empty_log_is_empty_forest() {
        let bytes = EventLog::new().export_json(&ExportOptions::default());
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "{\"schema\":\"hintforge.log-forest/v1\",\"inline_outputs\":false,\"filter\":null,\"roots\":[]}\n"
        );
    }

    #[test]
    fn nested_shape_and_round_trip() {
        let mut log = EventLog::new();
        log.append(exec("a", None, "u", "x", 0)).unwrap();
        log.append(exec("b", Some("a"), "u", "y", 1)).unwrap();
        log.append(commit("c", Some("a"), "v", "z", 2)).unwrap();
        log.append(exec("d", None, "v", "w", 3)).unwrap();
        let bytes = log.export_json(&ExportOptions::default());
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["roots"].as_array().unwrap().len(), 2);
        assert_eq!(v["roots"][0]["children"][1]["node_id"], "c");
        let again = EventLog::import_json(&bytes).unwrap().export_json(&ExportOptions::default());
        assert_eq!(bytes, again);
    }

    #[test]
    fn inline_outputs_round_trip() {
        let mut log = EventLog::new();
        let digest = log.blobs().put(b"HINT a :: b").unwrap();
        let mut node = exec("a", None, "u", "x", 0);
        if let NodeData::Execution(e) = &mut node.data {
            e.output_digests.insert(StepRef::new("P1", "s1"), digest.clone());
        }
        log.append(node).unwrap();
        let opts = ExportOptions {
            inline_outputs: true,
            ..Default::default()
        };
        let bytes = log.export_json(&opts);
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["roots"][0]["outputs"][&digest], "HINT a :: b");
        let imported = EventLog::import_json(&bytes).unwrap();
        assert_eq!(imported.blobs().get(&digest).unwrap(), b"HINT a :: b");
        assert_eq!(imported.export_json(&opts), bytes);
    }

    #[test]
    fn import_rejects_filtered_or_broken_exports() {
        let mut log = EventLog::new();
        log.append(exec("a", None, "u", "x", 0)).unwrap();
        log.append(commit("b", Some("a"), "u", "y", 1)).unwrap();
        let filtered = log.export_json(&ExportOptions {
            filter: ExportFilter {
                kind: Some(NodeKind::Commit),
                ..Default::default()
            },
            inline_outputs: false,
        });
        assert!(matches!(EventLog::import_json(&filtered), Err(LogError::Import(_))));
        assert!(matches!(EventLog::import_json(b"{}"), Err(LogError::Import(_))));
    }

    /// Constructed 20-node log: three trees with mixed kinds, authors and times.
    fn twenty_node_log() -> EventLog {
        let mut log = EventLog::new();
        let spec: [(&str, Option<&str>, &str, bool); 20] = [
            ("r1", None, "p1", false),
            ("a1", Some("r1"), "p1", false),
            ("a2", Some("a1"), "p1", true),
            ("a3", Some("a2"), "p2", false),
            ("a4", Some("a3"), "p2", true),
            ("b1", Some("r1"), "p3", false),
            ("b2", Some("b1"), "p3", false),
            ("r2", None, "p2", false),
            ("c1", Some("r2"), "p2", false),
            ("c2", Some("c1"), "p2", false),
            ("c3", Some("r2"), "p4", true),
            ("r3", None, "p4", true),
            ("d1", Some("r3"), "p4", false),
            ("d2", Some("d1"), "p1", false),
            ("d3", Some("d2"), "p1", true),
            ("d4", Some("r3"), "p4", false),
            ("a5", Some("a4"), "p2", false),
            ("b3", Some("b2"), "p3", false),
            ("c4", Some("c2"), "p2", false),
            ("d5", Some("d4"), "p3", true),
        ];
        for (t, (id, parent, author, is_commit)) in spec.iter().enumerate() {
            let node = if *is_commit {
                commit(id, *parent, author, id, t as i64)
            } else {
                exec(id, *parent, author, id, t as i64)
            };
            log.append(node).unwrap();
        }
        log
    }

    /// Brute force: which nodes should appear in full and which as stubs.
    fn oracle(log: &EventLog, filter: &ExportFilter) -> (BTreeSet<String>, BTreeSet<String>) {
        let full: BTreeSet<String> = log
            .nodes()
            .iter()
            .filter(|s| filter.matches(&s.node))
            .map(|s| s.node.node_id.clone())
            .collect();
        let mut stubs = BTreeSet::new();
        for id in &full {
            let mut cur = log.get(id).unwrap().node.parent_id.clone();
            while let Some(p) = cur {
                if !full.contains(&p) {
                    stubs.insert(p.clone());
                }
                cur = log.get(&p).unwrap().node.parent_id.clone();
            }
        }
        (full, stubs)
    }

    fn collect(v: &serde_json::Value, full: &mut BTreeSet<String>, stubs: &mut BTreeSet<String>) {
        for n in v.as_array().unwrap() {
            let id = n["node_id"].as_str().unwrap().to_string();
            if n.get("elided").is_some() {
                assert!(n.get("author").is_none());
                stubs.insert(id);
            } else {
                full.insert(id);
            }
            collect(&n["children"], full, stubs);
        }
    }

    #[test]
    fn filters_match_oracle() {
        let log = twenty_node_log();
        let filters = [
            ExportFilter {
                kind: Some(NodeKind::Commit),
                ..Default::default()
            },
            ExportFilter {
                author: Some("p1".into()),
                ..Default::default()
            },
            ExportFilter {
                from: Some(ts(5)),
                to: Some(ts(12)),
                ..Default::default()
            },
            ExportFilter {
                author: Some("p4".into()),
                kind: Some(NodeKind::Execution),
                ..Default::default()
            },
            ExportFilter::default(),
        ];
        for filter in filters {
            let bytes = log.export_json(&ExportOptions {
                filter: filter.clone(),
                inline_outputs: false,
            });
            let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            let (mut full, mut stubs) = (BTreeSet::new(), BTreeSet::new());
            collect(&v["roots"], &mut full, &mut stubs);
            let (want_full, want_stubs) = oracle(&log, &filter);
            assert_eq!(full, want_full, "{filter:?}");
            assert_eq!(stubs, want_stubs, "{filter:?}");
        }
    }

    #[test]
    fn commit_filter_elides_execution_ancestors() {
        let log = twenty_node_log();
        let bytes = log.export_json(&ExportOptions {
            filter: ExportFilter {
                kind: Some(NodeKind::Commit),
                ..Default::default()
            },
            inline_outputs: false,
        });
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        // r1 is an execution with commit descendants (a2, a4).
        assert_eq!(v["roots"][0]["node_id"], "r1");
        assert_eq!(v["roots"][0]["elided"], true);
        let (mut full, mut stubs) = (BTreeSet::new(), BTreeSet::new());
        collect(&v["roots"], &mut full, &mut stubs);
        assert_eq!(full.len(), log.count_by_kind(NodeKind::Commit));
    }
}
