use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::prompt_library::{Level, Library};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserStats {
    pub executions: usize,
    pub commits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfluenceEdge {
    pub source_prompt: String,
    pub target: String,
    pub verbatim: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfluenceReport {
    pub edges: Vec<InfluenceEdge>,
    /// Lesson-level prompts with no textbook-level lineage root.
    pub orphans: Vec<String>,
}

impl InfluenceReport {
    pub fn verbatim_count(&self) -> usize {
        self.edges.iter().filter(|e| e.verbatim).count()
    }
}

/// Per textbook-level source: how far its descendants spread.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceInfluence {
    pub source_prompt: String,
    pub author: String,
    pub upvotes: u64,
    pub lesson_prompts: usize,
    pub verbatim: usize,
    /// Authors of descendant lesson prompts, excluding the source's author.
    pub influenced_authors: BTreeSet<String>,
}

/// One edge per lesson-level prompt, in library order.
pub fn influence_graph(library: &Library) -> InfluenceReport {
    let mut report = InfluenceReport::default();
    for p in library.prompts().iter().filter(|p| p.level == Level::Lesson) {
        match library.lineage_root(&p.prompt_id) {
            Some(root) if root.level == Level::Textbook => report.edges.push(InfluenceEdge {
                source_prompt: root.prompt_id.clone(),
                target: p.prompt_id.clone(),
                verbatim: root.body.trim() == p.body.trim(),
            }),
            _ => report.orphans.push(p.prompt_id.clone()),
        }
    }
    report
}

/// Sources ordered by number of influenced authors, then lesson prompts,
/// then prompt id.
pub fn influence_summary(library: &Library, report: &InfluenceReport) -> Vec<SourceInfluence> {
    let mut by_source: BTreeMap<&str, SourceInfluence> = BTreeMap::new();
    for e in &report.edges {
        let Some(src) = library.get(&e.source_prompt) else { continue };
        let entry = by_source.entry(&e.source_prompt).or_insert_with(|| SourceInfluence {
            source_prompt: src.prompt_id.clone(),
            author: src.author.clone(),
            upvotes: src.upvotes,
            lesson_prompts: 0,
            verbatim: 0,
            influenced_authors: BTreeSet::new(),
        });
        entry.lesson_prompts += 1;
        entry.verbatim += e.verbatim as usize;
        if let Some(target) = library.get(&e.target) {
            if target.author != src.author {
                entry.influenced_authors.insert(target.author.clone());
            }
        }
    }
    let mut out: Vec<SourceInfluence> = by_source.into_values().collect();
    out.sort_by(|a, b| {
        b.influenced_authors
            .len()
            .cmp(&a.influenced_authors.len())
            .then(b.lesson_prompts.cmp(&a.lesson_prompts))
            .then(a.source_prompt.cmp(&b.source_prompt))
    });
    out
}
