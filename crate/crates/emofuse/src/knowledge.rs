//! Offline common-sense relation store.
//!
//! Answers "which of IsA / HasContext / Causes hold between a word pair?"
//! from a TSV file of triples, standing in for a full knowledge graph.
//! Lookups are symmetric: the index unions both directions of a pair.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// The closed relation set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RelationKind {
    IsA,
    HasContext,
    Causes,
}

impl RelationKind {
    pub const ALL: [RelationKind; 3] = [
        RelationKind::IsA,
        RelationKind::HasContext,
        RelationKind::Causes,
    ];

    /// Single-letter tag code used in rendered tag strings.
    pub fn code(self) -> char {
        match self {
            RelationKind::IsA => 'I',
            RelationKind::HasContext => 'H',
            RelationKind::Causes => 'C',
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "IsA" => Some(RelationKind::IsA),
            "HasContext" => Some(RelationKind::HasContext),
            "Causes" => Some(RelationKind::Causes),
            _ => None,
        }
    }
}

/// Immutable triple store with an unordered-pair index.
#[derive(Clone, Debug, Default)]
pub struct KnowledgeBase {
    triples: BTreeSet<(String, RelationKind, String)>,
    index: BTreeMap<(String, String), BTreeSet<RelationKind>>,
    skipped: usize,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of stored (deduplicated) triples.
    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    /// Lines skipped during load (unsupported relation or multi-word term).
    pub fn skipped_count(&self) -> usize {
        self.skipped
    }

    /// Distinct words across heads and tails.
    pub fn vocabulary_size(&self) -> usize {
        let mut words = BTreeSet::new();
        for (h, _, t) in &self.triples {
            words.insert(h);
            words.insert(t);
        }
        words.len()
    }

    pub fn relation_counts(&self) -> BTreeMap<RelationKind, usize> {
        let mut counts = BTreeMap::new();
        for (_, r, _) in &self.triples {
            *counts.entry(*r).or_insert(0) += 1;
        }
        counts
    }

    /// Insert one triple. Words must be lowercase single tokens.
    pub fn add_triple(&mut self, head: &str, relation: RelationKind, tail: &str) {
        debug_assert!(!head.contains(char::is_whitespace));
        debug_assert!(!tail.contains(char::is_whitespace));
        self.triples
            .insert((head.to_string(), relation, tail.to_string()));
        self.index
            .entry(pair_key(head, tail))
            .or_default()
            .insert(relation);
    }

    /// Relations holding between `a` and `b` in either direction. Unknown
    /// words give the empty set.
    pub fn query_relations(&self, a: &str, b: &str) -> BTreeSet<RelationKind> {
        self.index.get(&pair_key(a, b)).cloned().unwrap_or_default()
    }
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Load a TSV triple file: `head <TAB> relation <TAB> tail` per line.
/// Unknown relation names and multi-word terms are skipped (counted);
/// anything that is not three fields is a parse error.
pub fn load_kb(path: &Path) -> Result<KnowledgeBase> {
    let file = File::open(path)?;
    load_kb_from_reader(BufReader::new(file), &path.display().to_string())
}

pub fn load_kb_from_reader<R: Read>(reader: BufReader<R>, source_name: &str) -> Result<KnowledgeBase> {
    let mut kb = KnowledgeBase::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let head = fields[0].trim().to_lowercase();
        let tail = fields[2].trim().to_lowercase();
        let relation = match RelationKind::from_name(fields[1].trim()) {
            Some(r) => r,
            None => {
                kb.skipped += 1;
                continue;
            }
        };
        if head.is_empty()
            || tail.is_empty()
            || head.contains(char::is_whitespace)
            || tail.contains(char::is_whitespace)
        {
            kb.skipped += 1;
            continue;
        }
        kb.add_triple(&head, relation, &tail);
    }
    Ok(kb)
}
