//! `kb stats`: triple, vocabulary, and per-relation counts.

use std::path::Path;

use emofuse::knowledge::load_kb;
use emofuse::Result;

pub fn stats(path: &Path) -> Result<i32> {
    let kb = load_kb(path)?;
    println!("triples: {}", kb.triple_count());
    println!("vocabulary: {}", kb.vocabulary_size());
    for (relation, count) in kb.relation_counts() {
        println!("{relation:?}: {count}");
    }
    println!("skipped: {}", kb.skipped_count());
    Ok(0)
}
