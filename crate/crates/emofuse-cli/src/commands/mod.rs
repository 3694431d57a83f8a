pub mod ablate;
pub mod eval;
pub mod featurize;
pub mod gradcheck;
pub mod kb;
pub mod tag;
pub mod train;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use emofuse::knowledge::{load_kb, KnowledgeBase};
use emofuse::kwrt::{default_function_lexicon, load_function_lexicon};
use emofuse::tasks::Resources;
use emofuse::{Error, Result};

pub const DEFAULT_SEED: u64 = 7;

/// `--out` is mandatory for commands that write.
pub fn require_out(out: Option<PathBuf>) -> Result<PathBuf> {
    out.ok_or_else(|| Error::validation("this command requires --out"))
}

pub fn load_lexicon(path: Option<&Path>) -> Result<BTreeSet<String>> {
    match path {
        Some(p) => load_function_lexicon(p),
        None => Ok(default_function_lexicon()),
    }
}

pub fn load_kb_or_empty(path: Option<&Path>) -> Result<KnowledgeBase> {
    match path {
        Some(p) => load_kb(p),
        None => Ok(KnowledgeBase::new()),
    }
}

/// Assemble run resources; relative audio paths resolve against
/// `audio_base` or, failing that, the data file's directory.
pub fn build_resources(
    kb: Option<&Path>,
    function_words: Option<&Path>,
    audio_base: Option<PathBuf>,
    data_path: &Path,
    audio: emofuse::audio::AudioConfig,
) -> Result<Resources> {
    Ok(Resources {
        lexicon: load_lexicon(function_words)?,
        kb: load_kb_or_empty(kb)?,
        audio,
        audio_base: audio_base.or_else(|| data_path.parent().map(|p| p.to_path_buf())),
    })
}
