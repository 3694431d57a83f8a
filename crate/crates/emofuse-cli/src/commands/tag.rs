//! `tag`: emit per-conversation word matrices, pair tags, and importance
//! scores as JSON.

use std::path::PathBuf;

use emofuse::corpus::{load_conversations, render_dialogue};
use emofuse::knowledge::load_kb;
use emofuse::kwrt::{build_importance, squeeze_importance, tag_matrix};
use emofuse::Result;

use crate::TagArgs;

pub fn run(args: TagArgs, _seed: Option<u64>, out: Option<PathBuf>) -> Result<i32> {
    let out_dir = super::require_out(out)?;
    let kb = load_kb(&args.kb)?;
    let lexicon = super::load_lexicon(args.function_words.as_deref())?;
    let conversations = load_conversations(&args.input)?;
    std::fs::create_dir_all(&out_dir)?;

    for conv in &conversations {
        let (rendered, _) = render_dialogue(&conv.utterances);
        let mats = build_importance(&rendered, &lexicon, &kb);
        let scores = squeeze_importance(&mats);
        let tags = tag_matrix(&mats, &kb);
        let payload = serde_json::json!({
            "id": conv.id,
            "tokens": rendered.strings(),
            "words": mats.words.iter().map(|w| w.surface.clone()).collect::<Vec<_>>(),
            "is_content": mats.words.iter().map(|w| w.is_content).collect::<Vec<_>>(),
            "tags": tags,
            "m_rec": mats.m_rec.to_rows(),
            "m_rel": mats.m_rel.to_rows(),
            "m": mats.m.to_rows(),
            "scores": scores.scores,
        });
        let path = out_dir.join(format!("{}.json", sanitize(&conv.id)));
        std::fs::write(&path, serde_json::to_string_pretty(&payload).expect("tag payload"))?;
    }
    println!("tagged {} conversations -> {}", conversations.len(), out_dir.display());
    Ok(0)
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
