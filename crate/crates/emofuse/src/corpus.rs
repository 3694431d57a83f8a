//! Conversations, task instances, and speaker-tagged token rendering.
//!
//! Conversations arrive as JSON lines, one object per line:
//!
//! ```text
//! {"id": "c1", "labels": ["hap", "sad"], "utterances":
//!   [{"speaker": "A", "text": "hi", "emotion": "hap", "audio": null}, ...]}
//! ```
//!
//! Speaker strings are mapped to per-conversation ordinals by first
//! appearance. Loaded corpora are immutable and safe to share across
//! threads.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into a conversation's declared label set.
pub type EmotionLabel = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    /// Per-conversation speaker ordinal, by first appearance.
    pub speaker_id: usize,
    pub text: String,
    pub emotion: EmotionLabel,
    pub audio_path: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Conversation {
    pub id: String,
    pub label_set: Vec<String>,
    pub utterances: Vec<Utterance>,
}

/// One emotion-prediction instance: a history window plus the label (and
/// speaker) of the utterance that follows it. The target utterance's text
/// and audio are deliberately absent.
#[derive(Clone, Debug)]
pub struct EpcInstance {
    pub history: Vec<Utterance>,
    pub target_speaker: usize,
    pub target_label: EmotionLabel,
    pub history_window: usize,
}

/// One emotion-recognition instance: a context window whose final utterance
/// is the one to label.
#[derive(Clone, Debug)]
pub struct ErcInstance {
    pub context: Vec<Utterance>,
    /// Position of the target utterance within `context`.
    pub target_index: usize,
    pub target_label: EmotionLabel,
}

#[derive(Deserialize)]
struct RawUtterance {
    speaker: String,
    text: String,
    emotion: String,
    #[serde(default)]
    audio: Option<String>,
}

#[derive(Deserialize)]
struct RawConversation {
    id: String,
    labels: Vec<String>,
    utterances: Vec<RawUtterance>,
}

/// Load conversations from a JSONL file.
pub fn load_conversations(path: &Path) -> Result<Vec<Conversation>> {
    let file = File::open(path)?;
    load_conversations_from_reader(BufReader::new(file), &path.display().to_string())
}

/// Load conversations from any reader; `source_name` is used in error
/// messages.
pub fn load_conversations_from_reader<R: Read>(
    reader: BufReader<R>,
    source_name: &str,
) -> Result<Vec<Conversation>> {
    let mut conversations = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawConversation = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        conversations.push(validate_conversation(raw, source_name, line_no)?);
    }
    Ok(conversations)
}

fn validate_conversation(
    raw: RawConversation,
    source_name: &str,
    line_no: usize,
) -> Result<Conversation> {
    if raw.utterances.is_empty() {
        return Err(Error::validation(format!(
            "{source_name}:{line_no}: conversation {:?} has no utterances",
            raw.id
        )));
    }
    let mut speaker_ordinals: HashMap<String, usize> = HashMap::new();
    let mut utterances = Vec::with_capacity(raw.utterances.len());
    for (u_idx, utt) in raw.utterances.into_iter().enumerate() {
        if utt.text.trim().is_empty() {
            return Err(Error::validation(format!(
                "{source_name}:{line_no}: conversation {:?} utterance {} has empty text",
                raw.id, u_idx
            )));
        }
        let emotion = raw
            .labels
            .iter()
            .position(|l| l == &utt.emotion)
            .ok_or_else(|| {
                Error::validation(format!(
                    "{source_name}:{line_no}: conversation {:?} utterance {}: emotion {:?} \
                     is not in the declared label set",
                    raw.id, u_idx, utt.emotion
                ))
            })?;
        let next = speaker_ordinals.len();
        let speaker_id = *speaker_ordinals.entry(utt.speaker).or_insert(next);
        utterances.push(Utterance {
            speaker_id,
            text: utt.text,
            emotion,
            audio_path: utt.audio,
        });
    }
    Ok(Conversation {
        id: raw.id,
        label_set: raw.labels,
        utterances,
    })
}

/// All prediction instances of a conversation: exactly `N - 1` for `N`
/// utterances. Instance `k` sees the last `min(k, window)` utterances
/// ending at index `k - 1` and targets utterance `k`.
pub fn build_epc_instances(conv: &Conversation, window: usize) -> Vec<EpcInstance> {
    assert!(window >= 1, "window must be >= 1");
    let n = conv.utterances.len();
    let mut instances = Vec::with_capacity(n.saturating_sub(1));
    for k in 1..n {
        let start = k.saturating_sub(window);
        let target = &conv.utterances[k];
        instances.push(EpcInstance {
            history: conv.utterances[start..k].to_vec(),
            target_speaker: target.speaker_id,
            target_label: target.emotion,
            history_window: window,
        });
    }
    instances
}

/// All recognition instances: exactly `N`. Instance `i` sees utterances
/// `max(0, i - window + 1)..=i` with the target last.
pub fn build_erc_instances(conv: &Conversation, window: usize) -> Vec<ErcInstance> {
    assert!(window >= 1, "window must be >= 1");
    let n = conv.utterances.len();
    let mut instances = Vec::with_capacity(n);
    for i in 0..n {
        let start = (i + 1).saturating_sub(window);
        let context = conv.utterances[start..=i].to_vec();
        instances.push(ErcInstance {
            target_index: context.len() - 1,
            target_label: conv.utterances[i].emotion,
            context,
        });
    }
    instances
}

/// One token of a rendered dialogue sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RenderedToken {
    pub text: String,
    /// Index of the source utterance within the rendered slice, or `None`
    /// for speaker special tokens.
    pub utterance_index: Option<usize>,
    pub is_speaker_token: bool,
}

/// A speaker-tagged token sequence: each utterance's word tokens preceded by
/// that speaker's special token `[sK]`, `K` being the 1-based order of first
/// appearance *within this sequence*.
#[derive(Clone, Debug, Default)]
pub struct RenderedDialogue {
    pub tokens: Vec<RenderedToken>,
}

impl RenderedDialogue {
    pub fn strings(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.text.clone()).collect()
    }

    /// Append the special token for `speaker_id`, assigning the next ordinal
    /// if this speaker has not appeared yet. Used to mark the prediction
    /// target's speaker.
    pub fn push_speaker_token(&mut self, seen: &mut Vec<usize>, speaker_id: usize) {
        let ordinal = match seen.iter().position(|&s| s == speaker_id) {
            Some(p) => p + 1,
            None => {
                seen.push(speaker_id);
                seen.len()
            }
        };
        self.tokens.push(RenderedToken {
            text: format!("[s{ordinal}]"),
            utterance_index: None,
            is_speaker_token: true,
        });
    }
}

/// Render utterances into the speaker-tagged token sequence, keeping track
/// of which speakers were seen (`seen` maps ordinal-1 -> speaker_id).
pub fn render_dialogue(utterances: &[Utterance]) -> (RenderedDialogue, Vec<usize>) {
    assert!(!utterances.is_empty(), "cannot render an empty sequence");
    let mut rendered = RenderedDialogue::default();
    let mut seen: Vec<usize> = Vec::new();
    for (u_idx, utt) in utterances.iter().enumerate() {
        rendered.push_speaker_token(&mut seen, utt.speaker_id);
        for word in tokenize(&utt.text) {
            rendered.tokens.push(RenderedToken {
                text: word,
                utterance_index: Some(u_idx),
                is_speaker_token: false,
            });
        }
    }
    (rendered, seen)
}

/// Token-string view of [`render_dialogue`].
pub fn render_speaker_sequence(utterances: &[Utterance]) -> Vec<String> {
    render_dialogue(utterances).0.strings()
}

/// Lowercase and split on Unicode whitespace and ASCII punctuation;
/// punctuation is dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() || ch.is_ascii_punctuation() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else {
            current.extend(ch.to_lowercase());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}
