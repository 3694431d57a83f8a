//! Synthetic separable corpora for tests, demos, and the overfit sanity
//! check.
//!
//! Each utterance carries two marker words: `self<L>` names its own label
//! and `cue<L>` names the label of the *next* utterance, so both the
//! recognition and the prediction task are learnable from text alone. When
//! audio is requested, each utterance gets a tone whose frequency also
//! encodes the next label.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::write_wav_16bit;
use crate::corpus::{Conversation, Utterance};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub n_conversations: usize,
    pub utterances_per_conversation: usize,
    pub n_speakers: usize,
    pub labels: Vec<String>,
    pub seed: u64,
    /// Write one WAV per utterance into this directory when set.
    pub audio_dir: Option<PathBuf>,
    pub audio_secs: f64,
    pub sample_rate: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_conversations: 8,
            utterances_per_conversation: 5,
            n_speakers: 2,
            labels: vec!["calm".to_string(), "tense".to_string()],
            seed: 7,
            audio_dir: None,
            audio_secs: 0.12,
            sample_rate: 16_000,
        }
    }
}

const FILLERS: [&str; 8] = ["well", "so", "right", "okay", "see", "now", "then", "sure"];

/// Generate a separable corpus (writing WAV files if configured).
pub fn generate(cfg: &SynthConfig) -> Result<Vec<Conversation>> {
    assert!(!cfg.labels.is_empty(), "need at least one label");
    assert!(cfg.n_speakers >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if let Some(dir) = &cfg.audio_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut conversations = Vec::with_capacity(cfg.n_conversations);
    for c in 0..cfg.n_conversations {
        let id = format!("synth{c:03}");
        let n = cfg.utterances_per_conversation;
        let label_seq: Vec<usize> = (0..n).map(|_| rng.gen_range(0..cfg.labels.len())).collect();

        let mut utterances = Vec::with_capacity(n);
        for i in 0..n {
            let own = label_seq[i];
            let next = label_seq.get(i + 1).copied();
            let filler_a = FILLERS[rng.gen_range(0..FILLERS.len())];
            let filler_b = FILLERS[rng.gen_range(0..FILLERS.len())];
            let mut text = format!("{filler_a} self{own} {filler_b}");
            if let Some(next) = next {
                text.push_str(&format!(" cue{next}"));
            }

            let audio_path = match &cfg.audio_dir {
                Some(dir) => Some(write_tone(
                    dir,
                    &id,
                    i,
                    next.unwrap_or(own),
                    cfg.audio_secs,
                    cfg.sample_rate,
                )?),
                None => None,
            };

            utterances.push(Utterance {
                speaker_id: i % cfg.n_speakers,
                text,
                emotion: own,
                audio_path,
            });
        }
        conversations.push(Conversation {
            id,
            label_set: cfg.labels.clone(),
            utterances,
        });
    }
    Ok(conversations)
}

/// A tone whose fundamental encodes `coded_label`.
fn write_tone(
    dir: &Path,
    conv_id: &str,
    utt_idx: usize,
    coded_label: usize,
    secs: f64,
    rate: u32,
) -> Result<String> {
    let freq = 180.0 + 80.0 * coded_label as f64;
    let n = (secs * rate as f64) as usize;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            0.6 * (2.0 * std::f64::consts::PI * freq * t).sin()
                + 0.2 * (2.0 * std::f64::consts::PI * 2.0 * freq * t).sin()
        })
        .collect();
    let path = dir.join(format!("{conv_id}_u{utt_idx}.wav"));
    write_wav_16bit(&path, &samples, rate)?;
    Ok(path.display().to_string())
}

/// Serialize conversations to the JSONL exchange format.
pub fn conversations_to_jsonl(conversations: &[Conversation]) -> String {
    let mut out = String::new();
    for conv in conversations {
        let utterances: Vec<serde_json::Value> = conv
            .utterances
            .iter()
            .map(|u| {
                serde_json::json!({
                    "speaker": format!("spk{}", u.speaker_id),
                    "text": u.text,
                    "emotion": conv.label_set[u.emotion],
                    "audio": u.audio_path,
                })
            })
            .collect();
        let line = serde_json::json!({
            "id": conv.id,
            "labels": conv.label_set,
            "utterances": utterances,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// Write the JSONL form to a file.
pub fn write_jsonl(conversations: &[Conversation], path: &Path) -> Result<()> {
    std::fs::write(path, conversations_to_jsonl(conversations))?;
    Ok(())
}
