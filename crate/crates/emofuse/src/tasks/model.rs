//! Vocabulary, instance preparation, and the end-to-end forward pass.
//!
//! Text branch: token embeddings + sinusoidal positions -> transformer
//! stack -> word-importance scaling. Audio branch: mel frames -> linear
//! projection + positions -> transformer stack -> prosody enhancement.
//! Multi-modal runs fuse the two by cross-attention and the bridge fusion
//! stack; single-modality runs classify their branch's pooled features
//! through one linear head.

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{Modality, Task, TrainConfig};
use crate::audio::{
    mel_spectrogram, prosody_enhance, prosody_features, read_wav, AudioConfig, ProsodyFrames,
};
use crate::corpus::{render_dialogue, Conversation, Utterance};
use crate::error::{Error, Result};
use crate::fusion::{classify, initial_fusion, mfm_forward, FusedFeatures};
use crate::knowledge::KnowledgeBase;
use crate::kwrt::{build_importance, squeeze_importance};
use crate::nn::{linear, transformer_stack, with_positions, Ctx, Init, Tensor};

/// Highest speaker ordinal with a dedicated special token; later speakers
/// fall back to the unknown token.
pub const MAX_SPEAKER_TOKENS: usize = 16;
pub const UNK_TOKEN: &str = "[unk]";

/// Token-to-id mapping: `[unk]`, the speaker specials, then the sorted
/// corpus words.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn build(conversations: &[Conversation]) -> Self {
        let mut words = std::collections::BTreeSet::new();
        for conv in conversations {
            for utt in &conv.utterances {
                for token in crate::corpus::tokenize(&utt.text) {
                    words.insert(token);
                }
            }
        }
        let mut tokens = vec![UNK_TOKEN.to_string()];
        for k in 1..=MAX_SPEAKER_TOKENS {
            tokens.push(format!("[s{k}]"));
        }
        tokens.extend(words);
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Everything a model run needs besides the conversations themselves.
pub struct Resources {
    pub lexicon: std::collections::BTreeSet<String>,
    pub kb: KnowledgeBase,
    pub audio: AudioConfig,
    /// Base directory for relative audio paths.
    pub audio_base: Option<PathBuf>,
}

impl Resources {
    pub fn text_only(lexicon: std::collections::BTreeSet<String>, kb: KnowledgeBase) -> Self {
        Resources {
            lexicon,
            kb,
            audio: AudioConfig::default(),
            audio_base: None,
        }
    }
}

/// Checkpoint metadata: enough to rebuild the exact evaluation graph.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelMeta {
    pub config: TrainConfig,
    pub label_set: Vec<String>,
    pub vocab: Vec<String>,
    pub audio: AudioConfig,
}

/// One model-ready instance: token ids, per-position importance scores,
/// optional concatenated audio features, and the target label.
#[derive(Clone, Debug)]
pub struct PreparedInstance {
    pub id: String,
    pub token_ids: Vec<usize>,
    /// One entry per rendered position; speaker tokens carry 0.
    pub importance: Vec<f64>,
    /// Row-major `mel_frames x n_mels` log-mel features.
    pub mel: Option<Vec<f64>>,
    pub mel_frames: usize,
    pub prosody: Option<ProsodyFrames>,
    pub target: usize,
}

struct AudioFeatures {
    mel: Vec<f64>,
    frames: usize,
    prosody: ProsodyFrames,
}

/// Turns conversations into [`PreparedInstance`]s, caching per-file audio
/// features.
pub struct InstanceBuilder<'a> {
    vocab: &'a Vocabulary,
    res: &'a Resources,
    modality: Modality,
    cache: HashMap<String, AudioFeatures>,
}

impl<'a> InstanceBuilder<'a> {
    pub fn new(vocab: &'a Vocabulary, res: &'a Resources, modality: Modality) -> Self {
        InstanceBuilder {
            vocab,
            res,
            modality,
            cache: HashMap::new(),
        }
    }

    pub fn prepare_conversation(
        &mut self,
        conv: &Conversation,
        task: Task,
        window: usize,
    ) -> Result<Vec<PreparedInstance>> {
        match task {
            Task::Epc => {
                let mut out = Vec::new();
                for (k, inst) in crate::corpus::build_epc_instances(conv, window)
                    .into_iter()
                    .enumerate()
                {
                    out.push(self.prepare(
                        format!("{}#p{}", conv.id, k + 1),
                        conv,
                        &inst.history,
                        Some(inst.target_speaker),
                        inst.target_label,
                    )?);
                }
                Ok(out)
            }
            Task::Erc => {
                let mut out = Vec::new();
                for (i, inst) in crate::corpus::build_erc_instances(conv, window)
                    .into_iter()
                    .enumerate()
                {
                    out.push(self.prepare(
                        format!("{}#r{}", conv.id, i),
                        conv,
                        &inst.context,
                        None,
                        inst.target_label,
                    )?);
                }
                Ok(out)
            }
        }
    }

    fn prepare(
        &mut self,
        id: String,
        conv: &Conversation,
        utterances: &[Utterance],
        epc_target_speaker: Option<usize>,
        target: usize,
    ) -> Result<PreparedInstance> {
        let (mut rendered, mut seen) = render_dialogue(utterances);
        if let Some(speaker) = epc_target_speaker {
            // tell the model whose emotion to predict
            rendered.push_speaker_token(&mut seen, speaker);
        }
        let mats = build_importance(&rendered, &self.res.lexicon, &self.res.kb);
        let scores = squeeze_importance(&mats).scores;

        let mut token_ids = Vec::with_capacity(rendered.tokens.len());
        let mut importance = Vec::with_capacity(rendered.tokens.len());
        let mut word_idx = 0usize;
        for token in &rendered.tokens {
            token_ids.push(self.vocab.id(&token.text));
            if token.is_speaker_token {
                importance.push(0.0);
            } else {
                importance.push(scores[word_idx]);
                word_idx += 1;
            }
        }

        let (mel, mel_frames, prosody) = if self.modality.uses_audio() {
            let (mel, frames, prosody) = self.concat_audio(conv, utterances)?;
            (Some(mel), frames, Some(prosody))
        } else {
            (None, 0, None)
        };

        Ok(PreparedInstance {
            id,
            token_ids,
            importance,
            mel,
            mel_frames,
            prosody,
            target,
        })
    }

    fn concat_audio(
        &mut self,
        conv: &Conversation,
        utterances: &[Utterance],
    ) -> Result<(Vec<f64>, usize, ProsodyFrames)> {
        let mut mel = Vec::new();
        let mut frames = 0usize;
        let mut prosody = ProsodyFrames::default();
        for (i, utt) in utterances.iter().enumerate() {
            let path = utt.audio_path.as_ref().ok_or_else(|| {
                Error::validation(format!(
                    "conversation {:?} utterance {} has no audio but the modality needs it",
                    conv.id, i
                ))
            })?;
            let feats = self.load_audio(path)?;
            mel.extend_from_slice(&feats.mel);
            frames += feats.frames;
            prosody.f0.extend_from_slice(&feats.prosody.f0);
            prosody.energy.extend_from_slice(&feats.prosody.energy);
        }
        Ok((mel, frames, prosody))
    }

    fn load_audio(&mut self, path: &str) -> Result<&AudioFeatures> {
        if !self.cache.contains_key(path) {
            let resolved = match &self.res.audio_base {
                Some(base) if !std::path::Path::new(path).is_absolute() => base.join(path),
                _ => PathBuf::from(path),
            };
            let wave = read_wav(&resolved, self.res.audio.sample_rate)?;
            let mel = mel_spectrogram(&wave, &self.res.audio)?;
            let prosody = prosody_features(&wave, &self.res.audio);
            self.cache.insert(
                path.to_string(),
                AudioFeatures {
                    mel: mel.normalized(&self.res.audio),
                    frames: mel.n_frames,
                    prosody,
                },
            );
        }
        Ok(&self.cache[path])
    }
}

/// Tensors produced by one instance forward pass. `averaged` drives both
/// prediction (argmax) and the cross-entropy loss; the rest are exposed for
/// inspection and tests.
pub struct ForwardOutput {
    pub averaged: Tensor,
    pub head_a: Option<Tensor>,
    pub head_b: Option<Tensor>,
    pub f_t: Option<Tensor>,
    pub h_a: Option<Tensor>,
    pub f_a: Option<Tensor>,
    pub f_ta: Option<Tensor>,
    pub fused: Option<FusedFeatures>,
}

pub fn forward(
    ctx: &mut Ctx,
    inst: &PreparedInstance,
    cfg: &TrainConfig,
    vocab_size: usize,
    n_classes: usize,
) -> ForwardOutput {
    let lc = cfg.layer_cfg();
    let d = cfg.model_dim;

    let f_t = if cfg.modality.uses_text() {
        assert!(!inst.token_ids.is_empty(), "instance has no text tokens");
        let embed = ctx.param("text.embed", &[vocab_size, d], Init::UniformFanIn(d));
        let e = with_positions(ctx, &embed.gather_rows(&inst.token_ids));
        let h_t = transformer_stack(ctx, "text.enc", &e, cfg.text_layers, lc);
        if cfg.no_kwrt {
            Some(h_t)
        } else {
            let w = ctx.param("kwrt.scale.w", &[1], Init::Ones);
            let b = ctx.param("kwrt.scale.b", &[1], Init::Ones);
            Some(crate::kwrt::scale_text_features(&h_t, &inst.importance, &w, &b))
        }
    } else {
        None
    };

    let (h_a, f_a, mel_const) = if cfg.modality.uses_audio() {
        let mel = inst.mel.as_ref().expect("audio modality needs mel features");
        let n_mels = mel.len() / inst.mel_frames.max(1);
        let mel_const = ctx.constant(&[inst.mel_frames, n_mels], mel.clone());
        let projected = linear(ctx, "audio.in", &mel_const, n_mels, d);
        let x = with_positions(ctx, &projected);
        let h_a = transformer_stack(ctx, "audio.enc", &x, cfg.audio_layers, lc);
        let f_a = if cfg.no_pe {
            h_a.clone()
        } else {
            let prosody = inst.prosody.as_ref().expect("audio modality needs prosody");
            prosody_enhance(ctx, "pe", &h_a, prosody, lc)
        };
        (Some(h_a), Some(f_a), Some(mel_const))
    } else {
        (None, None, None)
    };

    match cfg.modality {
        Modality::Text => {
            let pooled = f_t.as_ref().unwrap().mean_rows();
            let averaged = linear(ctx, "head.single", &pooled, d, n_classes);
            ForwardOutput {
                averaged,
                head_a: None,
                head_b: None,
                f_t,
                h_a: None,
                f_a: None,
                f_ta: None,
                fused: None,
            }
        }
        Modality::Speech => {
            let pooled = f_a.as_ref().unwrap().mean_rows();
            let averaged = linear(ctx, "head.single", &pooled, d, n_classes);
            ForwardOutput {
                averaged,
                head_a: None,
                head_b: None,
                f_t: None,
                h_a,
                f_a,
                f_ta: None,
                fused: None,
            }
        }
        Modality::TextSpeech => {
            let ft_proj = linear(ctx, "fuse.text_proj", f_t.as_ref().unwrap(), d, d);
            let fa_proj = linear(ctx, "fuse.audio_proj", f_a.as_ref().unwrap(), d, d);
            let f_ta = initial_fusion(ctx, "fuse.init", &fa_proj, &ft_proj, lc);
            if cfg.no_tmf {
                let pooled = f_ta.mean_rows();
                let averaged = linear(ctx, "head.single", &pooled, d, n_classes);
                ForwardOutput {
                    averaged,
                    head_a: None,
                    head_b: None,
                    f_t,
                    h_a,
                    f_a,
                    f_ta: Some(f_ta),
                    fused: None,
                }
            } else {
                let mel = mel_const.expect("mel features present in multi-modal run");
                let (_, n_mels) = mel.dims2();
                let mel_projected = linear(ctx, "mel.proj", &mel, n_mels, d);
                let f_m = with_positions(ctx, &mel_projected);
                let fused = mfm_forward(ctx, "mfm", &f_ta, &f_m, cfg.mfm_blocks, cfg.bridge_len, lc);
                let logits = classify(ctx, "cls", &fused, n_classes);
                ForwardOutput {
                    averaged: logits.averaged,
                    head_a: Some(logits.head_a),
                    head_b: Some(logits.head_b),
                    f_t,
                    h_a,
                    f_a,
                    f_ta: Some(f_ta),
                    fused: Some(fused),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::write_wav_16bit;
    use crate::nn::ParamStore;
    use std::collections::BTreeSet;

    fn conv_with_audio(dir: &std::path::Path) -> Conversation {
        let mut utts = Vec::new();
        for i in 0..4 {
            let path = dir.join(format!("u{i}.wav"));
            let samples: Vec<f64> = (0..3200)
                .map(|n| (2.0 * std::f64::consts::PI * (150.0 + 40.0 * i as f64) * n as f64 / 16000.0).sin() * 0.6)
                .collect();
            write_wav_16bit(&path, &samples, 16000).unwrap();
            utts.push(Utterance {
                speaker_id: i % 2,
                text: format!("utterance number{} marker{}", i, i),
                emotion: i % 2,
                audio_path: Some(path.display().to_string()),
            });
        }
        Conversation {
            id: "test".into(),
            label_set: vec!["neg".into(), "pos".into()],
            utterances: utts,
        }
    }

    fn resources() -> Resources {
        Resources {
            lexicon: BTreeSet::new(),
            kb: KnowledgeBase::new(),
            audio: AudioConfig::default(),
            audio_base: None,
        }
    }

    fn tiny_cfg(modality: Modality) -> TrainConfig {
        TrainConfig {
            modality,
            model_dim: 8,
            n_heads: 2,
            text_layers: 1,
            audio_layers: 1,
            mfm_blocks: 1,
            bridge_len: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn vocabulary_is_sorted_and_stable() {
        let conv = Conversation {
            id: "v".into(),
            label_set: vec!["a".into()],
            utterances: vec![
                Utterance {
                    speaker_id: 0,
                    text: "zebra apple".into(),
                    emotion: 0,
                    audio_path: None,
                },
            ],
        };
        let vocab = Vocabulary::build(&[conv]);
        assert_eq!(vocab.id(UNK_TOKEN), 0);
        assert_eq!(vocab.id("[s1]"), 1);
        assert!(vocab.id("apple") < vocab.id("zebra"));
        assert_eq!(vocab.id("missing-word"), 0);
        let rebuilt = Vocabulary::from_tokens(vocab.tokens().to_vec());
        assert_eq!(rebuilt.id("zebra"), vocab.id("zebra"));
    }

    #[test]
    fn epc_preparation_never_sees_target_text() {
        let dir = tempfile::tempdir().unwrap();
        let conv = conv_with_audio(dir.path());
        let vocab = Vocabulary::build(std::slice::from_ref(&conv));
        let res = resources();
        let mut builder = InstanceBuilder::new(&vocab, &res, Modality::Text);
        let instances = builder.prepare_conversation(&conv, Task::Epc, 3).unwrap();
        assert_eq!(instances.len(), 3);
        // instance k targets utterance k+1, whose unique marker must be absent
        for (k, inst) in instances.iter().enumerate() {
            let target_marker = vocab.id(&format!("marker{}", k + 1));
            assert!(
                !inst.token_ids.contains(&target_marker),
                "instance {k} leaks its target utterance"
            );
        }
    }

    #[test]
    fn importance_is_zero_exactly_at_speaker_tokens() {
        let dir = tempfile::tempdir().unwrap();
        let conv = conv_with_audio(dir.path());
        let vocab = Vocabulary::build(std::slice::from_ref(&conv));
        let res = resources();
        let mut builder = InstanceBuilder::new(&vocab, &res, Modality::Text);
        let instances = builder.prepare_conversation(&conv, Task::Erc, 3).unwrap();
        for inst in &instances {
            assert_eq!(inst.token_ids.len(), inst.importance.len());
        }
        // first position is always a speaker token
        assert_eq!(instances[0].importance[0], 0.0);
    }

    #[test]
    fn missing_audio_is_a_validation_error() {
        let conv = Conversation {
            id: "na".into(),
            label_set: vec!["x".into()],
            utterances: vec![Utterance {
                speaker_id: 0,
                text: "hello".into(),
                emotion: 0,
                audio_path: None,
            }],
        };
        let vocab = Vocabulary::build(std::slice::from_ref(&conv));
        let res = resources();
        let mut builder = InstanceBuilder::new(&vocab, &res, Modality::TextSpeech);
        let err = builder.prepare_conversation(&conv, Task::Erc, 3).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn forward_shapes_and_ablation_param_counts() {
        let dir = tempfile::tempdir().unwrap();
        let conv = conv_with_audio(dir.path());
        let vocab = Vocabulary::build(std::slice::from_ref(&conv));
        let res = resources();
        let mut builder = InstanceBuilder::new(&vocab, &res, Modality::TextSpeech);
        let inst = builder
            .prepare_conversation(&conv, Task::Epc, 3)
            .unwrap()
            .remove(0);

        let mut counts = Vec::new();
        for (no_kwrt, no_pe, no_tmf) in
            [(false, false, false), (true, false, false), (false, true, false), (false, false, true)]
        {
            let mut cfg = tiny_cfg(Modality::TextSpeech);
            cfg.no_kwrt = no_kwrt;
            cfg.no_pe = no_pe;
            cfg.no_tmf = no_tmf;
            let mut store = ParamStore::new(5);
            let mut ctx = Ctx::new(&mut store, false);
            let out = forward(&mut ctx, &inst, &cfg, vocab.len(), 2);
            assert_eq!(out.averaged.numel(), 2);
            counts.push(store.total_params());
        }
        let full = counts[0];
        assert_eq!(counts[1], full - 2, "removing the importance affine drops 2 params");
        assert!(counts[2] < full, "removing prosody enhancement drops params");
        assert_ne!(counts[3], full, "removing the fusion stack changes params");
    }

    #[test]
    fn single_modality_forwards_run() {
        let dir = tempfile::tempdir().unwrap();
        let conv = conv_with_audio(dir.path());
        let vocab = Vocabulary::build(std::slice::from_ref(&conv));
        let res = resources();
        for modality in [Modality::Text, Modality::Speech] {
            let mut builder = InstanceBuilder::new(&vocab, &res, modality);
            let inst = builder
                .prepare_conversation(&conv, Task::Erc, 2)
                .unwrap()
                .remove(0);
            let cfg = tiny_cfg(modality);
            let mut store = ParamStore::new(1);
            let mut ctx = Ctx::new(&mut store, false);
            let out = forward(&mut ctx, &inst, &cfg, vocab.len(), 2);
            assert_eq!(out.averaged.numel(), 2);
            assert!(out.head_a.is_none());
        }
    }
}
