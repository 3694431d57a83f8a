//! The gradient verification suite behind `gradcheck`: every learned
//! building block plus the full prediction forward pass, each checked
//! against central finite differences on small shapes.

use crate::audio::{mel_spectrogram, prosody_enhance, prosody_features, AudioConfig, Waveform};
use crate::corpus::{render_dialogue, Utterance};
use crate::fusion::{initial_fusion, mfm_forward};
use crate::knowledge::{KnowledgeBase, RelationKind};
use crate::kwrt::{build_importance, scale_text_features, squeeze_importance};
use crate::nn::{
    grad_check, layer_norm, linear, multi_head_attention, transformer_layer, Init, LayerCfg,
    ParamStore, DEFAULT_STEP,
};
use crate::tasks::model::{forward, PreparedInstance};
use crate::tasks::{Modality, Task, TrainConfig};

pub const TOLERANCE: f64 = 1e-3;

/// One named check result.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_error: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= TOLERANCE
    }
}

fn weighting(n: usize, d: usize) -> Vec<f64> {
    (0..n * d).map(|i| ((i % 5) as f64) * 0.3 - 0.6).collect()
}

/// Run every check. Deterministic for a given seed.
pub fn run_suite(seed: u64) -> Vec<CheckResult> {
    let mut results = Vec::new();
    let cfg = LayerCfg::new(4, 2);

    results.push(check(seed, "linear", |store| {
        grad_check(store, DEFAULT_STEP, |ctx| {
            let x = ctx.param("x", &[3, 4], Init::UniformFanIn(4));
            let y = linear(ctx, "lin", &x, 4, 2);
            let w = ctx.constant(&[3, 2], weighting(3, 2));
            y.mul(&w).sum_all()
        })
    }));

    results.push(check(seed, "layer_norm", |store| {
        grad_check(store, DEFAULT_STEP, |ctx| {
            let x = ctx.param("x", &[3, 5], Init::UniformFanIn(5));
            let y = layer_norm(ctx, "ln", &x);
            let w = ctx.constant(&[3, 5], weighting(3, 5));
            y.mul(&w).sum_all()
        })
    }));

    results.push(check(seed, "multi_head_attention", |store| {
        grad_check(store, DEFAULT_STEP, |ctx| {
            let q = ctx.param("q", &[2, 4], Init::UniformFanIn(4));
            let k = ctx.param("k", &[3, 4], Init::UniformFanIn(4));
            let y = multi_head_attention(ctx, "mha", &q, &k, &k, cfg);
            let w = ctx.constant(&[2, 4], weighting(2, 4));
            y.mul(&w).sum_all()
        })
    }));

    results.push(check(seed, "transformer_layer", |store| {
        grad_check(store, DEFAULT_STEP, |ctx| {
            let x = ctx.param("x", &[3, 4], Init::UniformFanIn(4));
            let y = transformer_layer(ctx, "t", &x, cfg);
            let w = ctx.constant(&[3, 4], weighting(3, 4));
            y.mul(&w).sum_all()
        })
    }));

    results.push(check(seed, "importance_scaling", |store| {
        let scores = vec![0.0, 0.4, 1.2, 2.0];
        grad_check(store, DEFAULT_STEP, move |ctx| {
            let h = ctx.param("h", &[4, 3], Init::UniformFanIn(3));
            let w = ctx.param("w", &[1], Init::Ones);
            let b = ctx.param("b", &[1], Init::Ones);
            let y = scale_text_features(&h, &scores, &w, &b);
            let weights = ctx.constant(&[4, 3], weighting(4, 3));
            y.mul(&weights).sum_all()
        })
    }));

    results.push(check(seed, "prosody_enhancement", |store| {
        let prosody = crate::audio::ProsodyFrames {
            f0: vec![0.0, 180.0, 220.0],
            energy: vec![0.05, 0.4, 0.3],
        };
        grad_check(store, DEFAULT_STEP, move |ctx| {
            let h = ctx.param("h", &[3, 4], Init::UniformFanIn(4));
            let y = prosody_enhance(ctx, "pe", &h, &prosody, cfg);
            let w = ctx.constant(&[3, 4], weighting(3, 4));
            y.mul(&w).sum_all()
        })
    }));

    results.push(check(seed, "initial_fusion", |store| {
        grad_check(store, DEFAULT_STEP, |ctx| {
            let f_a = ctx.param("fa", &[3, 4], Init::UniformFanIn(4));
            let f_t = ctx.param("ft", &[2, 4], Init::UniformFanIn(4));
            let y = initial_fusion(ctx, "init", &f_a, &f_t, cfg);
            let w = ctx.constant(&[3, 4], weighting(3, 4));
            y.mul(&w).sum_all()
        })
    }));

    results.push(check(seed, "mfm_stack", |store| {
        grad_check(store, DEFAULT_STEP, |ctx| {
            let f_ta = ctx.param("fta", &[2, 4], Init::UniformFanIn(4));
            let f_m = ctx.param("fm", &[3, 4], Init::UniformFanIn(4));
            let fused = mfm_forward(ctx, "mfm", &f_ta, &f_m, 2, 2, cfg);
            let w = ctx.constant(&[2, 4], weighting(2, 4));
            let a = fused.language_sequence().mul(&w).sum_all();
            a.add(&fused.spectral_sequence().sum_all())
        })
    }));

    results.push(check(seed, "full_epc_forward", |store| {
        let (inst, vocab_size, cfg) = gradcheck_instance();
        grad_check(store, DEFAULT_STEP, move |ctx| {
            let out = forward(ctx, &inst, &cfg, vocab_size, 2);
            out.averaged.cross_entropy(inst.target)
        })
    }));

    results
}

fn check(seed: u64, name: &str, f: impl FnOnce(&mut ParamStore) -> f64) -> CheckResult {
    let mut store = ParamStore::new(seed);
    CheckResult {
        name: name.to_string(),
        max_rel_error: f(&mut store),
    }
}

/// A 2-utterance multi-modal instance built entirely in memory.
fn gradcheck_instance() -> (PreparedInstance, usize, TrainConfig) {
    let cfg = TrainConfig {
        task: Task::Epc,
        modality: Modality::TextSpeech,
        model_dim: 4,
        n_heads: 2,
        text_layers: 1,
        audio_layers: 1,
        mfm_blocks: 2,
        bridge_len: 2,
        ..TrainConfig::default()
    };
    let utterances = vec![
        Utterance {
            speaker_id: 0,
            text: "the kangaroo is asleep".into(),
            emotion: 0,
            audio_path: None,
        },
        Utterance {
            speaker_id: 1,
            text: "storms cause fear tonight".into(),
            emotion: 1,
            audio_path: None,
        },
    ];
    let (mut rendered, mut seen) = render_dialogue(&utterances);
    rendered.push_speaker_token(&mut seen, 0);

    let mut kb = KnowledgeBase::new();
    kb.add_triple("asleep", RelationKind::HasContext, "kangaroo");
    kb.add_triple("storms", RelationKind::Causes, "fear");
    let lexicon = ["the", "is"].iter().map(|s| s.to_string()).collect();
    let mats = build_importance(&rendered, &lexicon, &kb);
    let scores = squeeze_importance(&mats).scores;

    // token ids over a private vocabulary: position order is fine here
    let mut vocab: Vec<String> = Vec::new();
    let mut token_ids = Vec::new();
    let mut importance = Vec::new();
    let mut word_idx = 0;
    for token in &rendered.tokens {
        let id = match vocab.iter().position(|t| t == &token.text) {
            Some(i) => i,
            None => {
                vocab.push(token.text.clone());
                vocab.len() - 1
            }
        };
        token_ids.push(id);
        if token.is_speaker_token {
            importance.push(0.0);
        } else {
            importance.push(scores[word_idx]);
            word_idx += 1;
        }
    }

    // short in-memory chirp with tremolo: frames must differ strongly so no
    // attention gradient degenerates to the finite-difference noise floor.
    // A compact mel geometry keeps the graph small, which keeps the central
    // differences well above rounding noise.
    let audio_cfg = AudioConfig {
        window_secs: 0.012,
        hop_secs: 0.006,
        n_mels: 12,
        fft_size: 256,
        ..AudioConfig::default()
    };
    let n = (0.05 * audio_cfg.sample_rate as f64) as usize;
    let wave = Waveform {
        samples: (0..n)
            .map(|i| {
                let t = i as f64 / audio_cfg.sample_rate as f64;
                let freq = 150.0 + 40_000.0 * t;
                let amp = 0.45 + 0.4 * (2.0 * std::f64::consts::PI * 60.0 * t).sin();
                amp * (2.0 * std::f64::consts::PI * freq * t).sin()
            })
            .collect(),
        sample_rate: audio_cfg.sample_rate,
    };
    let mel = mel_spectrogram(&wave, &audio_cfg).expect("waveform long enough");
    let prosody = prosody_features(&wave, &audio_cfg);

    let inst = PreparedInstance {
        id: "gradcheck#p1".into(),
        token_ids,
        importance,
        mel: Some(mel.normalized(&audio_cfg)),
        mel_frames: mel.n_frames,
        prosody: Some(prosody),
        target: 1,
    };
    (inst, vocab.len(), cfg)
}
