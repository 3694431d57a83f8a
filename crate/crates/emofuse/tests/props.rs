//! Property tests for the corpus, knowledge, and tagging invariants.

use std::collections::BTreeSet;

use proptest::prelude::*;

use emofuse::corpus::{
    build_epc_instances, build_erc_instances, render_dialogue, render_speaker_sequence, tokenize,
    Conversation, Utterance,
};
use emofuse::knowledge::{KnowledgeBase, RelationKind};
use emofuse::kwrt::{
    build_importance, build_recurrence_matrix, build_relation_matrix, classify_words,
    squeeze_importance, validate_invariants, RELATION_CAP,
};

const WORD_POOL: [&str; 14] = [
    "storm", "rain", "kangaroo", "asleep", "movie", "great", "the", "a", "is", "watch", "night",
    "calm", "fear", "joy",
];

fn utterance_strategy() -> impl Strategy<Value = Utterance> {
    (
        0..4usize,
        prop::collection::vec(prop::sample::select(WORD_POOL.to_vec()), 1..8),
    )
        .prop_map(|(speaker, words)| Utterance {
            speaker_id: speaker,
            text: words.join(" "),
            emotion: 0,
            audio_path: None,
        })
}

fn conversation_strategy(max_utts: usize) -> impl Strategy<Value = Conversation> {
    prop::collection::vec(utterance_strategy(), 1..max_utts).prop_map(|utterances| Conversation {
        id: "prop".into(),
        label_set: vec!["x".into()],
        utterances,
    })
}

fn kb_strategy() -> impl Strategy<Value = KnowledgeBase> {
    prop::collection::vec(
        (
            prop::sample::select(WORD_POOL.to_vec()),
            0..3usize,
            prop::sample::select(WORD_POOL.to_vec()),
        ),
        0..60,
    )
    .prop_map(|triples| {
        let mut kb = KnowledgeBase::new();
        for (h, r, t) in triples {
            kb.add_triple(h, RelationKind::ALL[r], t);
        }
        kb
    })
}

fn lexicon() -> BTreeSet<String> {
    ["the", "a", "is"].iter().map(|s| s.to_string()).collect()
}

proptest! {
    #[test]
    fn instance_counts_follow_utterance_count(conv in conversation_strategy(12), window in 1usize..6) {
        let n = conv.utterances.len();
        prop_assert_eq!(build_epc_instances(&conv, window).len(), n - 1);
        prop_assert_eq!(build_erc_instances(&conv, window).len(), n);
        for inst in build_epc_instances(&conv, window) {
            prop_assert!(inst.history.len() <= window);
            prop_assert!(!inst.history.is_empty());
        }
        for inst in build_erc_instances(&conv, window) {
            prop_assert!(inst.context.len() <= window);
            prop_assert_eq!(inst.target_index, inst.context.len() - 1);
        }
    }

    #[test]
    fn rendering_is_deterministic(conv in conversation_strategy(8)) {
        let a = render_speaker_sequence(&conv.utterances);
        let b = render_speaker_sequence(&conv.utterances);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rendered_words_match_tokenized_multiset(utts in prop::collection::vec(
        (0..3usize, "[ -~]{1,30}a"), 1..6)
    ) {
        // arbitrary printable text with at least one word character
        let utterances: Vec<Utterance> = utts
            .into_iter()
            .map(|(s, text)| Utterance { speaker_id: s, text, emotion: 0, audio_path: None })
            .collect();
        let rendered = render_speaker_sequence(&utterances);
        let mut from_render: Vec<String> = rendered
            .into_iter()
            .filter(|t| !(t.starts_with("[s") && t.ends_with(']')))
            .collect();
        let mut from_tokenizer: Vec<String> = utterances
            .iter()
            .flat_map(|u| tokenize(&u.text))
            .collect();
        from_render.sort();
        from_tokenizer.sort();
        prop_assert_eq!(from_render, from_tokenizer);
    }

    #[test]
    fn kb_queries_are_symmetric_and_bounded(kb in kb_strategy(), a in prop::sample::select(WORD_POOL.to_vec()), b in prop::sample::select(WORD_POOL.to_vec())) {
        let fwd = kb.query_relations(a, b);
        let bwd = kb.query_relations(b, a);
        prop_assert_eq!(&fwd, &bwd);
        prop_assert!(fwd.len() <= 3);
    }

    #[test]
    fn kb_growth_is_monotone(kb in kb_strategy(), h in prop::sample::select(WORD_POOL.to_vec()), t in prop::sample::select(WORD_POOL.to_vec()), r in 0..3usize) {
        let before: Vec<(String, String, usize)> = WORD_POOL
            .iter()
            .flat_map(|a| WORD_POOL.iter().map(move |b| (a.to_string(), b.to_string(), 0usize)))
            .map(|(a, b, _)| {
                let n = kb.query_relations(&a, &b).len();
                (a, b, n)
            })
            .collect();
        let mut grown = kb.clone();
        grown.add_triple(h, RelationKind::ALL[r], t);
        for (a, b, n) in before {
            prop_assert!(grown.query_relations(&a, &b).len() >= n);
        }
    }

    #[test]
    fn importance_matrices_match_brute_force(conv in conversation_strategy(8), kb in kb_strategy()) {
        let lex = lexicon();
        let (rendered, _) = render_dialogue(&conv.utterances);
        let mats = build_importance(&rendered, &lex, &kb);
        prop_assert!(validate_invariants(&mats).is_ok());

        // independent pairwise re-derivation
        let words = classify_words(&rendered, &lex);
        let k = words.len();
        for i in 0..k {
            for j in 0..k {
                let both_content = words[i].is_content && words[j].is_content;
                let expect_rec = u8::from(i != j && both_content && words[i].surface == words[j].surface);
                let expect_rel = if i != j && both_content {
                    (kb.query_relations(&words[i].surface, &words[j].surface).len() as u8)
                        .min(RELATION_CAP)
                } else {
                    0
                };
                prop_assert_eq!(mats.m_rec.get(i, j), expect_rec, "rec ({}, {})", i, j);
                prop_assert_eq!(mats.m_rel.get(i, j), expect_rel, "rel ({}, {})", i, j);
                prop_assert_eq!(mats.m.get(i, j), expect_rec + expect_rel, "m ({}, {})", i, j);
            }
        }
    }

    #[test]
    fn permuting_words_permutes_matrices(conv in conversation_strategy(6), kb in kb_strategy(), seed in 0u64..1000) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let lex = lexicon();
        let (rendered, _) = render_dialogue(&conv.utterances);
        let words = classify_words(&rendered, &lex);
        let k = words.len();
        prop_assume!(k >= 2);

        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let permuted: Vec<_> = perm.iter().map(|&i| words[i].clone()).collect();

        let base_rec = build_recurrence_matrix(&words);
        let base_rel = build_relation_matrix(&words, &kb);
        let perm_rec = build_recurrence_matrix(&permuted);
        let perm_rel = build_relation_matrix(&permuted, &kb);
        for a in 0..k {
            for b in 0..k {
                prop_assert_eq!(perm_rec.get(a, b), base_rec.get(perm[a], perm[b]));
                prop_assert_eq!(perm_rel.get(a, b), base_rel.get(perm[a], perm[b]));
            }
        }
    }

    #[test]
    fn squeeze_scores_are_nonnegative_and_sized(conv in conversation_strategy(8), kb in kb_strategy()) {
        let (rendered, _) = render_dialogue(&conv.utterances);
        let mats = build_importance(&rendered, &lexicon(), &kb);
        let vec = squeeze_importance(&mats);
        prop_assert_eq!(vec.scores.len(), mats.words.len());
        prop_assert!(vec.scores.iter().all(|&s| s >= 0.0));
    }
}

#[test]
fn scaling_is_linear_in_features() {
    // scaling the feature matrix by alpha scales the output by alpha
    use emofuse::nn::{Ctx, ParamStore};
    let mut store = ParamStore::new(3);
    store.insert("w", vec![1], vec![0.7]);
    store.insert("b", vec![1], vec![0.2]);
    let scores = [0.0, 1.5, 3.0];
    let data: Vec<f64> = (0..12).map(|i| (i as f64) * 0.31 - 1.7).collect();
    let alpha = 2.5;

    let run = |store: &mut ParamStore, xs: Vec<f64>| {
        let mut ctx = Ctx::new(store, false);
        let x = ctx.constant(&[3, 4], xs);
        let w = ctx.param("w", &[1], emofuse::nn::Init::Zeros);
        let b = ctx.param("b", &[1], emofuse::nn::Init::Zeros);
        emofuse::kwrt::scale_text_features(&x, &scores, &w, &b).value()
    };
    let base = run(&mut store, data.clone());
    let scaled = run(&mut store, data.iter().map(|v| v * alpha).collect());
    for (s, b) in scaled.iter().zip(&base) {
        assert!((s - alpha * b).abs() < 1e-12);
    }
}
