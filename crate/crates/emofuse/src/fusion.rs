//! Two-step multi-modal fusion.
//!
//! Step 1 fuses the text and audio features by cross-attention (audio as
//! query, text as key/value) into `F_ta`. Step 2 runs a stack of bridge
//! fusion blocks between `F_ta` and the mel-spectrogram branch: a short
//! trainable bridge sequence is appended to one branch, passed through that
//! branch's transformer, projected by an MLP into the other branch's space,
//! appended there, and transformed again — in both directions per block.
//! The bridge projections are the only cross-branch path, so zeroing them
//! provably isolates the branches.
//!
//! Classification pools each direction's final sequence (bridge positions
//! excluded) into one of two linear heads and averages the logits.

use crate::nn::{
    layer_norm, linear, multi_head_attention, transformer_layer, Ctx, Init, LayerCfg, Tensor,
};

/// Cross-attention initial fusion with residual + layer norm. The output
/// has the audio branch's sequence length.
pub fn initial_fusion(ctx: &mut Ctx, prefix: &str, f_a: &Tensor, f_t: &Tensor, cfg: LayerCfg) -> Tensor {
    let (k, _) = f_t.dims2();
    assert!(k > 0, "initial fusion requires a non-empty text sequence");
    let attended = multi_head_attention(ctx, &format!("{prefix}.xattn"), f_a, f_t, f_t, cfg);
    let residual = f_a.add(&attended);
    layer_norm(ctx, &format!("{prefix}.ln"), &residual)
}

/// Sequence outputs of the final fusion block, bridge rows still attached,
/// plus the bookkeeping needed to strip them.
pub struct FusedFeatures {
    /// Language-side output (text-audio stream enriched by the mel bridge).
    pub f_m_to_ta: Tensor,
    /// Spectral-side output (mel stream enriched by the text-audio bridge).
    pub f_ta_to_m: Tensor,
    /// Final block intermediates (the bridge-carrying pre-projections).
    pub f_hat_m: Tensor,
    pub f_hat_ta: Tensor,
    /// Non-bridge sequence lengths.
    pub text_audio_len: usize,
    pub mel_len: usize,
    pub bridge_len: usize,
}

impl FusedFeatures {
    /// Language-side output without bridge rows.
    pub fn language_sequence(&self) -> Tensor {
        self.f_m_to_ta.slice_rows(0, self.text_audio_len)
    }

    /// Spectral-side output without bridge rows.
    pub fn spectral_sequence(&self) -> Tensor {
        self.f_ta_to_m.slice_rows(0, self.mel_len)
    }
}

/// Run `n_blocks` fusion blocks. Within each block, for each direction, the
/// concatenated sequence is `input length + bridge_len` long; across
/// blocks, the stripped (non-bridge) outputs chain into the next block's
/// inputs. Each block owns fresh bridge vectors, projections, and
/// transformer layers.
pub fn mfm_forward(
    ctx: &mut Ctx,
    prefix: &str,
    f_ta: &Tensor,
    f_m: &Tensor,
    n_blocks: usize,
    bridge_len: usize,
    cfg: LayerCfg,
) -> FusedFeatures {
    assert!(n_blocks >= 1, "need at least one fusion block");
    assert!(bridge_len >= 1, "bridge length must be >= 1");
    let d = cfg.model_dim;
    let (t_ta, d_ta) = f_ta.dims2();
    let (t_m, d_m) = f_m.dims2();
    assert_eq!(d_ta, d, "text-audio stream width mismatch");
    assert_eq!(d_m, d, "mel stream width mismatch");

    let mut lang = f_ta.clone();
    let mut spec = f_m.clone();
    let mut last = None;
    for block in 0..n_blocks {
        let p = format!("{prefix}.b{block}");
        let bridge_v = ctx.param(&format!("{p}.bridge_v"), &[bridge_len, d], Init::UniformFanIn(d));
        let bridge_l = ctx.param(&format!("{p}.bridge_l"), &[bridge_len, d], Init::UniformFanIn(d));

        // mel -> text-audio direction
        let cat_v = spec.concat_rows(&bridge_v);
        let out_v = transformer_layer(ctx, &format!("{p}.trans_v"), &cat_v, cfg);
        let f_hat_m = out_v.slice_rows(0, t_m);
        let v_hat = out_v.slice_rows(t_m, t_m + bridge_len);
        let carried = linear(ctx, &format!("{p}.mlp_v_to_l"), &v_hat, d, d);
        let f_m_to_ta = transformer_layer(
            ctx,
            &format!("{p}.trans_l"),
            &lang.concat_rows(&carried),
            cfg,
        );

        // text-audio -> mel direction (same per-branch transformers)
        let cat_l = lang.concat_rows(&bridge_l);
        let out_l = transformer_layer(ctx, &format!("{p}.trans_l"), &cat_l, cfg);
        let f_hat_ta = out_l.slice_rows(0, t_ta);
        let v_hat_l = out_l.slice_rows(t_ta, t_ta + bridge_len);
        let carried_l = linear(ctx, &format!("{p}.mlp_l_to_v"), &v_hat_l, d, d);
        let f_ta_to_m = transformer_layer(
            ctx,
            &format!("{p}.trans_v"),
            &spec.concat_rows(&carried_l),
            cfg,
        );

        lang = f_m_to_ta.slice_rows(0, t_ta);
        spec = f_ta_to_m.slice_rows(0, t_m);
        last = Some(FusedFeatures {
            f_m_to_ta,
            f_ta_to_m,
            f_hat_m,
            f_hat_ta,
            text_audio_len: t_ta,
            mel_len: t_m,
            bridge_len,
        });
    }
    last.expect("n_blocks >= 1")
}

/// Averaged dual-head logits.
pub struct Logits {
    pub head_a: Tensor,
    pub head_b: Tensor,
    pub averaged: Tensor,
}

impl Logits {
    pub fn predicted(&self) -> usize {
        argmax(&self.averaged.value())
    }
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Mean-pool each fused stream over its non-bridge positions, apply the two
/// linear classifiers, and average the logits.
pub fn classify(ctx: &mut Ctx, prefix: &str, fused: &FusedFeatures, n_classes: usize) -> Logits {
    let (_, d) = fused.f_m_to_ta.dims2();
    let pooled_a = fused.language_sequence().mean_rows();
    let pooled_b = fused.spectral_sequence().mean_rows();
    let head_a = linear(ctx, &format!("{prefix}.head_a"), &pooled_a, d, n_classes);
    let head_b = linear(ctx, &format!("{prefix}.head_b"), &pooled_b, d, n_classes);
    let averaged = head_a.add(&head_b).scale(0.5);
    Logits {
        head_a,
        head_b,
        averaged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, ParamStore, DEFAULT_STEP};

    fn seq(ctx: &Ctx, rows: usize, cols: usize, salt: u64) -> Tensor {
        let data: Vec<f64> = (0..rows * cols)
            .map(|i| (((i as u64 * 2654435761 + salt) % 97) as f64) / 97.0 - 0.5)
            .collect();
        ctx.constant(&[rows, cols], data)
    }

    fn zero_params(store: &mut ParamStore, keep_bridges: bool) {
        let names: Vec<String> = store.names().map(String::from).collect();
        for name in names {
            if name.ends_with(".g") {
                continue; // layer-norm gains stay 1
            }
            if keep_bridges && name.contains("bridge") {
                continue;
            }
            store.get_mut(&name).unwrap().data.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    #[test]
    fn initial_fusion_output_follows_query_length() {
        let cfg = LayerCfg::new(4, 2);
        for k in [1usize, 3, 7] {
            let mut store = ParamStore::new(2);
            let mut ctx = Ctx::new(&mut store, false);
            let f_a = seq(&ctx, 5, 4, 1);
            let f_t = seq(&ctx, k, 4, 2);
            let out = initial_fusion(&mut ctx, "init", &f_a, &f_t, cfg);
            assert_eq!(out.shape(), vec![5, 4]);
        }
    }

    #[test]
    fn initial_fusion_single_key_matches_direct_attention() {
        // With one text position the softmax is 1 on that key, so the fused
        // output equals LN(f_a + MHA(f_a, that key)).
        let cfg = LayerCfg::new(4, 2);
        let mut store = ParamStore::new(7);
        let mut ctx = Ctx::new(&mut store, false);
        let f_a = seq(&ctx, 3, 4, 5);
        let f_t = seq(&ctx, 1, 4, 9);
        let fused = initial_fusion(&mut ctx, "init", &f_a, &f_t, cfg);
        let attended = multi_head_attention(&mut ctx, "init.xattn", &f_a, &f_t, &f_t, cfg);
        let manual = layer_norm(&mut ctx, "init.ln", &f_a.add(&attended));
        assert_eq!(fused.value(), manual.value());
    }

    #[test]
    #[should_panic(expected = "non-empty text sequence")]
    fn initial_fusion_empty_text_panics() {
        let cfg = LayerCfg::new(4, 2);
        let mut store = ParamStore::new(2);
        let mut ctx = Ctx::new(&mut store, false);
        let f_a = seq(&ctx, 2, 4, 1);
        let f_t = ctx.constant(&[0, 4], vec![]);
        initial_fusion(&mut ctx, "init", &f_a, &f_t, cfg);
    }

    #[test]
    fn concatenated_lengths_are_input_plus_bridge() {
        let cfg = LayerCfg::new(4, 2);
        let mut store = ParamStore::new(4);
        let mut ctx = Ctx::new(&mut store, false);
        let f_ta = seq(&ctx, 6, 4, 1);
        let f_m = seq(&ctx, 9, 4, 2);
        let fused = mfm_forward(&mut ctx, "mfm", &f_ta, &f_m, 2, 4, cfg);
        assert_eq!(fused.f_m_to_ta.shape(), vec![6 + 4, 4]);
        assert_eq!(fused.f_ta_to_m.shape(), vec![9 + 4, 4]);
        assert_eq!(fused.f_hat_m.shape(), vec![9, 4]);
        assert_eq!(fused.f_hat_ta.shape(), vec![6, 4]);
        assert_eq!(fused.language_sequence().shape(), vec![6, 4]);
        assert_eq!(fused.spectral_sequence().shape(), vec![9, 4]);
    }

    #[test]
    fn zeroed_single_block_passes_inputs_through() {
        let cfg = LayerCfg::new(4, 2);
        let mut store = ParamStore::new(4);
        {
            let mut ctx = Ctx::new(&mut store, false);
            let f_ta = seq(&ctx, 3, 4, 1);
            let f_m = seq(&ctx, 5, 4, 2);
            mfm_forward(&mut ctx, "mfm", &f_ta, &f_m, 1, 4, cfg);
        }
        zero_params(&mut store, false);
        let mut ctx = Ctx::new(&mut store, false);
        let f_ta = seq(&ctx, 3, 4, 1);
        let f_m = seq(&ctx, 5, 4, 2);
        let fused = mfm_forward(&mut ctx, "mfm", &f_ta, &f_m, 1, 4, cfg);
        assert_eq!(fused.language_sequence().value(), f_ta.value());
        assert_eq!(fused.spectral_sequence().value(), f_m.value());
        assert_eq!(fused.f_hat_m.value(), f_m.value());
        assert_eq!(fused.f_hat_ta.value(), f_ta.value());
    }

    #[test]
    fn zeroed_bridge_mlps_isolate_language_output_from_mel() {
        let cfg = LayerCfg::new(4, 2);
        let mut store = ParamStore::new(23);
        {
            let mut ctx = Ctx::new(&mut store, false);
            let f_ta = seq(&ctx, 3, 4, 1);
            let f_m = seq(&ctx, 5, 4, 2);
            mfm_forward(&mut ctx, "mfm", &f_ta, &f_m, 2, 4, cfg);
        }
        // zero only the cross-branch projections
        let names: Vec<String> = store.names().map(String::from).collect();
        for name in names {
            if name.contains("mlp_v_to_l") || name.contains("mlp_l_to_v") {
                store.get_mut(&name).unwrap().data.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let run = |store: &mut ParamStore, mel_salt: u64| {
            let mut ctx = Ctx::new(store, false);
            let f_ta = seq(&ctx, 3, 4, 1);
            let f_m = seq(&ctx, 5, 4, mel_salt);
            mfm_forward(&mut ctx, "mfm", &f_ta, &f_m, 2, 4, cfg).language_sequence().value()
        };
        let base = run(&mut store, 2);
        let perturbed = run(&mut store, 77);
        assert_eq!(base, perturbed, "language output must not depend on mel input");
    }

    #[test]
    fn two_block_stack_gradients_verify() {
        let cfg = LayerCfg::new(4, 2);
        let mut store = ParamStore::new(31);
        let err = grad_check(&mut store, DEFAULT_STEP, |ctx| {
            let f_ta = ctx.param("in.ta", &[2, 4], Init::UniformFanIn(4));
            let f_m = ctx.param("in.m", &[3, 4], Init::UniformFanIn(4));
            let fused = mfm_forward(ctx, "mfm", &f_ta, &f_m, 2, 2, cfg);
            let w = ctx.constant(&[2, 4], (0..8).map(|i| ((i % 3) as f64) * 0.4 - 0.3).collect());
            let a = fused.language_sequence().mul(&w).sum_all();
            let b = fused.spectral_sequence().sum_all();
            a.add(&b)
        });
        assert!(err <= 1e-3, "fusion stack grad check failed: {err}");
    }

    #[test]
    fn classify_identical_heads_and_inputs() {
        let cfg = LayerCfg::new(4, 2);
        let mut store = ParamStore::new(6);
        // two identical streams and identical head weights
        store.insert("cls.head_a.w", vec![4, 3], (0..12).map(|i| i as f64 * 0.1).collect());
        store.insert("cls.head_a.b", vec![3], vec![0.5, -0.5, 0.0]);
        store.insert("cls.head_b.w", vec![4, 3], (0..12).map(|i| i as f64 * 0.1).collect());
        store.insert("cls.head_b.b", vec![3], vec![0.5, -0.5, 0.0]);
        let mut ctx = Ctx::new(&mut store, false);
        let stream = seq(&ctx, 4, 4, 3);
        let fused = FusedFeatures {
            f_m_to_ta: stream.clone(),
            f_ta_to_m: stream.clone(),
            f_hat_m: stream.clone(),
            f_hat_ta: stream.clone(),
            text_audio_len: 4,
            mel_len: 4,
            bridge_len: 0,
        };
        let _ = cfg;
        let logits = classify(&mut ctx, "cls", &fused, 3);
        assert_eq!(logits.averaged.value(), logits.head_a.value());
        assert_eq!(logits.averaged.value(), logits.head_b.value());
    }

    #[test]
    fn classify_zero_head_b_halves_logits_keeps_argmax() {
        let mut store = ParamStore::new(6);
        store.insert("cls.head_b.w", vec![4, 3], vec![0.0; 12]);
        store.insert("cls.head_b.b", vec![3], vec![0.0; 3]);
        let mut ctx = Ctx::new(&mut store, false);
        let sa = seq(&ctx, 2, 4, 3);
        let sb = seq(&ctx, 2, 4, 11);
        let fused = FusedFeatures {
            f_m_to_ta: sa.clone(),
            f_ta_to_m: sb,
            f_hat_m: sa.clone(),
            f_hat_ta: sa,
            text_audio_len: 2,
            mel_len: 2,
            bridge_len: 0,
        };
        let logits = classify(&mut ctx, "cls", &fused, 3);
        let a = logits.head_a.value();
        let avg = logits.averaged.value();
        for (x, y) in avg.iter().zip(&a) {
            assert!((x - y / 2.0).abs() < 1e-12);
        }
        assert_eq!(logits.predicted(), argmax(&a));
    }

    #[test]
    fn classify_average_matches_elementwise_oracle() {
        let mut store = ParamStore::new(41);
        let mut ctx = Ctx::new(&mut store, false);
        let sa = seq(&ctx, 3, 4, 19);
        let sb = seq(&ctx, 5, 4, 23);
        let fused = FusedFeatures {
            f_m_to_ta: sa.clone(),
            f_ta_to_m: sb,
            f_hat_m: sa.clone(),
            f_hat_ta: sa,
            text_audio_len: 3,
            mel_len: 5,
            bridge_len: 0,
        };
        let logits = classify(&mut ctx, "cls", &fused, 4);
        let (a, b, avg) = (logits.head_a.value(), logits.head_b.value(), logits.averaged.value());
        for i in 0..4 {
            assert!((avg[i] - (a[i] + b[i]) / 2.0).abs() < 1e-12);
        }
    }
}
