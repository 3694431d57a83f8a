//! Learned building blocks: linear maps, layer norm, multi-head attention,
//! pre-norm transformer layers, and sinusoidal positions.
//!
//! Every function takes a [`Ctx`] plus a dotted name prefix; parameters are
//! created on first use and shared on later passes.

use super::graph::Tensor;
use super::params::{Ctx, Init};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Attention/transformer geometry. `model_dim` must be divisible by
/// `n_heads`.
#[derive(Clone, Copy, Debug)]
pub struct LayerCfg {
    pub model_dim: usize,
    pub n_heads: usize,
}

impl LayerCfg {
    pub fn new(model_dim: usize, n_heads: usize) -> Self {
        assert!(n_heads > 0, "n_heads must be positive");
        assert_eq!(
            model_dim % n_heads,
            0,
            "model_dim {} not divisible by n_heads {}",
            model_dim,
            n_heads
        );
        LayerCfg { model_dim, n_heads }
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.n_heads
    }
}

/// `x @ W + b` with `W: [d_in, d_out]`, `b: [d_out]`.
pub fn linear(ctx: &mut Ctx, prefix: &str, x: &Tensor, d_in: usize, d_out: usize) -> Tensor {
    let (_, cols) = x.dims2();
    assert_eq!(cols, d_in, "linear {}: input has {} cols, expected {}", prefix, cols, d_in);
    let w = ctx.param(&format!("{prefix}.w"), &[d_in, d_out], Init::UniformFanIn(d_in));
    let b = ctx.param(&format!("{prefix}.b"), &[d_out], Init::Zeros);
    x.matmul(&w).add_row_bias(&b)
}

/// Layer norm with learned gain/bias parameters under `prefix`.
pub fn layer_norm(ctx: &mut Ctx, prefix: &str, x: &Tensor) -> Tensor {
    let (_, d) = x.dims2();
    let gamma = ctx.param(&format!("{prefix}.g"), &[d], Init::Ones);
    let beta = ctx.param(&format!("{prefix}.b"), &[d], Init::Zeros);
    x.layer_norm(&gamma, &beta, LAYER_NORM_EPS)
}

/// Scaled dot-product attention with per-head projections, heads
/// concatenated and output-projected. Query and key/value sequences may have
/// different lengths; output length follows the query.
pub fn multi_head_attention(
    ctx: &mut Ctx,
    prefix: &str,
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    cfg: LayerCfg,
) -> Tensor {
    let d = cfg.model_dim;
    let dh = cfg.head_dim();
    let (_, qd) = q.dims2();
    let (kn, kd) = k.dims2();
    let (vn, vd) = v.dims2();
    assert_eq!(qd, d, "attention {}: query dim {} != model_dim {}", prefix, qd, d);
    assert_eq!(kd, d, "attention {}: key dim mismatch", prefix);
    assert_eq!(vd, d, "attention {}: value dim mismatch", prefix);
    assert_eq!(kn, vn, "attention {}: key/value length mismatch", prefix);

    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads: Option<Tensor> = None;
    for h in 0..cfg.n_heads {
        let wq = ctx.param(&format!("{prefix}.h{h}.wq"), &[d, dh], Init::UniformFanIn(d));
        let wk = ctx.param(&format!("{prefix}.h{h}.wk"), &[d, dh], Init::UniformFanIn(d));
        let wv = ctx.param(&format!("{prefix}.h{h}.wv"), &[d, dh], Init::UniformFanIn(d));
        let qh = q.matmul(&wq);
        let kh = k.matmul(&wk);
        let vh = v.matmul(&wv);
        let scores = qh.matmul(&kh.transpose()).scale(scale);
        let attn = scores.softmax_rows();
        let out = attn.matmul(&vh);
        heads = Some(match heads {
            None => out,
            Some(acc) => acc.concat_cols(&out),
        });
    }
    let concat = heads.expect("at least one head");
    let wo = ctx.param(&format!("{prefix}.wo"), &[d, d], Init::UniformFanIn(d));
    let bo = ctx.param(&format!("{prefix}.bo"), &[d], Init::Zeros);
    concat.matmul(&wo).add_row_bias(&bo)
}

/// Pre-norm transformer layer:
/// `x + Attn(LN(x))`, then `+ FFN(LN(.))` with a GELU feed-forward whose
/// hidden width is 4x the model dim. With all projections zeroed this is the
/// identity.
pub fn transformer_layer(ctx: &mut Ctx, prefix: &str, x: &Tensor, cfg: LayerCfg) -> Tensor {
    let d = cfg.model_dim;
    let normed = layer_norm(ctx, &format!("{prefix}.ln1"), x);
    let attended = multi_head_attention(ctx, &format!("{prefix}.attn"), &normed, &normed, &normed, cfg);
    let x = x.add(&attended);

    let normed = layer_norm(ctx, &format!("{prefix}.ln2"), &x);
    let hidden = linear(ctx, &format!("{prefix}.ff1"), &normed, d, 4 * d).gelu();
    let out = linear(ctx, &format!("{prefix}.ff2"), &hidden, 4 * d, d);
    x.add(&out)
}

/// Stack of `n_layers` transformer layers under `prefix.l{i}`.
pub fn transformer_stack(
    ctx: &mut Ctx,
    prefix: &str,
    x: &Tensor,
    n_layers: usize,
    cfg: LayerCfg,
) -> Tensor {
    let mut x = x.clone();
    for i in 0..n_layers {
        x = transformer_layer(ctx, &format!("{prefix}.l{i}"), &x, cfg);
    }
    x
}

/// Fixed sinusoidal position table for `n` positions of width `d`.
pub fn sinusoidal_positions(n: usize, d: usize) -> Vec<f64> {
    let mut pe = vec![0.0; n * d];
    for pos in 0..n {
        for i in 0..d {
            let exponent = (2 * (i / 2)) as f64 / d as f64;
            let angle = pos as f64 / 10000f64.powf(exponent);
            pe[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

/// `x` plus a constant sinusoidal position encoding of matching shape.
pub fn with_positions(ctx: &Ctx, x: &Tensor) -> Tensor {
    let (n, d) = x.dims2();
    let pe = ctx.constant(&[n, d], sinusoidal_positions(n, d));
    x.add(&pe)
}
