//! Audio ingestion and prosody-aware feature extraction.
//!
//! WAV files are normalized to 16 kHz mono, converted to log-mel frames and
//! frame-aligned prosody (F0 + RMS energy), and the encoded audio features
//! are enriched by the prosody-enhancement residual
//! `F_a = h_a + LN(Enc(h_a))`, where the encoder sees the audio features
//! with the prosody channels appended.

mod mel;
mod pitch;
mod wav;

pub use mel::{hz_to_mel, mel_filter_centers, mel_spectrogram, mel_to_hz, AudioConfig, MelSpectrogram};
pub use pitch::{prosody_features, ProsodyFrames};
pub use wav::{encode_wav_16bit, read_wav, read_wav_bytes, resample_linear, write_wav_16bit, Waveform};

use crate::nn::{layer_norm, linear, transformer_layer, Ctx, LayerCfg, Tensor};

/// Scale applied to the F0 channel before it enters the encoder, so both
/// prosody channels are O(1).
const F0_SCALE: f64 = 1.0 / 600.0;

/// Prosody enhancement: a one-layer transformer encoder over the audio
/// features with broadcast (f0, energy) channels, projected back to the
/// feature width, layer-normalized, and added residually.
///
/// With the encoder output projection zeroed and the norm at gain 1 / bias
/// 0, this is the identity on `h_a`.
pub fn prosody_enhance(
    ctx: &mut Ctx,
    prefix: &str,
    h_a: &Tensor,
    prosody: &ProsodyFrames,
    cfg: LayerCfg,
) -> Tensor {
    let (t, d) = h_a.dims2();
    assert_eq!(
        t,
        prosody.len(),
        "frame-count mismatch: {} feature rows vs {} prosody frames",
        t,
        prosody.len()
    );
    assert_eq!(d, cfg.model_dim, "feature width does not match encoder dim");

    let mut channels = Vec::with_capacity(t * 2);
    for i in 0..t {
        channels.push(prosody.f0[i] * F0_SCALE);
        channels.push(prosody.energy[i]);
    }
    let pros = ctx.constant(&[t, 2], channels);
    let x = h_a.concat_cols(&pros);
    let z = linear(ctx, &format!("{prefix}.in"), &x, d + 2, d);
    let z = transformer_layer(ctx, &format!("{prefix}.enc"), &z, cfg);
    let enc = linear(ctx, &format!("{prefix}.out"), &z, d, d);
    let normed = layer_norm(ctx, &format!("{prefix}.ln"), &enc);
    h_a.add(&normed)
}
