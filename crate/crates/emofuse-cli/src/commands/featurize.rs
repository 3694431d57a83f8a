//! `featurize`: mel + prosody features for one WAV, written as a JSON
//! manifest plus a little-endian f32 blob.

use std::path::PathBuf;

use emofuse::audio::{mel_spectrogram, prosody_features, read_wav, AudioConfig};
use emofuse::Result;

use crate::FeaturizeArgs;

pub fn run(args: FeaturizeArgs, _seed: Option<u64>, out: Option<PathBuf>) -> Result<i32> {
    let out_file = super::require_out(out)?;
    let cfg = AudioConfig::default();
    let wave = read_wav(&args.wav, cfg.sample_rate)?;
    let mel = mel_spectrogram(&wave, &cfg)?;
    let prosody = prosody_features(&wave, &cfg);

    let mut blob: Vec<u8> = Vec::new();
    let mut tensors = Vec::new();
    let mut push = |name: &str, shape: Vec<usize>, data: &[f64], blob: &mut Vec<u8>| {
        tensors.push(serde_json::json!({
            "name": name,
            "shape": shape,
            "dtype": "f32",
            "offset": blob.len(),
        }));
        for &v in data {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
    };
    push("mel", vec![mel.n_frames, mel.n_mels], &mel.frames, &mut blob);
    push("f0", vec![prosody.f0.len()], &prosody.f0, &mut blob);
    push("energy", vec![prosody.energy.len()], &prosody.energy, &mut blob);

    let blob_name = format!(
        "{}.bin",
        out_file.file_name().map(|s| s.to_string_lossy().to_string()).unwrap_or_default()
    );
    let manifest = serde_json::json!({
        "source": args.wav.display().to_string(),
        "sample_rate": cfg.sample_rate,
        "n_frames": mel.n_frames,
        "n_mels": mel.n_mels,
        "window_secs": cfg.window_secs,
        "hop_secs": cfg.hop_secs,
        "blob": blob_name,
        "blob_len": blob.len(),
        "tensors": tensors,
    });
    if let Some(parent) = out_file.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&out_file, serde_json::to_string_pretty(&manifest).expect("manifest"))?;
    let blob_path = out_file.with_file_name(&blob_name);
    std::fs::write(&blob_path, blob)?;
    println!(
        "featurized {}: {} frames x {} mels -> {}",
        args.wav.display(),
        mel.n_frames,
        mel.n_mels,
        out_file.display()
    );
    Ok(0)
}
