#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 64 * 1024 {
        return;
    }
    if let Ok(wave) = emofuse::audio::read_wav_bytes(data, "<fuzz>", 16_000) {
        assert_eq!(wave.sample_rate, 16_000);
        assert!(wave.samples.iter().all(|s| s.is_finite() && s.abs() <= 1.0));
        // downstream feature extraction must not panic either
        let cfg = emofuse::audio::AudioConfig::default();
        let _ = emofuse::audio::mel_spectrogram(&wave, &cfg);
        let _ = emofuse::audio::prosody_features(&wave, &cfg);
    }
});
