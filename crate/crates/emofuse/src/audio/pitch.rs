//! Frame-level prosody: autocorrelation F0 and RMS energy, aligned with the
//! mel framing.

use super::mel::AudioConfig;
use super::wav::Waveform;

/// Per-frame pitch (Hz, 0 when unvoiced) and RMS energy.
#[derive(Clone, Debug, Default)]
pub struct ProsodyFrames {
    pub f0: Vec<f64>,
    pub energy: Vec<f64>,
}

impl ProsodyFrames {
    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }
}

/// Extract prosody frames with the same window/hop as the mel spectrogram.
/// A frame is voiced when the best normalized autocorrelation in the
/// `f0_min..f0_max` lag range reaches the voicing threshold.
pub fn prosody_features(wave: &Waveform, cfg: &AudioConfig) -> ProsodyFrames {
    assert_eq!(
        wave.sample_rate, cfg.sample_rate,
        "waveform must be resampled to the configured rate first"
    );
    let win = cfg.window_samples();
    let hop = cfg.hop_samples();
    let n_frames = cfg.frame_count(wave.samples.len());
    let sr = cfg.sample_rate as f64;
    let lag_min = (sr / cfg.f0_max_hz).ceil() as usize;
    let lag_max = ((sr / cfg.f0_min_hz).floor() as usize).min(win.saturating_sub(1));

    let mut out = ProsodyFrames::default();
    for t in 0..n_frames {
        let frame = &wave.samples[t * hop..t * hop + win];
        let power: f64 = frame.iter().map(|s| s * s).sum();
        out.energy.push((power / win as f64).sqrt());

        let mut best_lag = 0usize;
        let mut best_corr = f64::NEG_INFINITY;
        if power > 0.0 {
            for lag in lag_min..=lag_max {
                let mut acc = 0.0;
                for i in 0..win - lag {
                    acc += frame[i] * frame[i + lag];
                }
                if acc > best_corr {
                    best_corr = acc;
                    best_lag = lag;
                }
            }
        }
        let voiced = power > 0.0 && best_corr / power >= cfg.voicing_threshold;
        out.f0.push(if voiced { sr / best_lag as f64 } else { 0.0 });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sawtooth(freq: f64, secs: f64, rate: u32, amp: f64) -> Waveform {
        let n = (secs * rate as f64) as usize;
        let period = rate as f64 / freq;
        Waveform {
            samples: (0..n)
                .map(|i| {
                    let phase = (i as f64 % period) / period;
                    amp * (2.0 * phase - 1.0)
                })
                .collect(),
            sample_rate: rate,
        }
    }

    fn median(mut xs: Vec<f64>) -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs[xs.len() / 2]
    }

    #[test]
    fn sawtooth_200hz_detected_within_5hz() {
        let cfg = AudioConfig::default();
        let wave = sawtooth(200.0, 0.5, 16000, 0.7);
        let pros = prosody_features(&wave, &cfg);
        let voiced: Vec<f64> = pros.f0.iter().cloned().filter(|&f| f > 0.0).collect();
        assert!(!voiced.is_empty(), "no voiced frames detected");
        let med = median(voiced);
        assert!((med - 200.0).abs() <= 5.0, "median F0 {med}");
    }

    #[test]
    fn silence_is_unvoiced_with_zero_energy() {
        let cfg = AudioConfig::default();
        let wave = Waveform {
            samples: vec![0.0; 8000],
            sample_rate: 16000,
        };
        let pros = prosody_features(&wave, &cfg);
        assert!(pros.f0.iter().all(|&f| f == 0.0));
        assert!(pros.energy.iter().all(|&e| e.abs() < 1e-12));
    }

    #[test]
    fn doubling_amplitude_doubles_energy_keeps_f0() {
        let cfg = AudioConfig::default();
        let a = prosody_features(&sawtooth(150.0, 0.3, 16000, 0.3), &cfg);
        let b = prosody_features(&sawtooth(150.0, 0.3, 16000, 0.6), &cfg);
        assert_eq!(a.f0, b.f0);
        for (ea, eb) in a.energy.iter().zip(&b.energy) {
            assert!((eb - 2.0 * ea).abs() < 1e-9);
        }
    }

    #[test]
    fn f0_stays_in_declared_range() {
        let cfg = AudioConfig::default();
        for freq in [60.0, 120.0, 333.0, 550.0] {
            let pros = prosody_features(&sawtooth(freq, 0.2, 16000, 0.8), &cfg);
            for &f in &pros.f0 {
                assert!(f == 0.0 || (50.0..=600.0).contains(&f), "f0 {f} out of range");
            }
        }
    }

    #[test]
    fn frame_count_matches_mel_framing() {
        let cfg = AudioConfig::default();
        let wave = sawtooth(100.0, 0.321, 16000, 0.5);
        let pros = prosody_features(&wave, &cfg);
        assert_eq!(pros.len(), cfg.frame_count(wave.samples.len()));
    }
}
