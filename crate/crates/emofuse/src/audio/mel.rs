//! Log-mel spectrograms: Hann-windowed STFT through a triangular HTK-scale
//! filterbank.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::wav::Waveform;
use crate::error::{Error, Result};

/// DSP constants for framing, the filterbank, and prosody extraction. The
/// defaults (25 ms window, 10 ms hop, 80 mels, 512-point FFT) apply to
/// everything downstream.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct AudioConfig {
    pub sample_rate: u32,
    pub window_secs: f64,
    pub hop_secs: f64,
    pub n_mels: usize,
    pub fft_size: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub log_floor: f64,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub voicing_threshold: f64,
}

impl Default for AudioConfig {
    fn default() -> Self {
        AudioConfig {
            sample_rate: 16_000,
            window_secs: 0.025,
            hop_secs: 0.010,
            n_mels: 80,
            fft_size: 512,
            fmin_hz: 0.0,
            fmax_hz: 8_000.0,
            log_floor: 1e-10,
            f0_min_hz: 50.0,
            f0_max_hz: 600.0,
            voicing_threshold: 0.3,
        }
    }
}

impl AudioConfig {
    pub fn window_samples(&self) -> usize {
        (self.window_secs * self.sample_rate as f64).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.hop_secs * self.sample_rate as f64).round() as usize
    }

    /// `1 + floor((len - window) / hop)` for `len >= window`, else 0.
    pub fn frame_count(&self, len: usize) -> usize {
        let win = self.window_samples();
        if len < win {
            0
        } else {
            1 + (len - win) / self.hop_samples()
        }
    }
}

/// Frame-major log-mel energies.
#[derive(Clone, Debug)]
pub struct MelSpectrogram {
    /// `n_frames * n_mels`, row-major.
    pub frames: Vec<f64>,
    pub n_frames: usize,
    pub n_mels: usize,
    pub frame_hop_secs: f64,
    pub window_secs: f64,
}

impl MelSpectrogram {
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t * self.n_mels..(t + 1) * self.n_mels]
    }

    /// Log energies rescaled so the log floor maps to 0 and typical speech
    /// energies land around O(1); this is what the encoders consume.
    pub fn normalized(&self, cfg: &AudioConfig) -> Vec<f64> {
        let floor = cfg.log_floor.ln();
        self.frames.iter().map(|&v| (v - floor) / -floor).collect()
    }
}

/// HTK mel scale.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Center frequency (Hz) of each triangular filter.
pub fn mel_filter_centers(cfg: &AudioConfig) -> Vec<f64> {
    let lo = hz_to_mel(cfg.fmin_hz);
    let hi = hz_to_mel(cfg.fmax_hz);
    let step = (hi - lo) / (cfg.n_mels + 1) as f64;
    (1..=cfg.n_mels).map(|m| mel_to_hz(lo + step * m as f64)).collect()
}

/// Triangular filterbank, `n_mels x (fft_size/2 + 1)`, peak weight 1.
fn filterbank(cfg: &AudioConfig) -> Vec<f64> {
    let n_bins = cfg.fft_size / 2 + 1;
    let lo = hz_to_mel(cfg.fmin_hz);
    let hi = hz_to_mel(cfg.fmax_hz);
    let step = (hi - lo) / (cfg.n_mels + 1) as f64;
    let edges: Vec<f64> = (0..cfg.n_mels + 2).map(|m| mel_to_hz(lo + step * m as f64)).collect();

    let mut fb = vec![0.0; cfg.n_mels * n_bins];
    for m in 0..cfg.n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * cfg.sample_rate as f64 / cfg.fft_size as f64;
            let w = if f <= left || f >= right {
                0.0
            } else if f <= center {
                (f - left) / (center - left)
            } else {
                (right - f) / (right - center)
            };
            fb[m * n_bins + k] = w;
        }
    }
    fb
}

/// Compute the log-mel spectrogram. Errors if the waveform is shorter than
/// one analysis window.
pub fn mel_spectrogram(wave: &Waveform, cfg: &AudioConfig) -> Result<MelSpectrogram> {
    assert_eq!(
        wave.sample_rate, cfg.sample_rate,
        "waveform must be resampled to the configured rate first"
    );
    let win = cfg.window_samples();
    let hop = cfg.hop_samples();
    assert!(win <= cfg.fft_size, "window larger than FFT size");
    let n_frames = cfg.frame_count(wave.samples.len());
    if n_frames == 0 {
        return Err(Error::validation(format!(
            "waveform of {} samples is shorter than one {}-sample window",
            wave.samples.len(),
            win
        )));
    }

    let hann: Vec<f64> = (0..win)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / win as f64).cos())
        .collect();
    let fb = filterbank(cfg);
    let n_bins = cfg.fft_size / 2 + 1;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);
    let mut frames = vec![0.0; n_frames * cfg.n_mels];
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    for t in 0..n_frames {
        let start = t * hop;
        for i in 0..cfg.fft_size {
            let v = if i < win {
                wave.samples[start + i] * hann[i]
            } else {
                0.0
            };
            buf[i] = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..n_bins].iter().map(|c| c.norm_sqr()).collect();
        for m in 0..cfg.n_mels {
            let e: f64 = fb[m * n_bins..(m + 1) * n_bins]
                .iter()
                .zip(&power)
                .map(|(w, p)| w * p)
                .sum();
            frames[t * cfg.n_mels + m] = e.max(cfg.log_floor).ln();
        }
    }
    Ok(MelSpectrogram {
        frames,
        n_frames,
        n_mels: cfg.n_mels,
        frame_hop_secs: cfg.hop_secs,
        window_secs: cfg.window_secs,
    })
}
