//! Mono PCM WAV reading (16-bit integer or 32-bit float) with linear
//! resampling, plus a 16-bit writer for generating fixtures.
//!
//! The parser is defensive: every length and offset is checked, so
//! arbitrary bytes produce errors, never panics.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Normalized mono audio: samples in `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::parse(
                self.source,
                0,
                format!("truncated WAV: needed {} bytes at offset {}", n, self.pos),
            )),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Read a mono WAV file and resample to `target_rate` if necessary.
pub fn read_wav(path: &Path, target_rate: u32) -> Result<Waveform> {
    let bytes = fs::read(path)?;
    read_wav_bytes(&bytes, &path.display().to_string(), target_rate)
}

/// Parse WAV bytes. `source` labels error messages.
pub fn read_wav_bytes(bytes: &[u8], source: &str, target_rate: u32) -> Result<Waveform> {
    let mut cur = Cursor { bytes, pos: 0, source };
    if cur.take(4)? != b"RIFF" {
        return Err(Error::parse(source, 0, "missing RIFF magic"));
    }
    cur.u32()?; // declared riff size; untrusted, ignored
    if cur.take(4)? != b"WAVE" {
        return Err(Error::parse(source, 0, "missing WAVE form type"));
    }

    let mut format: Option<(u16, u16, u32)> = None; // (audio_format, bits, rate)
    let mut data: Option<&[u8]> = None;
    while cur.pos + 8 <= bytes.len() {
        let id: [u8; 4] = cur.take(4)?.try_into().unwrap();
        let size = cur.u32()? as usize;
        let chunk = cur.take(size)?;
        if size % 2 == 1 && cur.pos < bytes.len() {
            cur.take(1)?; // RIFF chunks are word-aligned
        }
        match &id {
            b"fmt " => {
                if chunk.len() < 16 {
                    return Err(Error::parse(source, 0, "fmt chunk too short"));
                }
                let audio_format = u16::from_le_bytes([chunk[0], chunk[1]]);
                let channels = u16::from_le_bytes([chunk[2], chunk[3]]);
                let rate = u32::from_le_bytes([chunk[4], chunk[5], chunk[6], chunk[7]]);
                let bits = u16::from_le_bytes([chunk[14], chunk[15]]);
                if channels != 1 {
                    return Err(Error::UnsupportedFormat(format!(
                        "{source}: {channels} channels (only mono is supported)"
                    )));
                }
                if !(1_000..=384_000).contains(&rate) {
                    return Err(Error::UnsupportedFormat(format!(
                        "{source}: sample rate {rate} Hz out of the supported range"
                    )));
                }
                format = Some((audio_format, bits, rate));
            }
            b"data" => data = Some(chunk),
            _ => {} // skip LIST/fact/etc.
        }
    }

    let (audio_format, bits, rate) =
        format.ok_or_else(|| Error::parse(source, 0, "missing fmt chunk"))?;
    let data = data.ok_or_else(|| Error::parse(source, 0, "missing data chunk"))?;

    let samples: Vec<f64> = match (audio_format, bits) {
        (1, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
            .collect(),
        (3, 32) => data
            .chunks_exact(4)
            .map(|c| {
                let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
                if v.is_finite() {
                    v.clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect(),
        _ => {
            return Err(Error::UnsupportedFormat(format!(
                "{source}: format {audio_format} / {bits}-bit (expected 16-bit PCM or 32-bit float)"
            )))
        }
    };
    if samples.is_empty() {
        return Err(Error::parse(source, 0, "empty data chunk"));
    }

    let wave = Waveform {
        samples,
        sample_rate: rate,
    };
    Ok(if rate == target_rate {
        wave
    } else {
        resample_linear(&wave, target_rate)
    })
}

/// Linear-interpolation resampling.
pub fn resample_linear(wave: &Waveform, target_rate: u32) -> Waveform {
    let ratio = wave.sample_rate as f64 / target_rate as f64;
    let out_len = ((wave.samples.len() as f64 / ratio).round() as usize).max(1);
    let n = wave.samples.len();
    let samples = (0..out_len)
        .map(|j| {
            let pos = j as f64 * ratio;
            let i = pos.floor() as usize;
            if i + 1 >= n {
                wave.samples[n - 1]
            } else {
                let frac = pos - i as f64;
                wave.samples[i] * (1.0 - frac) + wave.samples[i + 1] * frac
            }
        })
        .collect();
    Waveform {
        samples,
        sample_rate: target_rate,
    }
}

/// Write a mono 16-bit PCM WAV (values clamped to `[-1, 1]`).
pub fn write_wav_16bit(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let mut bytes = encode_wav_16bit(samples, sample_rate);
    bytes.shrink_to_fit();
    fs::write(path, bytes)?;
    Ok(())
}

pub fn encode_wav_16bit(samples: &[f64], sample_rate: u32) -> Vec<u8> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_second_16khz_roundtrip() {
        let samples: Vec<f64> = (0..16000)
            .map(|i| (2.0 * std::f64::consts::PI * 220.0 * i as f64 / 16000.0).sin() * 0.5)
            .collect();
        let bytes = encode_wav_16bit(&samples, 16000);
        let wave = read_wav_bytes(&bytes, "<mem>", 16000).unwrap();
        assert_eq!(wave.samples.len(), 16000);
        assert_eq!(wave.sample_rate, 16000);
        for (a, b) in wave.samples.iter().zip(&samples) {
            assert!((a - b).abs() < 1e-3); // 16-bit quantization
        }
    }

    #[test]
    fn all_zero_file() {
        let bytes = encode_wav_16bit(&vec![0.0; 100], 16000);
        let wave = read_wav_bytes(&bytes, "<mem>", 16000).unwrap();
        assert!(wave.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn resampling_8khz_doubles_length_with_small_sine_error() {
        // analytic sine oracle: 100 Hz at 8 kHz, resampled to 16 kHz
        let n = 800;
        let f = 100.0;
        let samples: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / 8000.0).sin() * 0.9)
            .collect();
        let bytes = encode_wav_16bit(&samples, 8000);
        let wave = read_wav_bytes(&bytes, "<mem>", 16000).unwrap();
        assert_eq!(wave.samples.len(), 2 * n);
        let mut max_err: f64 = 0.0;
        // skip the clamped tail sample
        for (j, &got) in wave.samples.iter().enumerate().take(2 * n - 2) {
            let want = (2.0 * std::f64::consts::PI * f * j as f64 / 16000.0).sin() * 0.9;
            max_err = max_err.max((got - want).abs());
        }
        assert!(max_err <= 1e-2, "max interpolation error {max_err}");
    }

    #[test]
    fn multichannel_rejected() {
        let mut bytes = encode_wav_16bit(&vec![0.1; 10], 16000);
        bytes[22] = 2; // channel count
        let err = read_wav_bytes(&bytes, "<mem>", 16000).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(_)));
    }

    #[test]
    fn truncated_header_is_parse_error() {
        let err = read_wav_bytes(b"RIFF\x10\x00\x00\x00WA", "<mem>", 16000).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn float32_payload() {
        // hand-build a float WAV
        let samples = [0.25f32, -0.5, 1.5, -2.0]; // out-of-range values clamp
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36u32 + 16).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&3u16.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&16000u32.to_le_bytes());
        out.extend_from_slice(&(16000u32 * 4).to_le_bytes());
        out.extend_from_slice(&4u16.to_le_bytes());
        out.extend_from_slice(&32u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&16u32.to_le_bytes());
        for s in samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        let wave = read_wav_bytes(&out, "<mem>", 16000).unwrap();
        assert_eq!(wave.samples, vec![0.25, -0.5, 1.0, -1.0]);
    }
}
