//! Mono 16-bit PCM WAV reading and writing.
//!
//! Only the canonical layout is produced on write: a 44-byte header
//! (`RIFF`, `fmt ` with 16 bytes, `data`) followed by little-endian `i16`
//! samples. On read, unknown chunks between `fmt ` and `data` are skipped.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// The only sample rate accepted by [`read_wav`].
pub const SUPPORTED_SAMPLE_RATE: u32 = 16_000;

const PCM_FORMAT_TAG: u16 = 1;
const SCALE: f64 = 32768.0;

/// A mono waveform with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Builds a normalized clip. Every sample must be finite and within `[-1, 1]`.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let clip = Self::from_unbounded(samples, sample_rate)?;
        if let Some((i, s)) = clip
            .samples
            .iter()
            .enumerate()
            .find(|(_, s)| s.abs() > 1.0)
        {
            return Err(Error::Validation(format!(
                "sample {i} = {s} is outside [-1, 1]"
            )));
        }
        Ok(clip)
    }

    /// Builds a clip whose samples may exceed unit range, e.g. the output of
    /// an inverse transform or a mix. [`write_wav`] clamps on output.
    pub fn from_unbounded(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Validation("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Validation(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Clamps to `[-1, 1 - 1/32768]` and quantizes to `i16`.
pub fn quantize_sample(x: f64) -> i16 {
    let clamped = x.clamp(-1.0, 1.0 - 1.0 / SCALE);
    (clamped * SCALE).round() as i16
}

pub fn dequantize_sample(v: i16) -> f64 {
    v as f64 / SCALE
}

/// Serializes a clip as a canonical 44-byte-header PCM WAV.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let n = clip.samples.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT_TAG.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&quantize_sample(s).to_le_bytes());
    }
    out
}

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Parses a mono 16-bit PCM WAV at the supported sample rate.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" {
        return Err(Error::format("riff", "missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::format("wave", "missing WAVE form type"));
    }

    let mut pos = 12;
    let mut fmt_seen = false;
    let mut sample_rate = 0;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .ok_or_else(|| Error::format("chunk_size", "overflow"))?;

        match id {
            b"fmt " => {
                if size < 16 || end > bytes.len() {
                    return Err(Error::format("fmt", format!("chunk too short ({size} bytes)")));
                }
                let tag = u16_at(bytes, body);
                if tag != PCM_FORMAT_TAG {
                    return Err(Error::format(
                        "audio_format",
                        format!("format tag {tag}, only PCM (1) is supported"),
                    ));
                }
                let channels = u16_at(bytes, body + 2);
                if channels != 1 {
                    return Err(Error::format(
                        "channels",
                        format!("{channels} channels, only mono is supported"),
                    ));
                }
                sample_rate = u32_at(bytes, body + 4);
                if sample_rate != SUPPORTED_SAMPLE_RATE {
                    return Err(Error::format(
                        "sample_rate",
                        format!("{sample_rate} Hz, only {SUPPORTED_SAMPLE_RATE} Hz is supported"),
                    ));
                }
                let bits = u16_at(bytes, body + 14);
                if bits != 16 {
                    return Err(Error::format(
                        "bits_per_sample",
                        format!("{bits} bits, only 16 is supported"),
                    ));
                }
                fmt_seen = true;
            }
            b"data" => {
                if !fmt_seen {
                    return Err(Error::format("fmt", "data chunk precedes fmt chunk"));
                }
                // Tolerate a truncated final chunk.
                let end = end.min(bytes.len());
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|b| dequantize_sample(i16::from_le_bytes([b[0], b[1]])))
                    .collect();
                return AudioClip::new(samples, sample_rate);
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = end + (size & 1);
    }

    if fmt_seen {
        Err(Error::format("data", "no data chunk"))
    } else {
        Err(Error::format("fmt", "no fmt chunk"))
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(clip)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_wav(values: &[i16], tag: u16, channels: u16, rate: u32, bits: u16) -> Vec<u8> {
        let clip = AudioClip::new(vec![0.0; values.len()], 16_000).unwrap();
        let mut bytes = encode_wav(&clip);
        bytes[20..22].copy_from_slice(&tag.to_le_bytes());
        bytes[22..24].copy_from_slice(&channels.to_le_bytes());
        bytes[24..28].copy_from_slice(&rate.to_le_bytes());
        bytes[34..36].copy_from_slice(&bits.to_le_bytes());
        for (i, v) in values.iter().enumerate() {
            bytes[44 + 2 * i..46 + 2 * i].copy_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    #[test]
    fn decodes_linear_scaling() {
        let bytes = raw_wav(&[0, 16384, -32768], 1, 1, 16_000, 16);
        let clip = decode_wav(&bytes).unwrap();
        assert_eq!(clip.samples(), &[0.0, 0.5, -1.0]);
        assert_eq!(clip.sample_rate(), 16_000);
    }

    #[test]
    fn one_second_has_16000_samples() {
        let clip = AudioClip::new(vec![0.1; 16_000], 16_000).unwrap();
        let bytes = encode_wav(&clip);
        assert_eq!(bytes.len(), 44 + 2 * 16_000);
        assert_eq!(decode_wav(&bytes).unwrap().len(), 16_000);
    }

    #[test]
    fn zero_and_clamped_samples() {
        let bytes = encode_wav(&AudioClip::new(vec![0.0], 16_000).unwrap());
        assert_eq!(&bytes[44..46], &0i16.to_le_bytes());
        assert_eq!(quantize_sample(2.0), 32767);
        assert_eq!(quantize_sample(-2.0), -32768);
        assert_eq!(quantize_sample(1.0), 32767);

        // An unbounded clip goes through the same clamp on encode.
        let loud = AudioClip::from_unbounded(vec![2.0], 16_000).unwrap();
        assert_eq!(&encode_wav(&loud)[44..46], &32767i16.to_le_bytes());
    }

    #[test]
    fn rejects_bad_fields() {
        let cases = [
            (raw_wav(&[0], 3, 1, 16_000, 16), "audio_format"),
            (raw_wav(&[0], 1, 2, 16_000, 16), "channels"),
            (raw_wav(&[0], 1, 1, 44_100, 16), "sample_rate"),
            (raw_wav(&[0], 1, 1, 16_000, 8), "bits_per_sample"),
        ];
        for (bytes, want) in cases {
            match decode_wav(&bytes) {
                Err(Error::Format { field, .. }) => assert_eq!(field, want),
                other => panic!("expected format error on {want}, got {other:?}"),
            }
        }
        assert!(matches!(
            decode_wav(b"RIFX0000WAVE"),
            Err(Error::Format { field: "riff", .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_wav("/nonexistent/definitely/missing.wav").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn skips_unknown_chunks() {
        let clip = AudioClip::new(vec![0.25, -0.5], 16_000).unwrap();
        let canonical = encode_wav(&clip);
        let mut bytes = canonical[..36].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 0]);
        bytes.extend_from_slice(&canonical[36..]);
        assert_eq!(decode_wav(&bytes).unwrap(), clip);
    }

    #[test]
    fn clip_validation() {
        assert!(AudioClip::new(vec![0.0], 0).is_err());
        assert!(AudioClip::new(vec![f64::NAN], 16_000).is_err());
        assert!(AudioClip::new(vec![1.5], 16_000).is_err());
        assert!(AudioClip::from_unbounded(vec![1.5], 16_000).is_ok());
    }
}
