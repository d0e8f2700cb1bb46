//! 16-bit mono PCM WAV reading and writing.
//!
//! Written files use the canonical 44-byte layout:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | `RIFF`                        |
//! | 4      | 4    | 36 + data bytes (LE)          |
//! | 8      | 4    | `WAVE`                        |
//! | 12     | 4    | `fmt `                        |
//! | 16     | 4    | 16                            |
//! | 20     | 2    | 1 (PCM)                       |
//! | 22     | 2    | 1 channel                     |
//! | 24     | 4    | sample rate                   |
//! | 28     | 4    | byte rate = rate * 2          |
//! | 32     | 2    | block align = 2               |
//! | 34     | 2    | 16 bits per sample            |
//! | 36     | 4    | `data`                        |
//! | 40     | 4    | data bytes                    |
//! | 44     | ...  | samples, i16 little-endian    |

use std::path::Path;

use thiserror::Error;

use super::Waveform;

const PCM_FORMAT: u16 = 1;
const FULL_SCALE: f64 = 32767.0;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
    #[error("MalformedWav: {0}")]
    Malformed(String),
}

fn malformed(msg: impl Into<String>) -> WavError {
    WavError::Malformed(msg.into())
}

/// `round(x * 32767)` clipped to the i16 range.
pub fn quantize(x: f64) -> i16 {
    (x * FULL_SCALE).round().clamp(-32768.0, 32767.0) as i16
}

pub fn dequantize(q: i16) -> f64 {
    f64::from(q) / FULL_SCALE
}

pub fn encode(w: &Waveform) -> Vec<u8> {
    let data_len = (w.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &w.samples {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    out
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parse a RIFF/WAVE image. Chunks other than `fmt ` and `data` are skipped.
pub fn decode(bytes: &[u8]) -> Result<Waveform, WavError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE header"));
    }
    let mut pos = 12;
    let mut sample_rate = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body.checked_add(size).filter(|&e| e <= bytes.len());
        match id {
            b"fmt " => {
                let end = end.ok_or_else(|| malformed("truncated fmt chunk"))?;
                if size < 16 {
                    return Err(malformed("fmt chunk shorter than 16 bytes"));
                }
                let format = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let rate = u32_at(bytes, body + 4);
                let bits = u16_at(bytes, body + 14);
                if format != PCM_FORMAT {
                    return Err(malformed(format!("format code {format}, expected PCM (1)")));
                }
                if channels != 1 {
                    return Err(malformed(format!("{channels} channels, expected mono")));
                }
                if bits != 16 {
                    return Err(malformed(format!("{bits} bits per sample, expected 16")));
                }
                if rate == 0 {
                    return Err(malformed("zero sample rate"));
                }
                sample_rate = Some(rate);
                pos = end + (size & 1);
            }
            b"data" => {
                let rate = sample_rate.ok_or_else(|| malformed("data chunk before fmt chunk"))?;
                let end = end.ok_or_else(|| malformed("truncated data chunk"))?;
                if !size.is_multiple_of(2) {
                    return Err(malformed("odd data chunk length for 16-bit samples"));
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| dequantize(i16::from_le_bytes([c[0], c[1]])))
                    .collect();
                return Ok(Waveform::new(rate, samples));
            }
            _ => {
                pos = end.ok_or_else(|| malformed("truncated chunk"))? + (size & 1);
            }
        }
    }
    Err(malformed("no data chunk"))
}

pub fn wav_write(w: &Waveform, path: &Path) -> Result<(), WavError> {
    crate::io::write_atomic(path, &encode(w))?;
    Ok(())
}

pub fn wav_read(path: &Path) -> Result<Waveform, WavError> {
    decode(&std::fs::read(path)?)
}
