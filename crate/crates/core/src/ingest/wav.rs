//! PCM-16 RIFF/WAVE input and output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SAMPLE_RATE: u32 = 8000;

/// Mono audio scaled to [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioTrack {
    pub video_id: String,
    pub sample_rate: u32,
    samples: Vec<f64>,
}

impl AudioTrack {
    pub fn new(video_id: impl Into<String>, sample_rate: u32, samples: Vec<f64>) -> Result<Self> {
        if sample_rate < MIN_SAMPLE_RATE {
            return Err(Error::InvalidValue(format!(
                "sample rate {sample_rate} Hz is below {MIN_SAMPLE_RATE} Hz"
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidValue("audio contains non-finite samples".into()));
        }
        Ok(AudioTrack {
            video_id: video_id.into(),
            sample_rate,
            samples,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Writes mono PCM-16, rounding and saturating at full scale.
    pub fn write_wav(&self, path: &Path) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
        for &s in &self.samples {
            let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            w.write_sample(v).map_err(|e| map_hound(path, e))?;
        }
        w.finalize().map_err(|e| map_hound(path, e))?;
        Ok(())
    }
}

/// Reads a PCM-16 WAV file. Stereo is averaged to mono; samples are divided by 32768.
pub fn read_wav(path: &Path) -> Result<AudioTrack> {
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: only 16-bit integer PCM is supported ({:?}, {} bits)",
            path.display(),
            spec.sample_format,
            spec.bits_per_sample
        )));
    }
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedFormat(format!(
            "{}: {} channels (mono or stereo expected)",
            path.display(),
            channels
        )));
    }
    let expected = reader.len() as usize;
    let raw: Vec<i16> = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| match e {
            hound::Error::IoError(io) => Error::Parse {
                row: 0,
                message: format!("{}: truncated sample data ({io})", path.display()),
            },
            other => map_hound(path, other),
        })?;
    if raw.len() != expected || raw.len() % channels != 0 {
        return Err(Error::Parse {
            row: raw.len(),
            message: format!("{}: truncated sample data", path.display()),
        });
    }
    let samples = raw
        .chunks_exact(channels)
        .map(|fr| fr.iter().map(|&s| s as f64 / 32768.0).sum::<f64>() / channels as f64)
        .collect();
    let video_id = super::csv_util::file_stem(path);
    AudioTrack::new(video_id, spec.sample_rate, samples)
}

fn map_hound(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => Error::Parse {
            row: 0,
            message: format!("{}: truncated file", path.display()),
        },
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::Unsupported => Error::UnsupportedFormat(format!("{}: unsupported WAV encoding", path.display())),
        hound::Error::FormatError(msg) => Error::Parse {
            row: 0,
            message: format!("{}: {msg}", path.display()),
        },
        other => Error::UnsupportedFormat(format!("{}: {other}", path.display())),
    }
}
