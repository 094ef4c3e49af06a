use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AudioTrack;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
}

impl Default for FrameConfig {
    /// 93 ms frames overlapping by 23 ms.
    fn default() -> Self {
        FrameConfig {
            frame_ms: 93.0,
            hop_ms: 70.0,
        }
    }
}

impl FrameConfig {
    pub fn frame_len(&self, sample_rate: u32) -> usize {
        (self.frame_ms / 1000.0 * sample_rate as f64).round() as usize
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        (self.hop_ms / 1000.0 * sample_rate as f64).round() as usize
    }
}

/// Raw (unwindowed) analysis frames of one track.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFrames {
    pub sample_rate: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub frames: Vec<Vec<f64>>,
}

impl AudioFrames {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Sample position of the centre of frame `i`.
    pub fn center(&self, i: usize) -> f64 {
        (i * self.hop) as f64 + self.frame_len as f64 / 2.0
    }
}

pub fn frame_audio(track: &AudioTrack, config: &FrameConfig) -> Result<AudioFrames> {
    let sr = track.sample_rate;
    let frame_len = config.frame_len(sr);
    let hop = config.hop_len(sr);
    if frame_len < 2 || hop == 0 {
        return Err(Error::Config(format!(
            "frame {} ms / hop {} ms too small at {sr} Hz",
            config.frame_ms, config.hop_ms
        )));
    }
    let samples = track.samples();
    if samples.len() < frame_len {
        return Err(Error::TooShort(format!(
            "{}: {} samples, one frame needs {frame_len}",
            track.video_id,
            samples.len()
        )));
    }
    let n = 1 + (samples.len() - frame_len) / hop;
    let frames = (0..n).map(|i| samples[i * hop..i * hop + frame_len].to_vec()).collect();
    Ok(AudioFrames {
        sample_rate: sr,
        frame_len,
        hop,
        frames,
    })
}

/// Fraction of adjacent sample pairs whose signs differ; zero counts as positive.
pub fn zcr(frame: &[f64]) -> f64 {
    if frame.len() < 2 {
        return 0.0;
    }
    let crossings = frame.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
    crossings as f64 / (frame.len() - 1) as f64
}
