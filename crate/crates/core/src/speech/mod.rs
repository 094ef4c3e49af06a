//! Low-level speech descriptors aggregated per window.

mod frame;
mod mfcc;
mod pitch;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AudioTrack, WindowPlan, WindowSpec};

pub use frame::{frame_audio, zcr, AudioFrames, FrameConfig};
pub use mfcc::{dct_ii_orthonormal, hann, hz_to_mel, mel_to_hz, MelFilterbank, MfccExtractor, LOG_FLOOR};
pub use pitch::{estimate_f0, normalized_autocorrelation, PitchConfig, VOICING_THRESHOLD};

pub const N_MFCC: usize = 20;
/// `[f0, voicing, zcr, mfcc1..mfcc20]`
pub const SPEECH_DIM: usize = 3 + N_MFCC;

const STD_FLOOR: f64 = 1e-8;

pub fn speech_feature_names() -> Vec<String> {
    let mut names = vec!["f0".to_string(), "voicing".into(), "zcr".into()];
    names.extend((1..=N_MFCC).map(|i| format!("mfcc{i}")));
    names
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LldFrame {
    pub f0: f64,
    pub voicing: f64,
    pub zcr: f64,
    pub mfcc: Vec<f64>,
}

impl LldFrame {
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(SPEECH_DIM);
        v.extend([self.f0, self.voicing, self.zcr]);
        v.extend(&self.mfcc);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeechConfig {
    pub frames: FrameConfig,
    pub fmin: f64,
    pub fmax: f64,
    pub n_mel: usize,
}

impl Default for SpeechConfig {
    fn default() -> Self {
        SpeechConfig {
            frames: FrameConfig::default(),
            fmin: 60.0,
            fmax: 400.0,
            n_mel: 26,
        }
    }
}

/// Descriptors of every analysis frame, with frame centres in samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LldTrack {
    pub sample_rate: u32,
    pub frames: Vec<LldFrame>,
    pub centers: Vec<f64>,
}

pub fn extract_lld(track: &AudioTrack, config: &SpeechConfig) -> Result<LldTrack> {
    let frames = frame_audio(track, &config.frames)?;
    let sr = track.sample_rate;
    let mfcc = MfccExtractor::new(frames.frame_len, sr, config.n_mel, N_MFCC);
    let pitch = PitchConfig {
        fmin: config.fmin,
        fmax: config.fmax,
    };
    let lld = frames
        .frames
        .par_iter()
        .map(|f| {
            let (f0, voicing) = estimate_f0(f, sr, &pitch);
            LldFrame {
                f0,
                voicing,
                zcr: zcr(f),
                mfcc: mfcc.compute(f),
            }
        })
        .collect();
    Ok(LldTrack {
        sample_rate: sr,
        frames: lld,
        centers: (0..frames.len()).map(|i| frames.center(i)).collect(),
    })
}

/// Mean descriptor vector over the frames whose centres fall in each window.
pub fn aggregate_speech(lld: &LldTrack, plan: &WindowPlan) -> Result<Vec<Vec<f64>>> {
    plan.boundaries
        .iter()
        .enumerate()
        .map(|(w, &(start, end))| {
            let members: Vec<&LldFrame> = lld
                .centers
                .iter()
                .zip(&lld.frames)
                .filter(|(&c, _)| c >= start as f64 && c < end as f64)
                .map(|(_, f)| f)
                .collect();
            if members.is_empty() {
                return Err(Error::TooShort(format!("window {w} contains no analysis frame")));
            }
            let mut acc = vec![0.0; SPEECH_DIM];
            for f in &members {
                for (a, v) in acc.iter_mut().zip(f.to_vector()) {
                    *a += v;
                }
            }
            Ok(acc.into_iter().map(|v| v / members.len() as f64).collect())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechWindowSequence {
    pub video_id: String,
    pub vectors: Vec<Vec<f64>>,
}

/// Raw (unnormalized) per-window speech vectors of one track.
pub fn encode_speech(track: &AudioTrack, config: &SpeechConfig, windows: &WindowSpec) -> Result<SpeechWindowSequence> {
    let lld = extract_lld(track, config)?;
    let plan = windows.plan(track.samples().len(), track.sample_rate as f64)?;
    Ok(SpeechWindowSequence {
        video_id: track.video_id.clone(),
        vectors: aggregate_speech(&lld, &plan)?,
    })
}

/// Per-dimension z-scoring statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Population mean and standard deviation (floored at 1e-8).
    pub fn fit<'a>(vectors: impl IntoIterator<Item = &'a Vec<f64>>) -> Result<Self> {
        let rows: Vec<&Vec<f64>> = vectors.into_iter().collect();
        if rows.len() < 2 {
            return Err(Error::InsufficientData(
                "normalization needs at least two vectors".into(),
            ));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("vectors of unequal length".into()));
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|d| rows.iter().map(|r| r[d]).sum::<f64>() / n).collect();
        let std = (0..dim)
            .map(|d| {
                let var = rows.iter().map(|r| (r[d] - mean[d]).powi(2)).sum::<f64>() / n;
                var.sqrt().max(STD_FLOOR)
            })
            .collect();
        Ok(NormStats { mean, std })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| x * s + m)
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Fits statistics on `vectors` and returns them normalized.
pub fn z_normalize(vectors: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, NormStats)> {
    let stats = NormStats::fit(vectors)?;
    Ok((vectors.iter().map(|v| stats.apply(v)).collect(), stats))
}
