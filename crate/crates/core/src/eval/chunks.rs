use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::AlignedSample;
use crate::ingest::WindowSpec;
use crate::speech::NormStats;

/// Window sequences of one video over the shared 2 s / 1 s plan. Speech
/// vectors are raw; normalization is fitted per training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub kineme: Vec<Vec<f64>>,
    pub au: Vec<Vec<f64>>,
    pub speech: Vec<Vec<f64>>,
    pub score: f64,
}

impl VideoRecord {
    pub fn new(
        video_id: impl Into<String>,
        kineme: Vec<Vec<f64>>,
        au: Vec<Vec<f64>>,
        speech: Vec<Vec<f64>>,
        score: f64,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if kineme.len() != au.len() || kineme.len() != speech.len() {
            return Err(Error::Shape(format!(
                "{video_id}: {} kineme, {} AU and {} speech windows",
                kineme.len(),
                au.len(),
                speech.len()
            )));
        }
        Ok(VideoRecord {
            video_id,
            kineme,
            au,
            speech,
            score,
        })
    }

    pub fn n_windows(&self) -> usize {
        self.kineme.len()
    }
}

/// Thin-slice length and chunk hop, both in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub slice_len_s: f64,
    /// Defaults to `slice_len_s` (non-overlapping tiling).
    pub chunk_hop_s: Option<f64>,
    pub windows: WindowSpec,
}

impl SliceSpec {
    pub fn new(slice_len_s: f64) -> Self {
        SliceSpec {
            slice_len_s,
            chunk_hop_s: None,
            windows: WindowSpec::default(),
        }
    }

    fn whole_steps(value: f64, step: f64, what: &str) -> Result<usize> {
        let q = value / step;
        if (q - q.round()).abs() > 1e-9 || q.round() < 0.0 {
            return Err(Error::Config(format!(
                "{what} {value} s is not a whole number of {step} s hops"
            )));
        }
        Ok(q.round() as usize)
    }

    /// Windows per chunk, `L = (slice - window) / hop + 1`.
    pub fn windows_per_chunk(&self) -> Result<usize> {
        let w = &self.windows;
        if self.slice_len_s + 1e-9 < w.window_len_s {
            return Err(Error::Config(format!(
                "slice {} s is shorter than one {} s window",
                self.slice_len_s, w.window_len_s
            )));
        }
        Ok(Self::whole_steps(self.slice_len_s - w.window_len_s, w.hop_s, "slice excess")? + 1)
    }

    /// Chunk start stride in windows.
    pub fn stride(&self) -> Result<usize> {
        let hop = self.chunk_hop_s.unwrap_or(self.slice_len_s);
        let s = Self::whole_steps(hop, self.windows.hop_s, "chunk hop")?;
        if s == 0 {
            return Err(Error::Config("chunk hop must be positive".into()));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    /// Index of the source video in the dataset slice given to [`make_chunks`].
    pub video_index: usize,
    pub video_id: String,
    pub chunk_id: String,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkSet {
    pub slice_len_s: f64,
    pub windows_per_chunk: usize,
    pub chunks: Vec<Chunk>,
}

/// Tiles every video with chunks of `L` windows; videos shorter than one
/// slice are skipped with a warning.
pub fn make_chunks(videos: &[VideoRecord], spec: &SliceSpec) -> Result<ChunkSet> {
    let len = spec.windows_per_chunk()?;
    let stride = spec.stride()?;
    let mut chunks = Vec::new();
    for (vi, v) in videos.iter().enumerate() {
        if v.n_windows() < len {
            log::warn!(
                "{}: {} windows, shorter than a {} s slice; skipped",
                v.video_id,
                v.n_windows(),
                spec.slice_len_s
            );
            continue;
        }
        for (c, start) in (0..=v.n_windows() - len).step_by(stride).enumerate() {
            chunks.push(Chunk {
                video_index: vi,
                video_id: v.video_id.clone(),
                chunk_id: format!("{}#{c}", v.video_id),
                start,
                len,
            });
        }
    }
    Ok(ChunkSet {
        slice_len_s: spec.slice_len_s,
        windows_per_chunk: len,
        chunks,
    })
}

impl ChunkSet {
    /// Materializes chunks as model inputs. Every chunk inherits its video's
    /// score and `labels[video_index]`.
    pub fn samples(
        &self,
        videos: &[VideoRecord],
        labels: &[u8],
        speech_norm: Option<&NormStats>,
    ) -> Vec<AlignedSample> {
        self.chunks
            .iter()
            .map(|c| {
                let v = &videos[c.video_index];
                let r = c.start..c.start + c.len;
                let speech = v.speech[r.clone()]
                    .iter()
                    .map(|s| speech_norm.map_or_else(|| s.clone(), |n| n.apply(s)))
                    .collect();
                AlignedSample {
                    id: c.chunk_id.clone(),
                    video_id: v.video_id.clone(),
                    kineme: v.kineme[r.clone()].to_vec(),
                    au: v.au[r].to_vec(),
                    speech,
                    score: v.score,
                    label: labels[c.video_index] as f64,
                }
            })
            .collect()
    }

    pub fn chunks_of(&self, video_index: usize) -> impl Iterator<Item = &Chunk> {
        self.chunks.iter().filter(move |c| c.video_index == video_index)
    }
}
