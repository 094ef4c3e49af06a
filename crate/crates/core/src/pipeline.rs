//! Corpus-level encoding from raw streams to aligned per-window modality
//! sequences, plus the CSV formats those sequences are exchanged in.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Prediction, TraitLabels, VideoRecord};
use crate::explain::SymbolSequences;
use crate::facial::{corpus_au_thresholds, encode_video, ThresholdScope};
use crate::ingest::{
    parse_au_csv, parse_pose_csv, read_wav, AUSeries, AuColumns, AudioTrack, HeadPoseSeries, PoseCsvOptions,
    WindowSpec, N_AUS,
};
use crate::kineme::{learn_codebook, CodebookConfig, KinemeCodebook};
use crate::speech::{encode_speech, speech_feature_names, SpeechConfig, SPEECH_DIM};

/// Frame rate every pose and AU stream is brought to before windowing.
pub const TARGET_FPS: f64 = 30.0;

pub const POSE_DIR: &str = "pose";
pub const AU_DIR: &str = "au";
pub const AUDIO_DIR: &str = "audio";

/// Raw streams of a corpus, one entry per video in `video_id` order.
#[derive(Debug, Clone)]
pub struct CorpusStreams {
    pub pose: Vec<HeadPoseSeries>,
    pub au: Vec<AUSeries>,
    pub audio: Vec<AudioTrack>,
}

impl CorpusStreams {
    pub fn new(pose: Vec<HeadPoseSeries>, au: Vec<AUSeries>, audio: Vec<AudioTrack>) -> Result<Self> {
        if pose.len() != au.len() || pose.len() != audio.len() {
            return Err(Error::Shape(format!(
                "{} pose, {} AU and {} audio streams",
                pose.len(),
                au.len(),
                audio.len()
            )));
        }
        for ((p, a), w) in pose.iter().zip(&au).zip(&audio) {
            if p.video_id != a.video_id || p.video_id != w.video_id {
                return Err(Error::Shape(format!(
                    "stream ids disagree: {} / {} / {}",
                    p.video_id, a.video_id, w.video_id
                )));
            }
        }
        Ok(CorpusStreams { pose, au, audio })
    }

    pub fn len(&self) -> usize {
        self.pose.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pose.is_empty()
    }

    pub fn video_ids(&self) -> Vec<String> {
        self.pose.iter().map(|p| p.video_id.clone()).collect()
    }
}

fn stems(dir: &Path, ext: &str) -> Result<Vec<(String, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Pose CSVs of a directory, resampled to [`TARGET_FPS`].
pub fn load_pose_dir(dir: &Path, fps: f64) -> Result<Vec<HeadPoseSeries>> {
    let files = stems(dir, "csv")?;
    if files.is_empty() {
        return Err(Error::InsufficientData(format!("no pose CSVs in {}", dir.display())));
    }
    let options = PoseCsvOptions {
        fps,
        ..Default::default()
    };
    files
        .par_iter()
        .map(|(id, path)| {
            let mut s = parse_pose_csv(path, &options)?.resample(TARGET_FPS)?;
            s.video_id = id.clone();
            Ok(s)
        })
        .collect()
}

/// Reads `pose/*.csv`, `au/<id>.csv` and `audio/<id>.wav` under `dir`.
/// Every pose file needs its AU and audio counterparts.
pub fn load_streams(dir: &Path, fps: f64) -> Result<CorpusStreams> {
    let pose = load_pose_dir(&dir.join(POSE_DIR), fps)?;
    let au = pose
        .par_iter()
        .map(|p| {
            let path = dir.join(AU_DIR).join(format!("{}.csv", p.video_id));
            let mut s = parse_au_csv(&path, &AuColumns::default(), fps)?.resample(TARGET_FPS)?;
            s.video_id = p.video_id.clone();
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let audio = pose
        .par_iter()
        .map(|p| {
            let mut t = read_wav(&dir.join(AUDIO_DIR).join(format!("{}.wav", p.video_id)))?;
            t.video_id = p.video_id.clone();
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    CorpusStreams::new(pose, au, audio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodeConfig {
    pub windows: WindowSpec,
    pub speech: SpeechConfig,
    pub au_scope: ThresholdScope,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            windows: WindowSpec::default(),
            speech: SpeechConfig::default(),
            au_scope: ThresholdScope::Video,
        }
    }
}

/// Per-window symbols and descriptors of every video. Speech vectors are raw.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EncodedCorpus {
    pub k: usize,
    pub kinemes: BTreeMap<String, Vec<usize>>,
    pub aus: BTreeMap<String, Vec<[u8; N_AUS]>>,
    pub speech: BTreeMap<String, Vec<Vec<f64>>>,
}

pub fn learn_corpus_codebook(streams: &CorpusStreams, config: &CodebookConfig) -> Result<KinemeCodebook> {
    learn_codebook(&streams.pose, config)
}

pub fn encode_streams(
    streams: &CorpusStreams,
    codebook: &KinemeCodebook,
    config: &EncodeConfig,
) -> Result<EncodedCorpus> {
    let corpus_thresholds = match config.au_scope {
        ThresholdScope::Video => None,
        ThresholdScope::Corpus => Some(corpus_au_thresholds(&streams.au)?),
    };
    let encoded = (0..streams.len())
        .into_par_iter()
        .map(|v| {
            let pose = &streams.pose[v];
            let kin = codebook.decode(pose)?;
            let au = &streams.au[v];
            let plan = config.windows.plan(au.len(), au.fps)?;
            let aus = encode_video(au, &plan, corpus_thresholds.as_ref())?;
            let speech = encode_speech(&streams.audio[v], &config.speech, &config.windows)?;
            Ok((pose.video_id.clone(), kin.ids, aus.vectors, speech.vectors))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = EncodedCorpus {
        k: codebook.k(),
        ..Default::default()
    };
    for (id, kin, au, sp) in encoded {
        out.kinemes.insert(id.clone(), kin);
        out.aus.insert(id.clone(), au);
        out.speech.insert(id, sp);
    }
    Ok(out)
}

impl EncodedCorpus {
    pub fn video_ids(&self) -> Vec<String> {
        self.kinemes.keys().cloned().collect()
    }

    pub fn symbols(&self) -> SymbolSequences {
        SymbolSequences {
            kinemes: self.kinemes.clone(),
            aus: self.aus.clone(),
        }
    }

    /// Aligned records for every video present in all three modalities and
    /// in `labels`. Modalities of unequal window count are truncated to the
    /// shortest, with a warning.
    pub fn records(&self, labels: &TraitLabels) -> Result<Vec<VideoRecord>> {
        let mut out = Vec::new();
        for (id, kin) in &self.kinemes {
            let (Some(au), Some(sp)) = (self.aus.get(id), self.speech.get(id)) else {
                log::warn!("{id}: missing AU or speech windows, skipped");
                continue;
            };
            let Some(score) = labels.score(id) else {
                log::warn!("{id}: no {} label, skipped", labels.trait_name);
                continue;
            };
            let n = kin.len().min(au.len()).min(sp.len());
            if n != kin.len() || n != au.len() || n != sp.len() {
                log::warn!(
                    "{id}: {} kineme, {} AU, {} speech windows; truncated to {n}",
                    kin.len(),
                    au.len(),
                    sp.len()
                );
            }
            if let Some(&bad) = kin[..n].iter().find(|&&j| j >= self.k) {
                return Err(Error::Config(format!("{id}: kineme id {bad} outside K = {}", self.k)));
            }
            let one_hot = kin[..n]
                .iter()
                .map(|&j| {
                    let mut v = vec![0.0; self.k];
                    v[j] = 1.0;
                    v
                })
                .collect();
            let bits = au[..n].iter().map(|b| b.iter().map(|&x| x as f64).collect()).collect();
            out.push(VideoRecord::new(id.clone(), one_hot, bits, sp[..n].to_vec(), score)?);
        }
        if out.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no video has all modalities and a {} label",
                labels.trait_name
            )));
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------- formats

#[derive(Serialize, Deserialize)]
struct KinemeRow {
    video_id: String,
    window: usize,
    kineme_id: usize,
}

#[derive(Serialize, Deserialize)]
struct AuRow {
    video_id: String,
    window: usize,
    au_bits: String,
}

fn check_order(id: &str, window: usize, expected: usize, path: &Path) -> Result<()> {
    if window != expected {
        return Err(Error::Schema(format!(
            "{}: {id} window {window} out of order (expected {expected})",
            path.display()
        )));
    }
    Ok(())
}

/// `video_id,window,kineme_id`
pub fn write_kinemes(path: &Path, kinemes: &BTreeMap<String, Vec<usize>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (id, ids) in kinemes {
        for (window, &kineme_id) in ids.iter().enumerate() {
            w.serialize(KinemeRow {
                video_id: id.clone(),
                window,
                kineme_id,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_kinemes(path: &Path) -> Result<BTreeMap<String, Vec<usize>>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for row in csv::Reader::from_path(path)?.deserialize() {
        let r: KinemeRow = row?;
        let seq = out.entry(r.video_id.clone()).or_default();
        check_order(&r.video_id, r.window, seq.len(), path)?;
        seq.push(r.kineme_id);
    }
    Ok(out)
}

/// `video_id,window,au_bits` with one `0`/`1` character per AU.
pub fn write_aus(path: &Path, aus: &BTreeMap<String, Vec<[u8; N_AUS]>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (id, vectors) in aus {
        for (window, v) in vectors.iter().enumerate() {
            w.serialize(AuRow {
                video_id: id.clone(),
                window,
                au_bits: v.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect(),
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_aus(path: &Path) -> Result<BTreeMap<String, Vec<[u8; N_AUS]>>> {
    let mut out: BTreeMap<String, Vec<[u8; N_AUS]>> = BTreeMap::new();
    for (i, row) in csv::Reader::from_path(path)?.deserialize().enumerate() {
        let r: AuRow = row?;
        let bits: Vec<u8> = r
            .au_bits
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::Parse {
                    row: i + 1,
                    message: format!("au_bits `{}` is not a 0/1 string", r.au_bits),
                }),
            })
            .collect::<Result<_>>()?;
        let v: [u8; N_AUS] = bits.try_into().map_err(|_| Error::Parse {
            row: i + 1,
            message: format!("au_bits `{}` does not have {N_AUS} characters", r.au_bits),
        })?;
        let seq = out.entry(r.video_id.clone()).or_default();
        check_order(&r.video_id, r.window, seq.len(), path)?;
        seq.push(v);
    }
    Ok(out)
}

/// `video_id,window,f0,voicing,zcr,mfcc1..mfcc20`
pub fn write_speech(path: &Path, speech: &BTreeMap<String, Vec<Vec<f64>>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["video_id".to_string(), "window".to_string()];
    header.extend(speech_feature_names());
    w.write_record(&header)?;
    for (id, vectors) in speech {
        for (window, v) in vectors.iter().enumerate() {
            let mut rec = vec![id.clone(), window.to_string()];
            rec.extend(v.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_speech(path: &Path) -> Result<BTreeMap<String, Vec<Vec<f64>>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() != 2 + SPEECH_DIM {
        return Err(Error::Schema(format!(
            "{}: {} columns, expected {}",
            path.display(),
            headers.len(),
            2 + SPEECH_DIM
        )));
    }
    let mut out: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            rec[c].trim().parse().map_err(|_| Error::Parse {
                row: i + 1,
                message: format!("`{}` is not a number", &rec[c]),
            })
        };
        let id = rec[0].to_string();
        let window = num(1)? as usize;
        let v = (2..2 + SPEECH_DIM).map(num).collect::<Result<Vec<_>>>()?;
        let seq = out.entry(id.clone()).or_default();
        check_order(&id, window, seq.len(), path)?;
        seq.push(v);
    }
    Ok(out)
}

/// `id,video_id,pred,target`
pub fn write_predictions(path: &Path, preds: &[Prediction]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in preds {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    csv::Reader::from_path(path)?
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct TargetRow {
    id: String,
    target: f64,
}

/// `id,target`
pub fn read_targets(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for row in csv::Reader::from_path(path)?.deserialize() {
        let r: TargetRow = row?;
        if out.insert(r.id.clone(), r.target).is_some() {
            return Err(Error::Schema(format!("{}: duplicate id {}", path.display(), r.id)));
        }
    }
    Ok(out)
}

pub fn write_targets(path: &Path, targets: &BTreeMap<String, f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (id, &target) in targets {
        w.serialize(TargetRow { id: id.clone(), target })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
