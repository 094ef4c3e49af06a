use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chunks::{make_chunks, ChunkSet, SliceSpec, VideoRecord};
use super::labels::dichotomize;
use super::metrics::{compute_metrics, Metrics, Task, CLS_THRESHOLD};
use crate::error::{Error, Result};
use crate::fusion::{AlignedSample, Arch, AttentionWeights, FusionModel};
use crate::neural::{train, History, Loss, TrainConfig};
use crate::numeric::{derive_seed, seeded_rng};
use crate::speech::NormStats;

/// Video-level prediction from its chunk predictions: majority vote of
/// thresholded scores (ties go to 1) or the mean score.
pub fn aggregate_video(chunk_preds: &[f64], task: Task) -> Result<f64> {
    if chunk_preds.is_empty() {
        return Err(Error::InsufficientData("video has no chunk predictions".into()));
    }
    Ok(match task {
        Task::Cls => {
            let pos = chunk_preds.iter().filter(|&&p| p >= CLS_THRESHOLD).count();
            if 2 * pos >= chunk_preds.len() {
                1.0
            } else {
                0.0
            }
        }
        Task::Reg => chunk_preds.iter().sum::<f64>() / chunk_preds.len() as f64,
    })
}

/// Shuffles video indices with `seed` and deals them round-robin into folds.
pub fn fold_assignment(n_videos: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if n_videos < folds {
        return Err(Error::Config(format!("{n_videos} videos cannot fill {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n_videos).collect();
    order.shuffle(&mut seeded_rng(seed, 31));
    let mut out = vec![Vec::new(); folds];
    for (pos, v) in order.into_iter().enumerate() {
        out[pos % folds].push(v);
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    pub task: Task,
    pub hidden: usize,
    pub train: TrainConfig,
}

impl ModelSpec {
    pub fn new(arch: Arch, task: Task) -> Self {
        ModelSpec {
            arch,
            task,
            hidden: 32,
            train: TrainConfig::default(),
        }
    }

    /// Training settings with the loss that matches the task.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            loss: match self.task {
                Task::Cls => Loss::Bce,
                Task::Reg => Loss::Mae,
            },
            seed,
            ..self.train
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Share of the non-test videos held out for early stopping (at least one).
    pub val_fraction: f64,
    pub slice: SliceSpec,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            repeats: 5,
            seed: 7,
            val_fraction: 0.1,
            slice: SliceSpec::new(15.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub video_id: String,
    pub pred: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkAttention {
    pub chunk_id: String,
    pub video_id: String,
    pub weights: Vec<AttentionWeights>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub test_videos: Vec<String>,
    pub chunk: Metrics,
    pub video: Metrics,
    pub chunk_preds: Vec<Prediction>,
    pub video_preds: Vec<Prediction>,
    pub attention: Option<Vec<ChunkAttention>>,
    pub history: History,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        if values.is_empty() {
            return Stat::default();
        }
        Stat {
            mean: crate::numeric::mean(values),
            std: crate::numeric::variance(values).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub acc: Stat,
    pub f1: Stat,
    pub pcc: Stat,
    pub mae: Stat,
    /// Scored items per repeat.
    pub n: usize,
}

impl Summary {
    fn of(metrics: &[Metrics], n: usize) -> Summary {
        let pick = |f: fn(&Metrics) -> f64| Stat::of(&metrics.iter().map(f).collect::<Vec<_>>());
        Summary {
            acc: pick(|m| m.acc),
            f1: pick(|m| m.f1),
            pcc: pick(|m| m.pcc),
            mae: pick(|m| m.mae),
            n,
        }
    }

    /// Accuracy for classification, PCC for regression.
    pub fn primary(&self, task: Task) -> Stat {
        match task {
            Task::Cls => self.acc,
            Task::Reg => self.pcc,
        }
    }
}

/// `folds`: statistics over the per-fold metrics of every repeat.
/// `pooled`: metrics over all out-of-fold predictions of a repeat,
/// statistics over repeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub folds: Summary,
    pub pooled: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub spec: ModelSpec,
    pub config: CvConfig,
    pub windows_per_chunk: usize,
    pub runs: Vec<FoldResult>,
    pub chunk: LevelSummary,
    pub video: LevelSummary,
}

impl CvReport {
    /// Attention traces of every run, grouped by run.
    pub fn attention_runs(&self) -> Vec<Vec<ChunkAttention>> {
        self.runs.iter().filter_map(|r| r.attention.clone()).collect()
    }
}

struct Split {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

fn split_for(folds: &[Vec<usize>], f: usize, val_fraction: f64, seed: u64) -> Result<Split> {
    let mut rest: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|&(g, _)| g != f)
        .flat_map(|(_, v)| v.iter().copied())
        .collect();
    rest.sort_unstable();
    rest.shuffle(&mut seeded_rng(seed, 37));
    let n_val = ((val_fraction * rest.len() as f64).round() as usize).max(1);
    if rest.len() < n_val + 2 {
        return Err(Error::InsufficientData(format!(
            "{} training videos leave fewer than two after validation hold-out",
            rest.len()
        )));
    }
    let mut val = rest[..n_val].to_vec();
    let mut train = rest[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok(Split {
        train,
        val,
        test: folds[f].clone(),
    })
}

fn select(samples: &[AlignedSample], set: &ChunkSet, videos: &[usize]) -> Vec<AlignedSample> {
    samples
        .iter()
        .zip(&set.chunks)
        .filter(|(_, c)| videos.binary_search(&c.video_index).is_ok())
        .map(|(s, _)| s.clone())
        .collect()
}

fn run_fold(
    videos: &[VideoRecord],
    spec: &ModelSpec,
    config: &CvConfig,
    set: &ChunkSet,
    folds: &[Vec<usize>],
    repeat: usize,
    fold: usize,
) -> Result<FoldResult> {
    let run_seed = derive_seed(config.seed, &[repeat as u64, fold as u64]);
    let split = split_for(folds, fold, config.val_fraction, run_seed)?;
    let scores: Vec<f64> = videos.iter().map(|v| v.score).collect();
    let mut fit_idx: Vec<usize> = split.train.iter().chain(&split.val).copied().collect();
    fit_idx.sort_unstable();
    let (_, labels) = dichotomize(&scores, &fit_idx)?;
    let norm = NormStats::fit(split.train.iter().flat_map(|&i| videos[i].speech.iter()))?;
    let samples = set.samples(videos, &labels, Some(&norm));

    let task = spec.task;
    let pairs = |idx: &[usize]| -> Vec<(AlignedSample, f64)> {
        select(&samples, set, idx)
            .into_iter()
            .map(|s| {
                let t = s.target(task);
                (s, t)
            })
            .collect()
    };
    let train_set = pairs(&split.train);
    let val_set = pairs(&split.val);
    let test_set = select(&samples, set, &split.test);
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::InsufficientData(format!(
            "repeat {repeat} fold {fold}: no chunks to train or test on"
        )));
    }
    let dims = train_set[0].0.input_dims();
    let model = FusionModel::new(spec.arch, task, dims, spec.hidden, derive_seed(run_seed, &[1]))
        .with_seq_len(set.windows_per_chunk);
    let (model, history) = train(
        model,
        &train_set,
        &val_set,
        &spec.train_config(derive_seed(run_seed, &[2])),
    )?;

    let outputs = test_set
        .par_iter()
        .map(|s| model.predict_with_attention(s))
        .collect::<Result<Vec<_>>>()?;
    let chunk_preds: Vec<Prediction> = test_set
        .iter()
        .zip(&outputs)
        .map(|(s, (y, _))| Prediction {
            id: s.id.clone(),
            video_id: s.video_id.clone(),
            pred: *y,
            target: s.target(task),
        })
        .collect();
    let attention = spec.arch.is_attention().then(|| {
        test_set
            .iter()
            .zip(&outputs)
            .map(|(s, (_, w))| ChunkAttention {
                chunk_id: s.id.clone(),
                video_id: s.video_id.clone(),
                weights: w.clone().unwrap_or_default(),
            })
            .collect()
    });

    let mut by_video: BTreeMap<&str, (Vec<f64>, f64)> = BTreeMap::new();
    for p in &chunk_preds {
        by_video
            .entry(&p.video_id)
            .or_insert_with(|| (Vec::new(), p.target))
            .0
            .push(p.pred);
    }
    let video_preds = by_video
        .into_iter()
        .map(|(vid, (preds, target))| {
            Ok(Prediction {
                id: vid.to_string(),
                video_id: vid.to_string(),
                pred: aggregate_video(&preds, task)?,
                target,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let metrics = |p: &[Prediction]| {
        let (x, y): (Vec<f64>, Vec<f64>) = p.iter().map(|p| (p.pred, p.target)).unzip();
        compute_metrics(&x, &y, task)
    };
    Ok(FoldResult {
        repeat,
        fold,
        test_videos: split.test.iter().map(|&i| videos[i].video_id.clone()).collect(),
        chunk: metrics(&chunk_preds)?,
        video: metrics(&video_preds)?,
        chunk_preds,
        video_preds,
        attention,
        history,
    })
}

fn summarize(
    runs: &[FoldResult],
    repeats: usize,
    task: Task,
    level: fn(&FoldResult) -> (&Metrics, &[Prediction]),
) -> Result<LevelSummary> {
    let fold_metrics: Vec<Metrics> = runs.iter().map(|r| *level(r).0).collect();
    let n_items: usize = runs.iter().map(|r| level(r).1.len()).sum::<usize>() / repeats.max(1);
    let pooled = (0..repeats)
        .map(|rep| {
            let (x, y): (Vec<f64>, Vec<f64>) = runs
                .iter()
                .filter(|r| r.repeat == rep)
                .flat_map(|r| level(r).1.iter().map(|p| (p.pred, p.target)))
                .unzip();
            compute_metrics(&x, &y, task)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LevelSummary {
        folds: Summary::of(&fold_metrics, n_items),
        pooled: Summary::of(&pooled, n_items),
    })
}

/// Grouped k-fold cross-validation with repeats. Every chunk of a video lands
/// in the same fold; labels, speech normalization and early stopping use
/// training videos only. Runs execute in parallel with seeds derived from
/// `(seed, repeat, fold)` and are merged in run order.
pub fn cross_validate(videos: &[VideoRecord], spec: &ModelSpec, config: &CvConfig) -> Result<CvReport> {
    if config.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let set = make_chunks(videos, &config.slice)?;
    let assignments = (0..config.repeats)
        .map(|r| fold_assignment(videos.len(), config.folds, derive_seed(config.seed, &[r as u64])))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..config.repeats)
        .flat_map(|r| (0..config.folds).map(move |f| (r, f)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(r, f)| run_fold(videos, spec, config, &set, &assignments[r], r, f))
        .collect::<Result<Vec<_>>>()?;
    let chunk = summarize(&runs, config.repeats, spec.task, |r| (&r.chunk, &r.chunk_preds))?;
    let video = summarize(&runs, config.repeats, spec.task, |r| (&r.video, &r.video_preds))?;
    Ok(CvReport {
        spec: *spec,
        config: *config,
        windows_per_chunk: set.windows_per_chunk,
        runs,
        chunk,
        video,
    })
}
