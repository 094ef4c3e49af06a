use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::chunks::{make_chunks, SliceSpec, VideoRecord};
use super::cv::{ChunkAttention, ModelSpec, Prediction};
use super::labels::dichotomize;
use crate::error::{Error, Result};
use crate::fusion::{AlignedSample, FusionModel};
use crate::neural::{train, History};
use crate::numeric::{derive_seed, seeded_rng};
use crate::speech::NormStats;

/// One model trained on a random video-level train/validation split.
#[derive(Debug, Clone)]
pub struct HoldoutRun {
    pub model: FusionModel,
    pub history: History,
    pub norm: NormStats,
    /// Median of the scores of all videos, used to dichotomize.
    pub median: f64,
    pub train_videos: Vec<String>,
    pub val_videos: Vec<String>,
    /// Chunk-level predictions on the validation videos.
    pub val_preds: Vec<Prediction>,
    /// Attention traces over every chunk, for attention architectures.
    pub traces: Option<Vec<ChunkAttention>>,
}

/// Trains on all videos except a `val_fraction` hold-out (at least one video)
/// used for early stopping. Speech normalization is fitted on the training
/// videos.
pub fn train_holdout(
    videos: &[VideoRecord],
    spec: &ModelSpec,
    slice: &SliceSpec,
    val_fraction: f64,
    seed: u64,
) -> Result<HoldoutRun> {
    let n = videos.len();
    let n_val = ((val_fraction * n as f64).round() as usize).max(1);
    if n < n_val + 2 {
        return Err(Error::InsufficientData(format!(
            "{n} videos leave fewer than two for training after a {n_val}-video hold-out"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed, 41));
    let mut val = order[..n_val].to_vec();
    let mut tr = order[n_val..].to_vec();
    val.sort_unstable();
    tr.sort_unstable();

    let scores: Vec<f64> = videos.iter().map(|v| v.score).collect();
    let all: Vec<usize> = (0..n).collect();
    let (median, labels) = dichotomize(&scores, &all)?;
    let norm = NormStats::fit(tr.iter().flat_map(|&i| videos[i].speech.iter()))?;
    let set = make_chunks(videos, slice)?;
    let samples = set.samples(videos, &labels, Some(&norm));
    let task = spec.task;
    let pick = |idx: &[usize]| -> Vec<(AlignedSample, f64)> {
        samples
            .iter()
            .zip(&set.chunks)
            .filter(|(_, c)| idx.binary_search(&c.video_index).is_ok())
            .map(|(s, _)| (s.clone(), s.target(task)))
            .collect()
    };
    let train_set = pick(&tr);
    let val_set = pick(&val);
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InsufficientData("no chunks to train or validate on".into()));
    }
    let model = FusionModel::new(
        spec.arch,
        task,
        train_set[0].0.input_dims(),
        spec.hidden,
        derive_seed(seed, &[1]),
    )
    .with_seq_len(set.windows_per_chunk);
    let (model, history) = train(model, &train_set, &val_set, &spec.train_config(derive_seed(seed, &[2])))?;

    let val_preds = val_set
        .par_iter()
        .map(|(s, t)| {
            Ok(Prediction {
                id: s.id.clone(),
                video_id: s.video_id.clone(),
                pred: model.predict_with_attention(s)?.0,
                target: *t,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let traces = if spec.arch.is_attention() {
        Some(
            samples
                .par_iter()
                .map(|s| {
                    Ok(ChunkAttention {
                        chunk_id: s.id.clone(),
                        video_id: s.video_id.clone(),
                        weights: model.predict_with_attention(s)?.1.unwrap_or_default(),
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let ids = |idx: &[usize]| idx.iter().map(|&i| videos[i].video_id.clone()).collect();
    Ok(HoldoutRun {
        model,
        history,
        norm,
        median,
        train_videos: ids(&tr),
        val_videos: ids(&val),
        val_preds,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Task;
    use crate::fusion::Arch;
    use crate::neural::TrainConfig;

    fn videos() -> Vec<VideoRecord> {
        (0..10)
            .map(|v| {
                let kin = (0..6)
                    .map(|w| {
                        if (w + v) % 2 == 0 {
                            vec![1.0, 0.0]
                        } else {
                            vec![0.0, 1.0]
                        }
                    })
                    .collect();
                let au = vec![vec![0.0; 17]; 6];
                let sp = (0..6).map(|w| vec![(w * v) as f64; 23]).collect();
                VideoRecord::new(format!("v{v}"), kin, au, sp, v as f64 / 10.0).unwrap()
            })
            .collect()
    }

    fn spec(arch: Arch) -> ModelSpec {
        ModelSpec {
            hidden: 3,
            train: TrainConfig {
                max_epochs: 3,
                ..Default::default()
            },
            ..ModelSpec::new(arch, Task::Reg)
        }
    }

    #[test]
    fn split_is_disjoint_and_deterministic() {
        let v = videos();
        let a = train_holdout(&v, &spec(Arch::Kin), &SliceSpec::new(3.0), 0.2, 5).unwrap();
        let b = train_holdout(&v, &spec(Arch::Kin), &SliceSpec::new(3.0), 0.2, 5).unwrap();
        assert_eq!(a.val_videos.len(), 2);
        assert_eq!(a.train_videos.len(), 8);
        assert!(a.val_videos.iter().all(|x| !a.train_videos.contains(x)));
        assert_eq!(a.model, b.model);
        assert_eq!(a.val_preds, b.val_preds);
        assert!(a.traces.is_none());
        assert!(a.val_preds.iter().all(|p| a.val_videos.contains(&p.video_id)));
    }

    #[test]
    fn attention_traces_cover_every_chunk() {
        let v = videos();
        let run = train_holdout(&v, &spec(Arch::AfTri), &SliceSpec::new(3.0), 0.2, 5).unwrap();
        let traces = run.traces.unwrap();
        assert_eq!(traces.len(), 10 * 2);
        for t in &traces {
            assert_eq!(t.weights.len(), 2);
            for w in &t.weights {
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn too_few_videos() {
        let v = videos();
        assert!(train_holdout(&v[..2], &spec(Arch::Kin), &SliceSpec::new(3.0), 0.1, 1).is_err());
    }
}
