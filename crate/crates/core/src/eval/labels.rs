use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::median;

/// Continuous per-video scores of one trait.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraitLabels {
    pub trait_name: String,
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    video_id: String,
    #[serde(rename = "trait")]
    trait_name: String,
    score: f64,
}

impl TraitLabels {
    pub fn score(&self, video_id: &str) -> Option<f64> {
        self.scores.get(video_id).copied()
    }
}

/// Reads `video_id,trait,score` rows grouped by trait.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, TraitLabels>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema(format!("{}: {other:?}", path.display())),
    })?;
    let mut out: BTreeMap<String, TraitLabels> = BTreeMap::new();
    for (i, row) in reader.deserialize::<LabelRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            row: i + 2,
            message: e.to_string(),
        })?;
        if !row.score.is_finite() {
            return Err(Error::Parse {
                row: i + 2,
                message: format!("non-finite score for {}", row.video_id),
            });
        }
        let entry = out.entry(row.trait_name.clone()).or_insert_with(|| TraitLabels {
            trait_name: row.trait_name.clone(),
            scores: BTreeMap::new(),
        });
        entry.scores.insert(row.video_id, row.score);
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &[&TraitLabels]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for l in labels {
        for (video_id, &score) in &l.scores {
            w.serialize(LabelRow {
                video_id: video_id.clone(),
                trait_name: l.trait_name.clone(),
                score,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Median of the training scores and the 0/1 label of every score
/// (1 iff score >= median).
pub fn dichotomize(scores: &[f64], train: &[usize]) -> Result<(f64, Vec<u8>)> {
    if train.len() < 2 {
        return Err(Error::InsufficientData(
            "median split needs at least two training videos".into(),
        ));
    }
    let train_scores: Vec<f64> = train.iter().map(|&i| scores[i]).collect();
    let m = median(&train_scores);
    Ok((m, scores.iter().map(|&s| u8::from(s >= m)).collect()))
}
