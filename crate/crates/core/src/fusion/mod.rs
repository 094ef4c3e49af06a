//! Unimodal, feature-fusion, attention-fusion and decision-fusion models over
//! aligned kineme / AU / speech window sequences.

mod decision;
mod model;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use decision::{
    decision_fuse, fused_scores, grid_score, simplex_grid, DecisionFusionWeights, SelectionMetric, TIE_TOLERANCE,
};
pub use model::{AttentionBlock, AttentionWeights, FusionModel, ATTENTION_FC, CHECKPOINT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Kineme,
    Au,
    Speech,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Kineme, Modality::Au, Modality::Speech];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Kineme => "kineme",
            Modality::Au => "au",
            Modality::Speech => "speech",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arch {
    #[serde(rename = "kin")]
    Kin,
    #[serde(rename = "au")]
    Au,
    #[serde(rename = "aud")]
    Aud,
    #[serde(rename = "ff-kin-au")]
    FfKinAu,
    #[serde(rename = "ff-kin-aud")]
    FfKinAud,
    #[serde(rename = "ff-au-aud")]
    FfAuAud,
    #[serde(rename = "ff-tri")]
    FfTri,
    #[serde(rename = "af-tri")]
    AfTri,
}

impl Arch {
    pub const ALL: [Arch; 8] = [
        Arch::Kin,
        Arch::Au,
        Arch::Aud,
        Arch::FfKinAu,
        Arch::FfKinAud,
        Arch::FfAuAud,
        Arch::FfTri,
        Arch::AfTri,
    ];

    pub fn modalities(self) -> Vec<Modality> {
        use Modality::*;
        match self {
            Arch::Kin => vec![Kineme],
            Arch::Au => vec![Au],
            Arch::Aud => vec![Speech],
            Arch::FfKinAu => vec![Kineme, Au],
            Arch::FfKinAud => vec![Kineme, Speech],
            Arch::FfAuAud => vec![Au, Speech],
            Arch::FfTri | Arch::AfTri => vec![Kineme, Au, Speech],
        }
    }

    pub fn is_attention(self) -> bool {
        self == Arch::AfTri
    }

    pub fn is_unimodal(self) -> bool {
        self.modalities().len() == 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Arch::Kin => "kin",
            Arch::Au => "au",
            Arch::Aud => "aud",
            Arch::FfKinAu => "ff-kin-au",
            Arch::FfKinAud => "ff-kin-aud",
            Arch::FfAuAud => "ff-au-aud",
            Arch::FfTri => "ff-tri",
            Arch::AfTri => "af-tri",
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture `{s}`")))
    }
}

/// One training/evaluation item: the three modality sequences over the same
/// `L` windows plus its targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSample {
    /// Chunk identifier (equal to `video_id` for whole-video samples).
    pub id: String,
    pub video_id: String,
    pub kineme: Vec<Vec<f64>>,
    pub au: Vec<Vec<f64>>,
    pub speech: Vec<Vec<f64>>,
    /// Continuous trait score in [0, 1].
    pub score: f64,
    /// Binary label derived from the score.
    pub label: f64,
}

impl AlignedSample {
    pub fn modality(&self, m: Modality) -> &Vec<Vec<f64>> {
        match m {
            Modality::Kineme => &self.kineme,
            Modality::Au => &self.au,
            Modality::Speech => &self.speech,
        }
    }

    pub fn len(&self) -> usize {
        self.kineme.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kineme.is_empty()
    }

    pub fn target(&self, task: crate::eval::Task) -> f64 {
        match task {
            crate::eval::Task::Cls => self.label,
            crate::eval::Task::Reg => self.score,
        }
    }

    pub fn input_dims(&self) -> [usize; 3] {
        let d = |s: &Vec<Vec<f64>>| s.first().map_or(0, |r| r.len());
        [d(&self.kineme), d(&self.au), d(&self.speech)]
    }
}
