//! Per-window dominant-AU encoding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AUSeries, WindowPlan, N_AUS};

pub type AuThresholds = [f64; N_AUS];

/// Where the per-AU threshold is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdScope {
    #[default]
    Video,
    Corpus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AUWindowSequence {
    pub video_id: String,
    pub vectors: Vec<[u8; N_AUS]>,
    pub thresholds: AuThresholds,
}

impl AUWindowSequence {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `"0100..."`, one character per AU in column order.
    pub fn bits(&self, window: usize) -> String {
        self.vectors[window]
            .iter()
            .map(|&b| if b == 1 { '1' } else { '0' })
            .collect()
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.vectors
            .iter()
            .map(|v| v.iter().map(|&b| b as f64).collect())
            .collect()
    }
}

/// Mean intensity of every AU over the whole video.
pub fn compute_au_thresholds(series: &AUSeries) -> AuThresholds {
    std::array::from_fn(|a| series.mean_intensity(a))
}

/// Mean intensity of every AU over all frames of all videos.
pub fn corpus_au_thresholds(corpus: &[AUSeries]) -> Result<AuThresholds> {
    let frames: usize = corpus.iter().map(|s| s.len()).sum();
    if frames == 0 {
        return Err(Error::InsufficientData("no AU frames in corpus".into()));
    }
    let mut sums = [0.0; N_AUS];
    for s in corpus {
        for f in s.frames() {
            for a in 0..N_AUS {
                sums[a] += f[a];
            }
        }
    }
    Ok(sums.map(|v| v / frames as f64))
}

/// Bit `a` of window `w` is set iff the window's mean intensity of AU `a` is
/// strictly greater than `thresholds[a]`.
pub fn encode_au_windows(series: &AUSeries, plan: &WindowPlan, thresholds: &AuThresholds) -> Result<AUWindowSequence> {
    if (plan.rate - series.fps).abs() > 1e-9 {
        return Err(Error::Shape(format!(
            "window plan at {} Hz applied to AU stream at {} fps",
            plan.rate, series.fps
        )));
    }
    if let Some(&(_, end)) = plan.boundaries.last() {
        if end > series.len() {
            return Err(Error::Shape(format!(
                "window plan ends at frame {end}, stream has {} frames",
                series.len()
            )));
        }
    }
    let frames = series.frames();
    let vectors = plan
        .boundaries
        .iter()
        .map(|&(start, end)| {
            let n = (end - start) as f64;
            std::array::from_fn(|a| {
                let mean = frames[start..end].iter().map(|f| f[a]).sum::<f64>() / n;
                u8::from(mean > thresholds[a])
            })
        })
        .collect();
    Ok(AUWindowSequence {
        video_id: series.video_id.clone(),
        vectors,
        thresholds: *thresholds,
    })
}

/// Encodes a video with its own thresholds or with corpus thresholds.
pub fn encode_video(
    series: &AUSeries,
    plan: &WindowPlan,
    corpus_thresholds: Option<&AuThresholds>,
) -> Result<AUWindowSequence> {
    match corpus_thresholds {
        Some(t) => encode_au_windows(series, plan, t),
        None => encode_au_windows(series, plan, &compute_au_thresholds(series)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{plan_windows, WindowSpec};
    use proptest::prelude::*;

    fn series_with(au: usize, values: &[f64], fps: f64) -> AUSeries {
        let frames = values
            .iter()
            .map(|&v| {
                let mut f = [0.0; N_AUS];
                f[au] = v;
                f
            })
            .collect();
        AUSeries::new("v", fps, frames, None).unwrap()
    }

    #[test]
    fn thresholds_are_means() {
        let s = series_with(2, &[1.0, 2.0, 3.0], 30.0);
        let t = compute_au_thresholds(&s);
        assert_eq!(t[2], 2.0);
        assert_eq!(t[0], 0.0);
    }

    #[test]
    fn single_frame_threshold_equals_frame() {
        let s = series_with(5, &[3.5], 30.0);
        assert_eq!(compute_au_thresholds(&s)[5], 3.5);
    }

    #[test]
    fn constant_stream_has_no_dominant_aus() {
        let s = series_with(8, &vec![2.5; 450], 30.0);
        let plan = WindowSpec::default().plan(s.len(), 30.0).unwrap();
        let enc = encode_video(&s, &plan, None).unwrap();
        assert_eq!(enc.len(), 14);
        assert!(enc.vectors.iter().all(|v| v.iter().all(|&b| b == 0)));
    }

    #[test]
    fn step_stream_sets_second_half() {
        let mut values = vec![0.0; 60];
        values.extend(vec![4.0; 60]);
        let s = series_with(8, &values, 30.0);
        let plan = plan_windows(120, 30.0, 2.0, 1.0).unwrap();
        let enc = encode_video(&s, &plan, None).unwrap();
        assert_eq!(enc.thresholds[8], 2.0);
        let first = enc.vectors.first().unwrap()[8];
        let last = enc.vectors.last().unwrap()[8];
        assert_eq!((first, last), (0, 1));
        assert_eq!(enc.bits(2), "00000000100000000");
    }

    #[test]
    fn mismatched_plan_is_shape_error() {
        let s = series_with(0, &[1.0; 30], 30.0);
        let plan = plan_windows(120, 30.0, 2.0, 1.0).unwrap();
        assert!(matches!(encode_video(&s, &plan, None), Err(Error::Shape(_))));
    }

    #[test]
    fn corpus_scope_pools_frames() {
        let a = series_with(0, &[1.0; 60], 30.0);
        let b = series_with(0, &[3.0; 60], 30.0);
        let t = corpus_au_thresholds(&[a.clone(), b]).unwrap();
        assert_eq!(t[0], 2.0);
        let plan = plan_windows(60, 30.0, 2.0, 1.0).unwrap();
        assert_eq!(encode_video(&a, &plan, Some(&t)).unwrap().vectors[0][0], 0);
    }

    // Dyadic intensities, 32 fps and 256 frames keep every sum and mean exact,
    // so the invariances hold bit-for-bit.
    fn dyadic_stream() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0u32..16).prop_map(|k| k as f64 / 8.0), 256)
    }

    proptest! {
        #[test]
        fn scale_and_offset_invariance(values in dyadic_stream(), exp in 0u32..2, offset in 0u32..16) {
            let plan = plan_windows(256, 32.0, 2.0, 1.0).unwrap();
            let base = encode_video(&series_with(3, &values, 32.0), &plan, None).unwrap();
            let scale = (1u32 << exp) as f64;
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let shifted: Vec<f64> = values.iter().map(|v| v + offset as f64 / 8.0).collect();
            let a = encode_video(&series_with(3, &scaled, 32.0), &plan, None).unwrap();
            let b = encode_video(&series_with(3, &shifted, 32.0), &plan, None).unwrap();
            prop_assert_eq!(&a.vectors, &base.vectors);
            prop_assert_eq!(&b.vectors, &base.vectors);
        }

        #[test]
        fn outputs_are_binary(values in prop::collection::vec(0.0f64..5.0, 60..200)) {
            let s = series_with(1, &values, 30.0);
            let plan = WindowSpec::default().plan(s.len(), 30.0).unwrap();
            let enc = encode_video(&s, &plan, None).unwrap();
            prop_assert_eq!(enc.len(), plan.n_windows);
            prop_assert!(enc.vectors.iter().all(|v| v.iter().all(|&b| b <= 1)));
        }
    }
}
