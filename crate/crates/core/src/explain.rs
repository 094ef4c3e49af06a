//! Behavioural explanations: dominant kinemes and AUs of the trait extremes,
//! and run-averaged modality attention.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ChunkAttention;
use crate::fusion::Modality;
use crate::ingest::{au_name, N_AUS};
use crate::plot::grouped_bar_chart;

pub const TOP_KINEMES: usize = 4;
pub const TOP_AUS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub high: Vec<String>,
    pub low: Vec<String>,
    pub high_cut: f64,
    pub low_cut: f64,
}

/// Top and bottom `pct` percent of videos by nearest rank: with
/// `k = ceil(pct * n / 100)`, the high band holds every video scoring at least
/// the k-th largest score and the low band every video scoring at most the
/// k-th smallest (ties included).
pub fn percentile_bands(scores: &BTreeMap<String, f64>, pct: f64) -> Result<Bands> {
    if !(pct > 0.0 && pct <= 50.0) {
        return Err(Error::Config(format!("percentile {pct} outside (0, 50]")));
    }
    let n = scores.len();
    let needed = (100.0 / pct - 1e-9).ceil() as usize;
    if n < needed {
        return Err(Error::InsufficientData(format!(
            "{n} videos, a {pct}% band needs at least {needed}"
        )));
    }
    let k = ((pct * n as f64 / 100.0) - 1e-9).ceil().max(1.0) as usize;
    let mut sorted: Vec<f64> = scores.values().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let low_cut = sorted[k - 1];
    let high_cut = sorted[n - k];
    let pick = |keep: &dyn Fn(f64) -> bool| -> Vec<String> {
        scores
            .iter()
            .filter(|(_, &s)| keep(s))
            .map(|(id, _)| id.clone())
            .collect()
    };
    Ok(Bands {
        high: pick(&|s| s >= high_cut),
        low: pick(&|s| s <= low_cut),
        high_cut,
        low_cut,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolCount {
    pub id: usize,
    pub label: String,
    pub count: usize,
    /// `count` over the band's total window count (or video count when
    /// counting per video).
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub band: Band,
    pub n_videos: usize,
    pub n_windows: usize,
    pub per_video: bool,
    pub top_kinemes: Vec<SymbolCount>,
    pub top_aus: Vec<SymbolCount>,
}

/// Kineme ids and AU bits per window for one video.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymbolSequences {
    pub kinemes: BTreeMap<String, Vec<usize>>,
    pub aus: BTreeMap<String, Vec<[u8; N_AUS]>>,
}

fn top(counts: &[usize], n: usize, denom: usize, label: impl Fn(usize) -> String) -> Vec<SymbolCount> {
    let mut idx: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0).collect();
    idx.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx.into_iter()
        .map(|i| SymbolCount {
            id: i,
            label: label(i),
            count: counts[i],
            frequency: counts[i] as f64 / denom.max(1) as f64,
        })
        .collect()
}

/// Window counts of every kineme and AU over the band, top lists sorted by
/// count (ties to the lower id). Symbols never seen are not listed. With
/// `per_video`, a symbol counts at most once per video.
pub fn dominant_symbols(
    trait_name: &str,
    band: Band,
    videos: &[String],
    sequences: &SymbolSequences,
    per_video: bool,
) -> Result<ExplanationReport> {
    let mut kin_counts: Vec<usize> = Vec::new();
    let mut au_counts = [0usize; N_AUS];
    let mut n_windows = 0;
    for v in videos {
        let ids = sequences
            .kinemes
            .get(v)
            .ok_or_else(|| Error::InsufficientData(format!("no kineme sequence for {v}")))?;
        let bits = sequences
            .aus
            .get(v)
            .ok_or_else(|| Error::InsufficientData(format!("no AU sequence for {v}")))?;
        n_windows += ids.len();
        let mut local_kin: BTreeMap<usize, usize> = BTreeMap::new();
        for &id in ids {
            *local_kin.entry(id).or_default() += 1;
        }
        for (id, c) in local_kin {
            if kin_counts.len() <= id {
                kin_counts.resize(id + 1, 0);
            }
            kin_counts[id] += if per_video { 1 } else { c };
        }
        let mut local_au = [0usize; N_AUS];
        for row in bits {
            for (a, &b) in local_au.iter_mut().zip(row) {
                *a += b as usize;
            }
        }
        for (a, l) in au_counts.iter_mut().zip(local_au) {
            *a += if per_video { usize::from(l > 0) } else { l };
        }
    }
    let denom = if per_video { videos.len() } else { n_windows };
    Ok(ExplanationReport {
        trait_name: trait_name.to_string(),
        band,
        n_videos: videos.len(),
        n_windows,
        per_video,
        top_kinemes: top(&kin_counts, TOP_KINEMES, denom, |i| format!("K{i}")),
        top_aus: top(&au_counts, TOP_AUS, denom, au_name),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitExplanation {
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub pct: f64,
    pub bands: Bands,
    pub high: ExplanationReport,
    pub low: ExplanationReport,
}

pub fn explain_trait(
    trait_name: &str,
    scores: &BTreeMap<String, f64>,
    sequences: &SymbolSequences,
    pct: f64,
    per_video: bool,
) -> Result<TraitExplanation> {
    let bands = percentile_bands(scores, pct)?;
    let high = dominant_symbols(trait_name, Band::High, &bands.high, sequences, per_video)?;
    let low = dominant_symbols(trait_name, Band::Low, &bands.low, sequences, per_video)?;
    Ok(TraitExplanation {
        trait_name: trait_name.to_string(),
        pct,
        bands,
        high,
        low,
    })
}

impl TraitExplanation {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    /// Relative frequency of each listed kineme and AU in both bands.
    pub fn svg(&self) -> String {
        let mut labels: Vec<(bool, usize, String)> = Vec::new();
        for r in [&self.high, &self.low] {
            for s in &r.top_kinemes {
                labels.push((false, s.id, s.label.clone()));
            }
            for s in &r.top_aus {
                labels.push((true, s.id, s.label.clone()));
            }
        }
        labels.sort();
        labels.dedup();
        let freq = |r: &ExplanationReport, au: bool, id: usize| {
            let list = if au { &r.top_aus } else { &r.top_kinemes };
            list.iter().find(|s| s.id == id).map_or(0.0, |s| s.frequency)
        };
        let values: Vec<Vec<f64>> = labels
            .iter()
            .map(|(au, id, _)| vec![freq(&self.high, *au, *id), freq(&self.low, *au, *id)])
            .collect();
        let errors = vec![vec![0.0; 2]; labels.len()];
        grouped_bar_chart(
            &format!(
                "{}: dominant kinemes and AUs (top/bottom {}%)",
                self.trait_name, self.pct
            ),
            "frequency",
            &labels.into_iter().map(|l| l.2).collect::<Vec<_>>(),
            &["high".into(), "low".into()],
            &values,
            &errors,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    PerVideo,
    PerChunk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionSummary {
    #[serde(rename = "trait")]
    pub trait_name: String,
    /// `(kineme, au, speech)`
    pub mean: [f64; 3],
    pub std_error: [f64; 3],
    pub runs: usize,
}

fn mean_triple<'a>(rows: impl Iterator<Item = &'a [f64; 3]>) -> Option<[f64; 3]> {
    let mut acc = [0.0; 3];
    let mut n = 0usize;
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
        n += 1;
    }
    (n > 0).then(|| acc.map(|a| a / n as f64))
}

/// Mean of window weights within each item, then over items, then mean and
/// standard error over runs.
pub fn attention_summary(
    trait_name: &str,
    runs: &[Vec<ChunkAttention>],
    grouping: Grouping,
) -> Result<AttentionSummary> {
    if runs.is_empty() {
        return Err(Error::InsufficientData(
            "attention summary needs at least one run".into(),
        ));
    }
    let per_run = runs
        .iter()
        .enumerate()
        .map(|(i, run)| {
            let mut items: BTreeMap<&str, Vec<&[f64; 3]>> = BTreeMap::new();
            for c in run {
                let key = match grouping {
                    Grouping::PerVideo => c.video_id.as_str(),
                    Grouping::PerChunk => c.chunk_id.as_str(),
                };
                items.entry(key).or_default().extend(c.weights.iter());
            }
            let item_means: Vec<[f64; 3]> = items.values().filter_map(|w| mean_triple(w.iter().copied())).collect();
            mean_triple(item_means.iter())
                .ok_or_else(|| Error::InsufficientData(format!("run {i} has no attention windows")))
        })
        .collect::<Result<Vec<[f64; 3]>>>()?;
    let n = per_run.len() as f64;
    let mean = mean_triple(per_run.iter()).expect("non-empty");
    let mut std_error = [0.0; 3];
    if per_run.len() > 1 {
        for m in 0..3 {
            let var = per_run.iter().map(|r| (r[m] - mean[m]).powi(2)).sum::<f64>() / (n - 1.0);
            std_error[m] = (var / n).sqrt();
        }
    }
    Ok(AttentionSummary {
        trait_name: trait_name.to_string(),
        mean,
        std_error,
        runs: per_run.len(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    chunk_id: String,
    window: usize,
    w_kin: f64,
    w_au: f64,
    w_speech: f64,
}

/// Video id of a chunk id of the form `video#index`.
pub fn video_of_chunk(chunk_id: &str) -> &str {
    chunk_id.rsplit_once('#').map_or(chunk_id, |(v, _)| v)
}

/// Writes one run's traces as `chunk_id,window,w_kin,w_au,w_speech`.
pub fn write_traces(path: &Path, traces: &[ChunkAttention]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for c in traces {
        for (window, t) in c.weights.iter().enumerate() {
            w.serialize(TraceRow {
                chunk_id: c.chunk_id.clone(),
                window,
                w_kin: t[0],
                w_au: t[1],
                w_speech: t[2],
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_traces(path: &Path) -> Result<Vec<ChunkAttention>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out: Vec<ChunkAttention> = Vec::new();
    for (i, row) in reader.deserialize::<TraceRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            row: i + 2,
            message: e.to_string(),
        })?;
        let w = [row.w_kin, row.w_au, row.w_speech];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::Parse {
                row: i + 2,
                message: "attention weights are not on the simplex".into(),
            });
        }
        match out.last_mut() {
            Some(c) if c.chunk_id == row.chunk_id => c.weights.push(w),
            _ => out.push(ChunkAttention {
                video_id: video_of_chunk(&row.chunk_id).to_string(),
                chunk_id: row.chunk_id,
                weights: vec![w],
            }),
        }
    }
    Ok(out)
}

pub fn write_attention_csv(path: &Path, summaries: &[AttentionSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["trait", "modality", "mean", "std_error", "runs"])?;
    for s in summaries {
        for m in Modality::ALL {
            w.write_record([
                s.trait_name.clone(),
                m.name().to_string(),
                s.mean[m.index()].to_string(),
                s.std_error[m.index()].to_string(),
                s.runs.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Grouped bars per trait with standard-error whiskers.
pub fn attention_svg(summaries: &[AttentionSummary]) -> String {
    grouped_bar_chart(
        "Mean modality attention",
        "attention weight",
        &summaries.iter().map(|s| s.trait_name.clone()).collect::<Vec<_>>(),
        &Modality::ALL.iter().map(|m| m.name().to_string()).collect::<Vec<_>>(),
        &summaries.iter().map(|s| s.mean.to_vec()).collect::<Vec<_>>(),
        &summaries.iter().map(|s| s.std_error.to_vec()).collect::<Vec<_>>(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scores(values: &[f64]) -> BTreeMap<String, f64> {
        values
            .iter()
            .enumerate()
            .map(|(i, &s)| (format!("v{i:03}"), s))
            .collect()
    }

    #[test]
    fn hundred_distinct_scores() {
        let s: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let b = percentile_bands(&scores(&s), 10.0).unwrap();
        assert_eq!(b.high.len(), 10);
        assert_eq!(b.low.len(), 10);
        assert!(b.low.contains(&"v000".to_string()));
        assert!(b.high.contains(&"v099".to_string()));
    }

    #[test]
    fn ten_videos_one_per_band() {
        let s: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let b = percentile_bands(&scores(&s), 10.0).unwrap();
        assert_eq!(b.high, vec!["v009".to_string()]);
        assert_eq!(b.low, vec!["v000".to_string()]);
    }

    #[test]
    fn ties_at_the_cut_are_included() {
        let mut s: Vec<f64> = (0..20).map(|i| i as f64).collect();
        s[17] = 19.0;
        s[18] = 19.0;
        let b = percentile_bands(&scores(&s), 10.0).unwrap();
        assert_eq!(b.high.len(), 3);
    }

    #[test]
    fn too_few_videos() {
        let s = scores(&[0.1; 9]);
        assert!(matches!(percentile_bands(&s, 10.0), Err(Error::InsufficientData(_))));
    }

    proptest! {
        #[test]
        fn bands_disjoint_for_distinct_scores(n in 21usize..200, seed in any::<u64>()) {
            let mut v: Vec<f64> = (0..n).map(|i| i as f64).collect();
            use rand::seq::SliceRandom;
            v.shuffle(&mut crate::numeric::seeded_rng(seed, 0));
            let b = percentile_bands(&scores(&v), 10.0).unwrap();
            prop_assert!(b.high.iter().all(|h| !b.low.contains(h)));
        }
    }

    fn seqs(kin: &[(&str, Vec<usize>)]) -> SymbolSequences {
        let mut s = SymbolSequences::default();
        for (v, ids) in kin {
            s.kinemes.insert(v.to_string(), ids.clone());
            let mut rows = vec![[0u8; N_AUS]; ids.len()];
            for (w, r) in rows.iter_mut().enumerate() {
                r[2] = 1;
                r[5] = u8::from(w % 2 == 0);
            }
            s.aus.insert(v.to_string(), rows);
        }
        s
    }

    #[test]
    fn constant_kineme_band() {
        let s = seqs(&[("a", vec![2; 14]), ("b", vec![2; 14])]);
        let r = dominant_symbols("E", Band::High, &["a".into(), "b".into()], &s, false).unwrap();
        assert_eq!(r.top_kinemes.len(), 1);
        assert_eq!((r.top_kinemes[0].id, r.top_kinemes[0].count), (2, 28));
        assert_eq!(r.top_aus[0].id, 2);
        assert_eq!(r.top_aus[0].count, 28);
        assert_eq!(r.top_aus[1].count, 14);
        assert_eq!(r.top_aus.len(), 2, "inactive AUs are never listed");
    }

    #[test]
    fn ties_go_to_lower_ids_and_per_video_counting() {
        let s = seqs(&[("a", vec![5, 5, 1, 1, 3]), ("b", vec![7, 7, 7, 7])]);
        let vids = ["a".to_string(), "b".to_string()];
        let r = dominant_symbols("E", Band::Low, &vids, &s, false).unwrap();
        let ids: Vec<usize> = r.top_kinemes.iter().map(|k| k.id).collect();
        assert_eq!(ids, vec![7, 1, 5, 3]);
        let r = dominant_symbols("E", Band::Low, &vids, &s, true).unwrap();
        let ids: Vec<usize> = r.top_kinemes.iter().map(|k| k.id).collect();
        assert_eq!(ids, vec![1, 3, 5, 7]);
        assert!(r.top_kinemes.iter().all(|k| k.count == 1));
    }

    #[test]
    fn counts_ignore_video_order() {
        let s = seqs(&[("a", vec![0, 1, 1]), ("b", vec![2, 2, 1]), ("c", vec![3])]);
        let fwd = ["a", "b", "c"].map(String::from);
        let rev = ["c", "b", "a"].map(String::from);
        let x = dominant_symbols("E", Band::High, &fwd, &s, false).unwrap();
        let y = dominant_symbols("E", Band::High, &rev, &s, false).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn missing_sequence_is_an_error() {
        let s = seqs(&[("a", vec![0])]);
        assert!(dominant_symbols("E", Band::High, &["z".into()], &s, false).is_err());
    }

    fn trace(chunk: &str, w: Vec<[f64; 3]>) -> ChunkAttention {
        ChunkAttention {
            chunk_id: chunk.into(),
            video_id: video_of_chunk(chunk).into(),
            weights: w,
        }
    }

    #[test]
    fn single_window_identity() {
        let runs = vec![vec![trace("v#0", vec![[0.5, 0.3, 0.2]])]];
        let s = attention_summary("E", &runs, Grouping::PerVideo).unwrap();
        assert_eq!(s.mean, [0.5, 0.3, 0.2]);
        assert_eq!(s.std_error, [0.0; 3]);
    }

    #[test]
    fn grouping_changes_item_weights() {
        let run = vec![
            trace("v#0", vec![[1.0, 0.0, 0.0]]),
            trace("v#1", vec![[0.0, 1.0, 0.0]; 3]),
        ];
        let per_chunk = attention_summary("E", &[run.clone()], Grouping::PerChunk).unwrap();
        let per_video = attention_summary("E", &[run], Grouping::PerVideo).unwrap();
        assert_eq!(per_chunk.mean, [0.5, 0.5, 0.0]);
        assert_eq!(per_video.mean, [0.25, 0.75, 0.0]);
    }

    #[test]
    fn standard_error_over_runs() {
        let runs = vec![
            vec![trace("v#0", vec![[0.6, 0.2, 0.2]])],
            vec![trace("v#0", vec![[0.4, 0.4, 0.2]])],
        ];
        let s = attention_summary("E", &runs, Grouping::PerVideo).unwrap();
        assert!((s.mean[0] - 0.5).abs() < 1e-15);
        assert!((s.std_error[0] - 0.1).abs() < 1e-12);
        assert_eq!(s.std_error[2], 0.0);
    }

    proptest! {
        #[test]
        fn summary_stays_on_simplex(raw in prop::collection::vec(prop::collection::vec((0.01f64..1.0, 0.01f64..1.0, 0.01f64..1.0), 1..6), 1..5)) {
            let runs: Vec<Vec<ChunkAttention>> = raw
                .iter()
                .map(|run| {
                    run.iter()
                        .enumerate()
                        .map(|(i, &(a, b, c))| {
                            let s = a + b + c;
                            trace(&format!("v{}#{i}", i % 2), vec![[a / s, b / s, c / s]])
                        })
                        .collect()
                })
                .collect();
            let s = attention_summary("E", &runs, Grouping::PerChunk).unwrap();
            prop_assert!((s.mean.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(s.std_error.iter().all(|&e| e >= 0.0));
        }
    }

    #[test]
    fn traces_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run0.csv");
        let t = vec![
            trace("v1#0", vec![[0.5, 0.25, 0.25], [0.2, 0.3, 0.5]]),
            trace("v2#3", vec![[1.0, 0.0, 0.0]]),
        ];
        write_traces(&path, &t).unwrap();
        assert_eq!(read_traces(&path).unwrap(), t);
    }

    #[test]
    fn explanation_outputs() {
        let sc = scores(&(0..10).map(|i| i as f64).collect::<Vec<_>>());
        let mut s = SymbolSequences::default();
        for (i, v) in sc.keys().enumerate() {
            s.kinemes.insert(v.clone(), vec![i % 3; 5]);
            s.aus.insert(v.clone(), vec![[1; N_AUS]; 5]);
        }
        let e = explain_trait("E", &sc, &s, 10.0, false).unwrap();
        assert_eq!(e.high.top_aus.len(), TOP_AUS);
        assert_eq!(e.high.top_kinemes[0].id, 0);
        assert!(e.svg().contains("K0"));
        let dir = tempfile::tempdir().unwrap();
        e.save_json(&dir.path().join("explain_E.json")).unwrap();
        let a = AttentionSummary {
            trait_name: "E".into(),
            mean: [0.5, 0.3, 0.2],
            std_error: [0.0; 3],
            runs: 1,
        };
        let p = dir.path().join("attention_summary.csv");
        write_attention_csv(&p, &[a.clone()]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 4);
        assert!(attention_svg(&[a]).contains("speech"));
    }
}
