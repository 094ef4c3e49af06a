use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chunks::{SliceSpec, VideoRecord};
use super::cv::{cross_validate, CvConfig, CvReport, ModelSpec, Summary};
use super::metrics::Task;
use crate::error::{Error, Result};
use crate::plot::{line_chart, Series};

/// One line of `report.csv`. `level` is `chunk` or `video` for statistics over
/// folds x repeats, and `chunk-pooled` / `video-pooled` for metrics over the
/// pooled out-of-fold predictions (statistics over repeats). `std` belongs to
/// the task's primary metric (accuracy or PCC).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub arch: String,
    pub slice_s: f64,
    pub level: String,
    pub acc: f64,
    pub f1: f64,
    pub pcc: f64,
    pub mae: f64,
    pub n: usize,
    pub std: f64,
}

fn row(trait_name: &str, report: &CvReport, level: &str, s: &Summary) -> ReportRow {
    ReportRow {
        trait_name: trait_name.to_string(),
        arch: report.spec.arch.to_string(),
        slice_s: report.config.slice.slice_len_s,
        level: level.to_string(),
        acc: s.acc.mean,
        f1: s.f1.mean,
        pcc: s.pcc.mean,
        mae: s.mae.mean,
        n: s.n,
        std: s.primary(report.spec.task).std,
    }
}

/// The four report rows of one cross-validation run.
pub fn report_rows(trait_name: &str, report: &CvReport) -> Vec<ReportRow> {
    vec![
        row(trait_name, report, "chunk", &report.chunk.folds),
        row(trait_name, report, "video", &report.video.folds),
        row(trait_name, report, "chunk-pooled", &report.chunk.pooled),
        row(trait_name, report, "video-pooled", &report.video.pooled),
    ]
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub trait_name: String,
    pub reports: Vec<CvReport>,
}

impl SweepResult {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.reports
            .iter()
            .flat_map(|r| report_rows(&self.trait_name, r))
            .collect()
    }

    /// Chunk- and video-level curves of the primary metric against slice
    /// length, using fold statistics.
    pub fn curves_svg(&self) -> String {
        let task = self.reports.first().map_or(Task::Reg, |r| r.spec.task);
        let curve = |name: &str, pick: fn(&CvReport) -> &Summary| Series {
            name: name.to_string(),
            points: self
                .reports
                .iter()
                .map(|r| (r.config.slice.slice_len_s, pick(r).primary(task).mean))
                .collect(),
        };
        let metric = match task {
            Task::Cls => "accuracy",
            Task::Reg => "PCC",
        };
        line_chart(
            &format!("{}: chunk vs video level", self.trait_name),
            "slice length (s)",
            metric,
            &[curve("chunk", |r| &r.chunk.folds), curve("video", |r| &r.video.folds)],
        )
    }
}

/// Chunk and video curves of several sweeps in one chart, one pair per
/// trait and architecture.
pub fn combined_curves_svg(results: &[SweepResult]) -> String {
    if let [single] = results {
        return single.curves_svg();
    }
    let task = results
        .iter()
        .find_map(|r| r.reports.first())
        .map_or(Task::Reg, |r| r.spec.task);
    let mut series = Vec::new();
    for res in results {
        let arch = res.reports.first().map_or(String::new(), |r| r.spec.arch.to_string());
        for (level, pick) in [("chunk", 0), ("video", 1)] {
            series.push(Series {
                name: format!("{} {arch} {level}", res.trait_name),
                points: res
                    .reports
                    .iter()
                    .map(|r| {
                        let s = if pick == 0 { &r.chunk.folds } else { &r.video.folds };
                        (r.config.slice.slice_len_s, s.primary(task).mean)
                    })
                    .collect(),
            });
        }
    }
    let metric = match task {
        Task::Cls => "accuracy",
        Task::Reg => "PCC",
    };
    line_chart("Chunk vs video level", "slice length (s)", metric, &series)
}

/// Cross-validates once per slice length (every slice at least one window).
pub fn sweep_slices(
    trait_name: &str,
    videos: &[VideoRecord],
    spec: &ModelSpec,
    config: &CvConfig,
    slices_s: &[f64],
) -> Result<SweepResult> {
    let mut reports = Vec::with_capacity(slices_s.len());
    for &s in slices_s {
        if s < config.slice.windows.window_len_s {
            return Err(Error::Config(format!(
                "slice {s} s is shorter than the {} s window",
                config.slice.windows.window_len_s
            )));
        }
        let cfg = CvConfig {
            slice: SliceSpec {
                slice_len_s: s,
                ..config.slice
            },
            ..*config
        };
        log::info!("{trait_name}: {} with {s} s slices", spec.arch);
        reports.push(cross_validate(videos, spec, &cfg)?);
    }
    Ok(SweepResult {
        trait_name: trait_name.to_string(),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Task;
    use crate::fusion::Arch;
    use crate::neural::TrainConfig;

    fn videos() -> Vec<VideoRecord> {
        (0..8)
            .map(|v| {
                let s = v as f64 / 8.0;
                let kin = (0..14)
                    .map(|w| {
                        if (w * 8 + v) % 8 < v {
                            vec![1.0, 0.0]
                        } else {
                            vec![0.0, 1.0]
                        }
                    })
                    .collect();
                let au = vec![vec![0.0; 17]; 14];
                let sp = (0..14).map(|w| vec![(w + v) as f64; 23]).collect();
                VideoRecord::new(format!("v{v}"), kin, au, sp, s).unwrap()
            })
            .collect()
    }

    #[test]
    fn four_slices_four_row_groups() {
        let spec = ModelSpec {
            hidden: 3,
            train: TrainConfig {
                max_epochs: 2,
                ..Default::default()
            },
            ..ModelSpec::new(Arch::Kin, Task::Reg)
        };
        let cfg = CvConfig {
            folds: 4,
            repeats: 1,
            ..Default::default()
        };
        let res = sweep_slices("E", &videos(), &spec, &cfg, &[2.0, 3.0, 5.0, 7.0]).unwrap();
        assert_eq!(res.reports.len(), 4);
        let rows = res.rows();
        assert_eq!(rows.len(), 16);
        for slice in [2.0, 3.0, 5.0, 7.0] {
            for level in ["chunk", "video"] {
                let r = rows.iter().find(|r| r.slice_s == slice && r.level == level).unwrap();
                assert!(r.n > 0 && r.acc.is_finite());
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        write_report_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("trait,arch,slice_s,level,acc,f1,pcc,mae,n,std"));
        assert_eq!(res.curves_svg().matches("<polyline").count(), 2);
    }

    #[test]
    fn slice_below_window_rejected() {
        let spec = ModelSpec::new(Arch::Kin, Task::Reg);
        let r = sweep_slices("E", &videos(), &spec, &CvConfig::default(), &[1.0]);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
