//! Configured thin-slice sweeps: corpus in, `report.csv`, `curves.svg` and
//! attention traces out.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    combined_curves_svg, read_labels, sweep_slices, write_report_csv, CvConfig, ModelSpec, ReportRow, SliceSpec,
    SweepResult, Task, TraitLabels, VideoRecord,
};
use crate::explain::write_traces;
use crate::facial::ThresholdScope;
use crate::fusion::Arch;
use crate::kineme::CodebookConfig;
use crate::neural::TrainConfig;
use crate::pipeline::{
    encode_streams, learn_corpus_codebook, load_streams, read_aus, read_kinemes, read_speech, EncodeConfig,
    EncodedCorpus,
};
use crate::plot::write_svg;

/// Where per-window sequences come from: a raw corpus directory (codebook
/// learned on the fly) or previously encoded CSVs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub corpus: Option<PathBuf>,
    pub kinemes: Option<PathBuf>,
    pub aus: Option<PathBuf>,
    pub speech: Option<PathBuf>,
    /// Defaults to `<corpus>/labels.csv`.
    pub labels: Option<PathBuf>,
    /// Source frame rate of pose and AU CSVs.
    pub fps: Option<f64>,
    /// Kineme vocabulary size for CSV input; defaults to the largest id + 1.
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookSection {
    pub k: usize,
    pub rank: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for CodebookSection {
    fn default() -> Self {
        let d = CodebookConfig::default();
        CodebookSection {
            k: d.k,
            rank: d.rank,
            restarts: d.restarts,
            seed: d.seed,
        }
    }
}

impl CodebookSection {
    pub fn config(&self) -> CodebookConfig {
        CodebookConfig {
            k: self.k,
            rank: self.rank,
            restarts: self.restarts,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub val_fraction: f64,
    pub chunk_hop_s: Option<f64>,
}

impl Default for CvSection {
    fn default() -> Self {
        let d = CvConfig::default();
        CvSection {
            folds: d.folds,
            repeats: d.repeats,
            seed: d.seed,
            val_fraction: d.val_fraction,
            chunk_hop_s: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: usize,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        ModelSection {
            hidden: ModelSpec::new(Arch::Kin, Task::Reg).hidden,
            lr: t.lr,
            max_epochs: t.max_epochs,
            patience: t.patience,
            batch_size: t.batch_size,
        }
    }
}

impl ModelSection {
    pub fn spec(&self, arch: Arch, task: Task) -> ModelSpec {
        ModelSpec {
            hidden: self.hidden,
            train: TrainConfig {
                lr: self.lr,
                max_epochs: self.max_epochs,
                patience: self.patience,
                batch_size: self.batch_size,
                ..Default::default()
            },
            ..ModelSpec::new(arch, task)
        }
    }
}

/// Contents of `eval.toml`. Relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub out_dir: PathBuf,
    pub task: Task,
    pub archs: Vec<Arch>,
    /// Traits to evaluate; empty means every trait in the labels file.
    pub traits: Vec<String>,
    pub slices_s: Vec<f64>,
    pub data: DataSection,
    pub codebook: CodebookSection,
    pub au_scope: ThresholdScope,
    pub cv: CvSection,
    pub model: ModelSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            out_dir: PathBuf::from("results"),
            task: Task::Reg,
            archs: vec![Arch::FfTri],
            traits: Vec::new(),
            slices_s: vec![2.0, 5.0, 15.0],
            data: DataSection::default(),
            codebook: CodebookSection::default(),
            au_scope: ThresholdScope::Video,
            cv: CvSection::default(),
            model: ModelSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses `path` and resolves its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.out_dir);
        for p in [
            &mut cfg.data.corpus,
            &mut cfg.data.kinemes,
            &mut cfg.data.aus,
            &mut cfg.data.speech,
            &mut cfg.data.labels,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            folds: self.cv.folds,
            repeats: self.cv.repeats,
            seed: self.cv.seed,
            val_fraction: self.cv.val_fraction,
            slice: SliceSpec {
                chunk_hop_s: self.cv.chunk_hop_s,
                ..SliceSpec::new(self.slices_s.first().copied().unwrap_or(2.0))
            },
        }
    }

    fn labels_path(&self) -> Result<PathBuf> {
        self.data
            .labels
            .clone()
            .or_else(|| self.data.corpus.as_ref().map(|c| c.join("labels.csv")))
            .ok_or_else(|| Error::Config("no labels file configured".into()))
    }

    /// Encoded sequences, from the raw corpus or from CSVs.
    pub fn load_encoded(&self) -> Result<EncodedCorpus> {
        let d = &self.data;
        if let Some(dir) = &d.corpus {
            let streams = load_streams(dir, d.fps.unwrap_or(crate::pipeline::TARGET_FPS))?;
            let codebook = learn_corpus_codebook(&streams, &self.codebook.config())?;
            let encode = EncodeConfig {
                au_scope: self.au_scope,
                ..Default::default()
            };
            return encode_streams(&streams, &codebook, &encode);
        }
        let (Some(k), Some(a), Some(s)) = (&d.kinemes, &d.aus, &d.speech) else {
            return Err(Error::Config(
                "data needs either `corpus` or all of `kinemes`, `aus` and `speech`".into(),
            ));
        };
        let kinemes = read_kinemes(k)?;
        let k = match d.k {
            Some(k) => k,
            None => kinemes.values().flatten().max().map_or(1, |m| m + 1),
        };
        Ok(EncodedCorpus {
            k,
            kinemes,
            aus: read_aus(a)?,
            speech: read_speech(s)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub results: Vec<SweepResult>,
    pub rows: Vec<ReportRow>,
    pub report_csv: PathBuf,
    pub curves_svg: PathBuf,
}

/// Sweeps every configured trait and architecture over the slice lengths,
/// writing `report.csv`, `curves.svg` and, for attention models,
/// `traces/<trait>_<arch>_s<slice>_r<repeat>_f<fold>.csv`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    if config.archs.is_empty() || config.slices_s.is_empty() {
        return Err(Error::Config(
            "at least one architecture and one slice length are required".into(),
        ));
    }
    let labels = read_labels(&config.labels_path()?)?;
    let traits: Vec<&TraitLabels> = if config.traits.is_empty() {
        labels.values().collect()
    } else {
        config
            .traits
            .iter()
            .map(|t| {
                labels
                    .get(t)
                    .ok_or_else(|| Error::Config(format!("no labels for trait `{t}`")))
            })
            .collect::<Result<_>>()?
    };
    let encoded = config.load_encoded()?;
    let out = &config.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut results = Vec::new();
    let cv = config.cv_config();
    let mut records: BTreeMap<&str, Vec<VideoRecord>> = BTreeMap::new();
    for t in &traits {
        records.insert(&t.trait_name, encoded.records(t)?);
    }
    for t in &traits {
        for &arch in &config.archs {
            let spec = config.model.spec(arch, config.task);
            let res = sweep_slices(
                &t.trait_name,
                &records[t.trait_name.as_str()],
                &spec,
                &cv,
                &config.slices_s,
            )?;
            if arch.is_attention() {
                let dir = out.join("traces");
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                for rep in &res.reports {
                    for run in &rep.runs {
                        if let Some(tr) = &run.attention {
                            let name = format!(
                                "{}_{}_s{}_r{}_f{}.csv",
                                t.trait_name, arch, rep.config.slice.slice_len_s, run.repeat, run.fold
                            );
                            write_traces(&dir.join(name), tr)?;
                        }
                    }
                }
            }
            results.push(res);
        }
    }
    let rows: Vec<ReportRow> = results.iter().flat_map(|r| r.rows()).collect();
    let report_csv = out.join("report.csv");
    write_report_csv(&report_csv, &rows)?;
    let curves_svg = out.join("curves.svg");
    write_svg(&curves_svg, &combined_curves_svg(&results))?;
    Ok(ExperimentOutput {
        results,
        rows,
        report_csv,
        curves_svg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{write_aus, write_kinemes, write_speech};
    use crate::speech::SPEECH_DIM;

    #[test]
    fn toml_defaults_and_overrides() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            archs = ["kin", "af-tri"]
            slices_s = [2, 4]
            [cv]
            folds = 3
            [model]
            hidden = 8
            "#,
        )
        .unwrap();
        assert_eq!(cfg.archs, vec![Arch::Kin, Arch::AfTri]);
        assert_eq!(cfg.cv.folds, 3);
        assert_eq!(cfg.cv.repeats, CvConfig::default().repeats);
        assert_eq!(cfg.model.hidden, 8);
        assert_eq!(cfg.slices_s, vec![2.0, 4.0]);
        assert!(ExperimentConfig::from_toml("foldz = 3").is_err());
        assert!(ExperimentConfig::from_toml("archs = [\"lstm\"]").is_err());
    }

    #[test]
    fn full_sample_parses() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            out_dir = "results"
            task = "reg"
            archs = ["kin", "ff-tri", "af-tri"]
            slices_s = [2.0, 5.0, 15.0]
            au_scope = "corpus"
            [data]
            corpus = "corpus"
            [codebook]
            k = 16
            [cv]
            folds = 10
            repeats = 5
            [model]
            hidden = 32
            max_epochs = 100
            "#,
        )
        .unwrap();
        assert_eq!(cfg.au_scope, ThresholdScope::Corpus);
        assert_eq!(cfg.data.corpus, Some(PathBuf::from("corpus")));
        assert_eq!(cfg.codebook.config().k, 16);
        assert_eq!(cfg.model.spec(Arch::FfTri, Task::Reg).train.max_epochs, 100);
    }

    #[test]
    fn csv_driven_experiment_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut enc = EncodedCorpus {
            k: 2,
            ..Default::default()
        };
        let mut scores = BTreeMap::new();
        for v in 0..8 {
            let id = format!("v{v}");
            enc.kinemes
                .insert(id.clone(), (0..8).map(|w| usize::from(w < v)).collect());
            enc.aus.insert(id.clone(), vec![[0; 17]; 8]);
            enc.speech
                .insert(id.clone(), (0..8).map(|w| vec![(w + v) as f64; SPEECH_DIM]).collect());
            scores.insert(id, v as f64 / 8.0);
        }
        let p = dir.path();
        write_kinemes(&p.join("kinemes.csv"), &enc.kinemes).unwrap();
        write_aus(&p.join("aus.csv"), &enc.aus).unwrap();
        write_speech(&p.join("speech.csv"), &enc.speech).unwrap();
        crate::eval::write_labels(
            &p.join("labels.csv"),
            &[&TraitLabels {
                trait_name: "E".into(),
                scores,
            }],
        )
        .unwrap();
        let toml = r#"
            out_dir = "out"
            archs = ["kin", "af-tri"]
            slices_s = [2, 4]
            [data]
            kinemes = "kinemes.csv"
            aus = "aus.csv"
            speech = "speech.csv"
            labels = "labels.csv"
            [cv]
            folds = 4
            repeats = 1
            [model]
            hidden = 3
            max_epochs = 2
        "#;
        std::fs::write(p.join("eval.toml"), toml).unwrap();
        let cfg = ExperimentConfig::load(&p.join("eval.toml")).unwrap();
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.rows.len(), 2 * 2 * 4);
        assert!(out.report_csv.exists() && out.curves_svg.exists());
        let traces = std::fs::read_dir(p.join("out/traces")).unwrap().count();
        assert_eq!(traces, 2 * 4);
    }
}
