use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kineme_lab::eval::{read_labels, train_holdout, ModelSpec, SliceSpec, Task, TraitLabels};
use kineme_lab::experiment::{run_experiment, ExperimentConfig, ModelSection};
use kineme_lab::explain::{
    attention_summary, attention_svg, explain_trait, read_traces, write_attention_csv, write_traces, Grouping,
    SymbolSequences,
};
use kineme_lab::facial::encode_video;
use kineme_lab::fusion::{decision_fuse, Arch, SelectionMetric};
use kineme_lab::ingest::{parse_au_csv, parse_pose_csv, read_wav, AuColumns, PoseCsvOptions, WindowSpec};
use kineme_lab::kineme::{CodebookConfig, KinemeCodebook};
use kineme_lab::pipeline::{
    encode_streams, learn_corpus_codebook, load_pose_dir, load_streams, read_aus, read_kinemes, read_predictions,
    read_speech, read_targets, write_aus, write_kinemes, write_predictions, write_speech, write_targets, EncodeConfig,
    EncodedCorpus, TARGET_FPS,
};
use kineme_lab::plot::{line_chart, write_svg, Series};
use kineme_lab::speech::{encode_speech, FrameConfig, NormStats, SpeechConfig};
use kineme_lab::synth::oracle::{oracle_suite, OracleConfig};
use kineme_lab::synth::{generate_corpus, SynthConfig};
use kineme_lab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "kineme-lab",
    version,
    about = "Kineme, action-unit and speech trait modelling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse one video's pose, AU and audio streams and dump canonical CSVs.
    Ingest(IngestArgs),
    /// Learn a kineme codebook from a directory of pose CSVs.
    LearnCodebook(LearnArgs),
    /// Encode pose, AU or audio streams into per-window sequences.
    Encode(EncodeArgs),
    /// Train one model on a train/validation split of a trait.
    Train(TrainArgs),
    /// Choose decision-fusion weights from validation predictions.
    FuseDecisions(FuseArgs),
    /// Run the cross-validated slice sweep described by a TOML file.
    Evaluate(EvaluateArgs),
    /// Dominant kinemes and AUs of the high and low bands of a trait.
    Explain(ExplainArgs),
    /// Summarize attention traces over runs.
    AttentionReport(AttentionArgs),
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Check the numerical core against brute-force oracles.
    OracleSuite(OracleArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    pose: PathBuf,
    #[arg(long)]
    au: PathBuf,
    #[arg(long)]
    wav: PathBuf,
    /// Frame rate of the pose and AU CSVs.
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    #[arg(long, default_value_t = 0.75)]
    confidence: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    pose_dir: PathBuf,
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long, default_value_t = 20)]
    rank: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also plot every template's pitch/yaw/roll curves.
    #[arg(long)]
    templates_svg: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    codebook: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    pose: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    au: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    wav: Vec<PathBuf>,
    /// Encode a whole corpus directory (pose/, au/, audio/); `--out` is then a
    /// directory receiving kinemes.csv, aus.csv, speech.csv and speech_norm.json.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    /// Threshold AUs against corpus-wide instead of per-video means.
    #[arg(long)]
    corpus_au_thresholds: bool,
    #[arg(long, default_value_t = 70.0)]
    hop_ms: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SequenceInputs {
    #[arg(long)]
    kinemes: PathBuf,
    #[arg(long)]
    aus: PathBuf,
    #[arg(long)]
    speech: PathBuf,
    /// Kineme vocabulary size; defaults to the largest id + 1.
    #[arg(long)]
    k: Option<usize>,
}

impl SequenceInputs {
    fn load(&self) -> Result<EncodedCorpus> {
        let kinemes = read_kinemes(&self.kinemes)?;
        let k = self
            .k
            .unwrap_or_else(|| kinemes.values().flatten().max().map_or(1, |m| m + 1));
        Ok(EncodedCorpus {
            k,
            kinemes,
            aus: read_aus(&self.aus)?,
            speech: read_speech(&self.speech)?,
        })
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    arch: Arch,
    #[arg(long, value_parser = parse_task)]
    task: Task,
    #[arg(long = "trait")]
    trait_name: String,
    #[arg(long)]
    slice_s: f64,
    #[arg(long)]
    chunk_hop_s: Option<f64>,
    #[command(flatten)]
    inputs: SequenceInputs,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Output directory for model.json, speech_norm.json, history.csv,
    /// val_preds.csv, val_targets.csv and, for af-tri, traces.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long, num_args = 2..=3, required = true)]
    preds: Vec<PathBuf>,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    metric: SelectionMetric,
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    kinemes: PathBuf,
    #[arg(long)]
    aus: PathBuf,
    #[arg(long = "trait")]
    trait_name: String,
    #[arg(long, default_value_t = 10.0)]
    pct: f64,
    /// Count a symbol once per video instead of once per window.
    #[arg(long)]
    per_video: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AttentionArgs {
    /// One trace file per run.
    #[arg(long, num_args = 1.., required = true)]
    traces: Vec<PathBuf>,
    #[arg(long = "trait", default_value = "trait")]
    trait_name: String,
    /// Average per chunk instead of per video before averaging over items.
    #[arg(long)]
    per_chunk: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Write the full report, offending cases included, as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    match s {
        "cls" => Ok(Task::Cls),
        "reg" => Ok(Task::Reg),
        other => Err(format!("unknown task `{other}` (cls|reg)")),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

fn trait_labels(path: &Path, name: &str) -> Result<TraitLabels> {
    read_labels(path)?
        .remove(name)
        .ok_or_else(|| Error::Config(format!("{} has no rows for trait `{name}`", path.display())))
}

fn ingest(a: IngestArgs) -> Result<()> {
    create_dir(&a.out)?;
    let options = PoseCsvOptions {
        fps: a.fps,
        confidence_threshold: a.confidence,
        ..Default::default()
    };
    let pose = parse_pose_csv(&a.pose, &options)?.resample(TARGET_FPS)?;
    let au = parse_au_csv(&a.au, &AuColumns::default(), a.fps)?.resample(TARGET_FPS)?;
    let audio = read_wav(&a.wav)?;
    pose.save_canonical(&a.out.join("pose.csv"))?;
    au.save_canonical(&a.out.join("au.csv"))?;
    println!(
        "{}: {} pose frames, {} AU frames at {TARGET_FPS} fps; audio {:.2} s at {} Hz",
        pose.video_id,
        pose.len(),
        au.len(),
        audio.duration_s(),
        audio.sample_rate
    );
    Ok(())
}

fn learn(a: LearnArgs) -> Result<()> {
    let series = load_pose_dir(&a.pose_dir, a.fps)?;
    let config = CodebookConfig {
        k: a.k,
        rank: a.rank,
        seed: a.seed,
        ..Default::default()
    };
    let codebook = kineme_lab::kineme::learn_codebook(&series, &config)?;
    codebook.save(&a.out)?;
    println!(
        "learned {} kinemes from {} videos -> {}",
        codebook.k(),
        series.len(),
        a.out.display()
    );
    if let Some(path) = a.templates_svg {
        let l = codebook.segment_frames;
        let mut curves = Vec::new();
        for j in 0..codebook.k() {
            let t = codebook.template_angles(j);
            for (axis, name) in ["pitch", "yaw", "roll"].iter().enumerate() {
                curves.push(Series {
                    name: format!("k{j} {name}"),
                    points: (0..l).map(|i| (i as f64 / codebook.fps, t[axis * l + i])).collect(),
                });
            }
        }
        write_svg(
            &path,
            &line_chart("Kineme templates", "time (s)", "angle (rad)", &curves),
        )?;
    }
    Ok(())
}

fn encode(a: EncodeArgs) -> Result<()> {
    let speech_config = SpeechConfig {
        frames: FrameConfig {
            hop_ms: a.hop_ms,
            ..Default::default()
        },
        ..Default::default()
    };
    let windows = WindowSpec::default();
    if let Some(dir) = &a.corpus {
        let streams = load_streams(dir, a.fps)?;
        let codebook = match &a.codebook {
            Some(p) => KinemeCodebook::load(p)?,
            None => learn_corpus_codebook(&streams, &CodebookConfig::default())?,
        };
        let config = EncodeConfig {
            speech: speech_config,
            au_scope: if a.corpus_au_thresholds {
                kineme_lab::facial::ThresholdScope::Corpus
            } else {
                kineme_lab::facial::ThresholdScope::Video
            },
            ..Default::default()
        };
        let enc = encode_streams(&streams, &codebook, &config)?;
        create_dir(&a.out)?;
        write_kinemes(&a.out.join("kinemes.csv"), &enc.kinemes)?;
        write_aus(&a.out.join("aus.csv"), &enc.aus)?;
        write_speech(&a.out.join("speech.csv"), &enc.speech)?;
        NormStats::fit(enc.speech.values().flatten())?.save(&a.out.join("speech_norm.json"))?;
        println!("encoded {} videos into {}", enc.kinemes.len(), a.out.display());
        return Ok(());
    }
    let kinds = [!a.pose.is_empty(), !a.au.is_empty(), !a.wav.is_empty()];
    if kinds.iter().filter(|&&k| k).count() != 1 {
        return Err(Error::Config(
            "give exactly one of --pose, --au, --wav, or --corpus".into(),
        ));
    }
    if !a.pose.is_empty() {
        let path = a
            .codebook
            .as_ref()
            .ok_or_else(|| Error::Config("--pose needs --codebook".into()))?;
        let codebook = KinemeCodebook::load(path)?;
        let options = PoseCsvOptions {
            fps: a.fps,
            ..Default::default()
        };
        let mut out = BTreeMap::new();
        for p in &a.pose {
            let s = parse_pose_csv(p, &options)?.resample(TARGET_FPS)?;
            out.insert(s.video_id.clone(), codebook.decode(&s)?.ids);
        }
        write_kinemes(&a.out, &out)?;
    } else if !a.au.is_empty() {
        let mut out = BTreeMap::new();
        for p in &a.au {
            let s = parse_au_csv(p, &AuColumns::default(), a.fps)?.resample(TARGET_FPS)?;
            let plan = windows.plan(s.len(), s.fps)?;
            out.insert(s.video_id.clone(), encode_video(&s, &plan, None)?.vectors);
        }
        write_aus(&a.out, &out)?;
    } else {
        let mut out = BTreeMap::new();
        for p in &a.wav {
            let t = read_wav(p)?;
            out.insert(t.video_id.clone(), encode_speech(&t, &speech_config, &windows)?.vectors);
        }
        write_speech(&a.out, &out)?;
        let norm_path = a.out.with_file_name("speech_norm.json");
        NormStats::fit(out.values().flatten())?.save(&norm_path)?;
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let labels = trait_labels(&a.labels, &a.trait_name)?;
    let records = a.inputs.load()?.records(&labels)?;
    let defaults = ModelSection::default();
    let section = ModelSection {
        hidden: a.hidden.unwrap_or(defaults.hidden),
        max_epochs: a.max_epochs.unwrap_or(defaults.max_epochs),
        lr: a.lr.unwrap_or(defaults.lr),
        ..defaults
    };
    let spec: ModelSpec = section.spec(a.arch, a.task);
    let slice = SliceSpec {
        chunk_hop_s: a.chunk_hop_s,
        ..SliceSpec::new(a.slice_s)
    };
    let run = train_holdout(&records, &spec, &slice, a.val_fraction, a.seed)?;
    create_dir(&a.out)?;
    run.model.save(&a.out.join("model.json"))?;
    run.norm.save(&a.out.join("speech_norm.json"))?;
    run.history.write_csv(&a.out.join("history.csv"))?;
    write_predictions(&a.out.join("val_preds.csv"), &run.val_preds)?;
    let targets: BTreeMap<String, f64> = run.val_preds.iter().map(|p| (p.id.clone(), p.target)).collect();
    write_targets(&a.out.join("val_targets.csv"), &targets)?;
    if let Some(tr) = &run.traces {
        write_traces(&a.out.join("traces.csv"), tr)?;
    }
    println!(
        "{} on {}: {} train / {} validation videos, best epoch {} -> {}",
        a.arch,
        a.trait_name,
        run.train_videos.len(),
        run.val_videos.len(),
        run.history.best_epoch,
        a.out.display()
    );
    Ok(())
}

fn fuse(a: FuseArgs) -> Result<()> {
    let targets = read_targets(&a.labels)?;
    let ids: Vec<&String> = targets.keys().collect();
    let mut preds = Vec::new();
    for p in &a.preds {
        let by_id: BTreeMap<String, f64> = read_predictions(p)?.into_iter().map(|x| (x.id, x.pred)).collect();
        let col = ids
            .iter()
            .map(|id| {
                by_id
                    .get(*id)
                    .copied()
                    .ok_or_else(|| Error::Shape(format!("{} has no prediction for {id}", p.display())))
            })
            .collect::<Result<Vec<f64>>>()?;
        preds.push(col);
    }
    let labels: Vec<f64> = targets.values().copied().collect();
    let weights = decision_fuse(&preds, &labels, a.metric, a.step)?;
    let json = serde_json::to_string_pretty(&weights)?;
    match &a.out {
        Some(p) => std::fs::write(p, &json).map_err(|e| Error::io(p, e))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let config = ExperimentConfig::load(&a.config)?;
    let out = run_experiment(&config)?;
    for r in &out.rows {
        let f1 = match config.task {
            Task::Cls => format!(" f1 {:.3}", r.f1),
            Task::Reg => String::new(),
        };
        println!(
            "{:<4} {:<10} {:>5} s {:<13} acc {:.3}{f1} pcc {:.3} mae {:.3} (n {}, std {:.3})",
            r.trait_name, r.arch, r.slice_s, r.level, r.acc, r.pcc, r.mae, r.n, r.std
        );
    }
    println!("wrote {} and {}", out.report_csv.display(), out.curves_svg.display());
    Ok(())
}

fn explain(a: ExplainArgs) -> Result<()> {
    let labels = trait_labels(&a.labels, &a.trait_name)?;
    let seqs = SymbolSequences {
        kinemes: read_kinemes(&a.kinemes)?,
        aus: read_aus(&a.aus)?,
    };
    let exp = explain_trait(&a.trait_name, &labels.scores, &seqs, a.pct, a.per_video)?;
    create_dir(&a.out_dir)?;
    let json = a.out_dir.join(format!("explain_{}.json", a.trait_name));
    exp.save_json(&json)?;
    write_svg(&a.out_dir.join(format!("explain_{}.svg", a.trait_name)), &exp.svg())?;
    for report in [&exp.high, &exp.low] {
        let kin: Vec<String> = report
            .top_kinemes
            .iter()
            .map(|s| format!("{} ({})", s.label, s.count))
            .collect();
        let aus: Vec<String> = report
            .top_aus
            .iter()
            .map(|s| format!("{} ({})", s.label, s.count))
            .collect();
        println!(
            "{:?} {}: kinemes {}; AUs {}",
            report.band,
            a.trait_name,
            kin.join(", "),
            aus.join(", ")
        );
    }
    println!("wrote {}", json.display());
    Ok(())
}

fn attention_report(a: AttentionArgs) -> Result<()> {
    let runs = a.traces.iter().map(|p| read_traces(p)).collect::<Result<Vec<_>>>()?;
    let grouping = if a.per_chunk {
        Grouping::PerChunk
    } else {
        Grouping::PerVideo
    };
    let summary = attention_summary(&a.trait_name, &runs, grouping)?;
    create_dir(&a.out_dir)?;
    write_attention_csv(&a.out_dir.join("attention_summary.csv"), std::slice::from_ref(&summary))?;
    write_svg(
        &a.out_dir.join("attention_summary.svg"),
        &attention_svg(std::slice::from_ref(&summary)),
    )?;
    println!(
        "{} over {} runs: kineme {:.3} ± {:.3}, au {:.3} ± {:.3}, speech {:.3} ± {:.3}",
        summary.trait_name,
        summary.runs,
        summary.mean[0],
        summary.std_error[0],
        summary.mean[1],
        summary.std_error[1],
        summary.mean[2],
        summary.std_error[2]
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let config = match &a.config {
        Some(p) => SynthConfig::load(p)?,
        None => SynthConfig::default(),
    };
    let corpus = generate_corpus(&config)?;
    corpus.write(&a.out)?;
    println!("wrote {} synthetic videos to {}", corpus.videos.len(), a.out.display());
    Ok(())
}

fn oracles(a: OracleArgs) -> Result<bool> {
    let report = oracle_suite(&OracleConfig {
        seed: a.seed,
        ..Default::default()
    })?;
    print!("{report}");
    if let Some(p) = &a.json {
        write_json(p, &report)?;
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a).map(|_| true),
        Command::LearnCodebook(a) => learn(a).map(|_| true),
        Command::Encode(a) => encode(a).map(|_| true),
        Command::Train(a) => train_cmd(a).map(|_| true),
        Command::FuseDecisions(a) => fuse(a).map(|_| true),
        Command::Evaluate(a) => evaluate(a).map(|_| true),
        Command::Explain(a) => explain(a).map(|_| true),
        Command::AttentionReport(a) => attention_report(a).map(|_| true),
        Command::Synth(a) => synth(a).map(|_| true),
        Command::OracleSuite(a) => oracles(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
