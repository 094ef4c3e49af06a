use std::path::Path;
use std::process::Command;

use kineme_lab::explain::{read_traces, TraitExplanation};
use kineme_lab::fusion::{DecisionFusionWeights, FusionModel};
use kineme_lab::kineme::KinemeCodebook;
use kineme_lab::pipeline::{read_aus, read_kinemes, read_predictions, read_speech, read_targets};

fn run(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_kineme-lab"))
        .args(args)
        .output()
        .expect("spawn kineme-lab");
    assert!(
        out.status.success(),
        "kineme-lab {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let synth_toml = d.join("synth.toml");
    std::fs::write(
        &synth_toml,
        "n_videos = 12\nvideo_len_s = 10\n[trait_rule]\nspeech_weight = 1.0\n",
    )
    .unwrap();
    let corpus = d.join("corpus");
    run(&["synth", "--config", s(&synth_toml), "--out", s(&corpus)]);
    assert!(corpus.join("manifest.json").exists());

    let ingest = d.join("ingest");
    run(&[
        "ingest",
        "--pose",
        s(&corpus.join("pose/vid000.csv")),
        "--au",
        s(&corpus.join("au/vid000.csv")),
        "--wav",
        s(&corpus.join("audio/vid000.wav")),
        "--out",
        s(&ingest),
    ]);
    assert!(ingest.join("pose.csv").exists() && ingest.join("au.csv").exists());

    let cb = d.join("codebook.json");
    let svg = d.join("templates.svg");
    run(&[
        "learn-codebook",
        "--pose-dir",
        s(&corpus.join("pose")),
        "--k",
        "4",
        "--out",
        s(&cb),
        "--templates-svg",
        s(&svg),
    ]);
    assert_eq!(KinemeCodebook::load(&cb).unwrap().k(), 4);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let enc = d.join("enc");
    run(&["encode", "--codebook", s(&cb), "--corpus", s(&corpus), "--out", s(&enc)]);
    let kinemes = read_kinemes(&enc.join("kinemes.csv")).unwrap();
    let aus = read_aus(&enc.join("aus.csv")).unwrap();
    let speech = read_speech(&enc.join("speech.csv")).unwrap();
    assert_eq!(kinemes.len(), 12);
    assert_eq!(kinemes["vid000"].len(), 9);
    assert_eq!(aus["vid000"].len(), 9);
    assert_eq!(speech["vid000"].len(), 9);
    assert!(kinemes.values().flatten().all(|&k| k < 4));

    let single = d.join("single_kin.csv");
    run(&[
        "encode",
        "--codebook",
        s(&cb),
        "--pose",
        s(&corpus.join("pose/vid001.csv")),
        "--out",
        s(&single),
    ]);
    assert_eq!(read_kinemes(&single).unwrap()["vid001"], kinemes["vid001"]);

    let labels = corpus.join("labels.csv");
    let train = |arch: &str| {
        let out = d.join(format!("model_{arch}"));
        run(&[
            "train",
            "--arch",
            arch,
            "--task",
            "reg",
            "--trait",
            "E",
            "--slice-s",
            "4",
            "--kinemes",
            s(&enc.join("kinemes.csv")),
            "--aus",
            s(&enc.join("aus.csv")),
            "--speech",
            s(&enc.join("speech.csv")),
            "--k",
            "4",
            "--labels",
            s(&labels),
            "--val-fraction",
            "0.25",
            "--max-epochs",
            "3",
            "--hidden",
            "4",
            "--out",
            s(&out),
        ]);
        out
    };
    let kin = train("kin");
    let aud = train("aud");
    let af = train("af-tri");
    for m in [&kin, &aud, &af] {
        for f in [
            "model.json",
            "speech_norm.json",
            "history.csv",
            "val_preds.csv",
            "val_targets.csv",
        ] {
            assert!(m.join(f).exists(), "{} missing {f}", m.display());
        }
    }
    assert!(!kin.join("traces.csv").exists());
    let model = FusionModel::load(&af.join("model.json")).unwrap();
    assert!(model.arch.is_attention());
    let traces = read_traces(&af.join("traces.csv")).unwrap();
    assert!(!traces.is_empty());
    let preds = read_predictions(&kin.join("val_preds.csv")).unwrap();
    let targets = read_targets(&kin.join("val_targets.csv")).unwrap();
    assert_eq!(preds.len(), targets.len());

    let weights = d.join("weights.json");
    run(&[
        "fuse-decisions",
        "--preds",
        s(&kin.join("val_preds.csv")),
        s(&aud.join("val_preds.csv")),
        "--labels",
        s(&kin.join("val_targets.csv")),
        "--metric",
        "pcc",
        "--out",
        s(&weights),
    ]);
    let w: DecisionFusionWeights = serde_json::from_str(&std::fs::read_to_string(&weights).unwrap()).unwrap();
    assert_eq!(w.weights.len(), 2);
    assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let ex = d.join("explain");
    run(&[
        "explain",
        "--labels",
        s(&labels),
        "--kinemes",
        s(&enc.join("kinemes.csv")),
        "--aus",
        s(&enc.join("aus.csv")),
        "--trait",
        "E",
        "--per-video",
        "--out-dir",
        s(&ex),
    ]);
    let report: TraitExplanation =
        serde_json::from_str(&std::fs::read_to_string(ex.join("explain_E.json")).unwrap()).unwrap();
    assert!(report.high.per_video);
    assert!(!report.bands.high.is_empty() && !report.bands.low.is_empty());
    assert!(ex.join("explain_E.svg").exists());

    let att = d.join("attention");
    run(&[
        "attention-report",
        "--traces",
        s(&af.join("traces.csv")),
        "--trait",
        "E",
        "--out-dir",
        s(&att),
    ]);
    let summary = std::fs::read_to_string(att.join("attention_summary.csv")).unwrap();
    // header + one row per modality
    assert_eq!(summary.lines().count(), 4);
    let total: f64 = summary
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(att.join("attention_summary.svg").exists());

    let eval_toml = d.join("eval.toml");
    std::fs::write(
        &eval_toml,
        "out_dir = \"results\"\narchs = [\"kin\", \"ff-tri\"]\nslices_s = [2.0, 4.0]\n\
         [data]\ncorpus = \"corpus\"\n[codebook]\nk = 4\n[cv]\nfolds = 3\nrepeats = 1\n\
         [model]\nhidden = 4\nmax_epochs = 3\n",
    )
    .unwrap();
    let out = run(&["evaluate", "--config", s(&eval_toml)]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("video-pooled"));
    let report = std::fs::read_to_string(d.join("results/report.csv")).unwrap();
    // header + 2 archs x 2 slices x 4 levels
    assert_eq!(report.lines().count(), 17);
    assert!(d.join("results/curves.svg").exists());
}

#[test]
fn oracle_suite_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("oracles.json");
    let out = run(&["oracle-suite", "--json", s(&json)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("finite-difference-grad"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["entries"].as_array().unwrap().len(), 7);
}

#[test]
fn bad_invocations_fail() {
    let bin = env!("CARGO_BIN_EXE_kineme-lab");
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(bin)
        .args(["encode", "--out", s(&dir.path().join("x.csv"))])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Command::new(bin)
        .args(["train", "--arch", "lstm", "--task", "reg"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Command::new(bin)
        .args([
            "learn-codebook",
            "--pose-dir",
            s(&dir.path().join("missing")),
            "--out",
            "cb.json",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
