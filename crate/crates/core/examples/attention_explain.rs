//! Explains a trait two ways: the kinemes and AUs that dominate the top and
//! bottom scoring videos, and the modality weights an attention-fusion model
//! learns across cross-validation runs. SVG charts are written to the temp
//! directory.
//!
//! cargo run --release --example attention_explain

use kineme_lab::eval::{cross_validate, CvConfig, ModelSpec, SliceSpec, Task};
use kineme_lab::explain::{attention_summary, attention_svg, explain_trait, Grouping};
use kineme_lab::fusion::Arch;
use kineme_lab::kineme::CodebookConfig;
use kineme_lab::pipeline::{encode_streams, learn_corpus_codebook, EncodeConfig};
use kineme_lab::synth::{generate_corpus, SynthConfig};

fn main() -> kineme_lab::Result<()> {
    // Only the planted head-motion template drives the trait.
    let mut synth = SynthConfig::default();
    synth.kinemes.angle_noise = 0.01;
    synth.trait_rule.label_noise = 0.03;
    let corpus = generate_corpus(&synth)?;
    let streams = corpus.streams()?;
    let codebook = learn_corpus_codebook(
        &streams,
        &CodebookConfig {
            k: 4,
            ..Default::default()
        },
    )?;
    let encoded = encode_streams(&streams, &codebook, &EncodeConfig::default())?;
    let labels = corpus.labels();
    let out = std::env::temp_dir();

    let explanation = explain_trait(&labels.trait_name, &labels.scores, &encoded.symbols(), 10.0, false)?;
    for report in [&explanation.high, &explanation.low] {
        let kin: Vec<String> = report
            .top_kinemes
            .iter()
            .map(|s| format!("{} {:.2}", s.label, s.frequency))
            .collect();
        let aus: Vec<String> = report.top_aus.iter().map(|s| s.label.clone()).collect();
        println!(
            "{:?} band ({} videos): kinemes [{}], AUs [{}]",
            report.band,
            report.n_videos,
            kin.join(", "),
            aus.join(", ")
        );
    }
    let planted = synth.trait_rule.kineme_template;
    let recovered = kineme_lab::synth::codebook_recovery(
        &codebook,
        &corpus,
        &streams
            .pose
            .iter()
            .map(|s| codebook.decode(s))
            .collect::<kineme_lab::Result<Vec<_>>>()?,
    )?;
    println!(
        "the trait rewards planted template {planted}, learned as K{}",
        recovered.matching[planted]
    );
    std::fs::write(out.join("explain.svg"), explanation.svg()).map_err(|e| kineme_lab::Error::io(&out, e))?;

    let videos = encoded.records(&labels)?;
    let spec = ModelSpec::new(Arch::AfTri, Task::Reg);
    let mut runs = Vec::new();
    for seed in 0..3 {
        let cv = CvConfig {
            repeats: 1,
            seed,
            slice: SliceSpec::new(5.0),
            ..Default::default()
        };
        runs.push(cross_validate(&videos, &spec, &cv)?.attention_runs().concat());
    }
    let summary = attention_summary(&labels.trait_name, &runs, Grouping::PerVideo)?;
    println!(
        "attention over {} runs: kineme {:.3} +- {:.3}, au {:.3} +- {:.3}, speech {:.3} +- {:.3}",
        summary.runs,
        summary.mean[0],
        summary.std_error[0],
        summary.mean[1],
        summary.std_error[1],
        summary.mean[2],
        summary.std_error[2]
    );
    std::fs::write(out.join("attention.svg"), attention_svg(&[summary])).map_err(|e| kineme_lab::Error::io(&out, e))?;
    println!("explain.svg and attention.svg written to {}", out.display());
    Ok(())
}
