//! Cross-validates the three unimodal models, then searches the weight simplex
//! for the best late fusion of their out-of-fold video predictions.
//!
//! cargo run --release --example decision_fusion

use std::collections::BTreeMap;

use kineme_lab::eval::{cross_validate, pearson, CvConfig, ModelSpec, SliceSpec, Task};
use kineme_lab::facial::ThresholdScope;
use kineme_lab::fusion::{decision_fuse, fused_scores, Arch, SelectionMetric};
use kineme_lab::kineme::CodebookConfig;
use kineme_lab::pipeline::{encode_streams, learn_corpus_codebook, EncodeConfig};
use kineme_lab::synth::{generate_corpus, SynthConfig};

fn main() -> kineme_lab::Result<()> {
    let mut synth = SynthConfig::default();
    synth.kinemes.angle_noise = 0.01;
    synth.trait_rule.au_weight = 1.0;
    synth.trait_rule.speech_weight = 1.0;
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
    // Corpus-wide AU thresholds keep differences in activity rate between videos.
    let encode = EncodeConfig {
        au_scope: ThresholdScope::Corpus,
        ..Default::default()
    };
    let videos = encode_streams(&streams, &codebook, &encode)?.records(&corpus.labels())?;

    let cv = CvConfig {
        repeats: 1,
        slice: SliceSpec::new(5.0),
        ..Default::default()
    };
    let mut preds: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for arch in [Arch::Kin, Arch::Au, Arch::Aud] {
        let report = cross_validate(&videos, &ModelSpec::new(arch, Task::Reg), &cv)?;
        let by_video: BTreeMap<&str, (f64, f64)> = report
            .runs
            .iter()
            .flat_map(|r| &r.video_preds)
            .map(|p| (p.video_id.as_str(), (p.pred, p.target)))
            .collect();
        println!("{arch:>4}: out-of-fold video PCC {:.3}", report.video.pooled.pcc.mean);
        targets = by_video.values().map(|v| v.1).collect();
        preds.push(by_video.values().map(|v| v.0).collect());
    }

    let fused = decision_fuse(&preds, &targets, SelectionMetric::Pcc, 0.05)?;
    println!(
        "weights kin {:.2} au {:.2} aud {:.2}, fused PCC {:.3}",
        fused.weights[0], fused.weights[1], fused.weights[2], fused.score
    );
    let equal = pearson(&fused_scores(&preds, &[1.0 / 3.0; 3]), &targets).unwrap_or(0.0);
    println!("equal-weight average PCC {equal:.3}");
    Ok(())
}
