//! Trains unimodal, feature-fusion and attention-fusion models on a synthetic
//! corpus whose trait depends on head motion and loudness, using one
//! video-level hold-out split, and saves the attention-fusion checkpoint.
//!
//! cargo run --release --example train_fusion

use kineme_lab::eval::{compute_metrics, train_holdout, ModelSpec, SliceSpec, Task};
use kineme_lab::fusion::{Arch, FusionModel};
use kineme_lab::kineme::CodebookConfig;
use kineme_lab::pipeline::{encode_streams, learn_corpus_codebook, EncodeConfig};
use kineme_lab::synth::{generate_corpus, SynthConfig};

fn main() -> kineme_lab::Result<()> {
    let mut synth = SynthConfig::default();
    synth.kinemes.angle_noise = 0.01;
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
    let videos = encode_streams(&streams, &codebook, &EncodeConfig::default())?.records(&corpus.labels())?;
    println!("{} videos, trait {}", videos.len(), synth.trait_rule.name);

    let slice = SliceSpec::new(5.0);
    for arch in [Arch::Kin, Arch::Au, Arch::Aud, Arch::FfTri, Arch::AfTri] {
        let spec = ModelSpec::new(arch, Task::Reg);
        let run = train_holdout(&videos, &spec, &slice, 0.2, 3)?;
        let preds: Vec<f64> = run.val_preds.iter().map(|p| p.pred).collect();
        let targets: Vec<f64> = run.val_preds.iter().map(|p| p.target).collect();
        let m = compute_metrics(&preds, &targets, Task::Reg)?;
        println!(
            "{arch:>8}: best epoch {:3} of {:3}, validation chunks {:3}, PCC {:.3}, MAE {:.3}",
            run.history.best_epoch,
            run.history.epochs.len(),
            m.n,
            m.pcc,
            m.mae
        );
        if arch == Arch::AfTri {
            let path = std::env::temp_dir().join("af-tri.json");
            run.model.save(&path)?;
            let back = FusionModel::load(&path)?;
            assert_eq!(back, run.model);
            println!("checkpoint saved to {}", path.display());
        }
    }
    Ok(())
}
