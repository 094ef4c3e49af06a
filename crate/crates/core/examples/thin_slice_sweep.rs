//! Sweeps the slice length for the feature-fusion model, comparing chunk-level
//! and video-level PCC, and writes report.csv and curves.svg.
//!
//! cargo run --release --example thin_slice_sweep [OUT_DIR]

use std::path::PathBuf;

use kineme_lab::eval::{sweep_slices, write_report_csv, CvConfig, ModelSpec, Task};
use kineme_lab::fusion::Arch;
use kineme_lab::kineme::CodebookConfig;
use kineme_lab::pipeline::{encode_streams, learn_corpus_codebook, EncodeConfig};
use kineme_lab::synth::{generate_corpus, SynthConfig};

fn main() -> kineme_lab::Result<()> {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&out).map_err(|e| kineme_lab::Error::io(&out, e))?;
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

    let cv = CvConfig {
        repeats: 1,
        ..Default::default()
    };
    let result = sweep_slices(
        &synth.trait_rule.name,
        &videos,
        &ModelSpec::new(Arch::FfTri, Task::Reg),
        &cv,
        &[2.0, 5.0, 10.0, 15.0],
    )?;
    println!("slice  chunk PCC  video PCC  (pooled out-of-fold)");
    for r in &result.reports {
        println!(
            "{:4.0} s  {:9.3}  {:9.3}",
            r.config.slice.slice_len_s, r.chunk.pooled.pcc.mean, r.video.pooled.pcc.mean
        );
    }
    write_report_csv(&out.join("report.csv"), &result.rows())?;
    let svg = out.join("curves.svg");
    std::fs::write(&svg, result.curves_svg()).map_err(|e| kineme_lab::Error::io(&svg, e))?;
    println!("report.csv and curves.svg written to {}", out.display());
    Ok(())
}
