//! Writes a synthetic corpus as OpenFace CSVs and WAVs, reads it back, and
//! encodes every video into per-window kineme ids, AU bit vectors and speech
//! descriptors. The CSV outputs land next to the corpus.
//!
//! cargo run --release --example encode_modalities [OUT_DIR]

use std::path::PathBuf;

use kineme_lab::facial::ThresholdScope;
use kineme_lab::ingest::au_name;
use kineme_lab::kineme::CodebookConfig;
use kineme_lab::pipeline::{
    encode_streams, learn_corpus_codebook, load_streams, write_aus, write_kinemes, write_speech, EncodeConfig,
    TARGET_FPS,
};
use kineme_lab::synth::{generate_corpus, SynthConfig};

fn main() -> kineme_lab::Result<()> {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("kineme-lab-encode"));
    let corpus = generate_corpus(&SynthConfig {
        n_videos: 12,
        ..Default::default()
    })?;
    corpus.write(&out)?;
    println!("corpus written to {}", out.display());

    let streams = load_streams(&out, TARGET_FPS)?;
    let codebook = learn_corpus_codebook(
        &streams,
        &CodebookConfig {
            k: 4,
            ..Default::default()
        },
    )?;
    codebook.save(&out.join("codebook.json"))?;

    for scope in [ThresholdScope::Video, ThresholdScope::Corpus] {
        let encoded = encode_streams(
            &streams,
            &codebook,
            &EncodeConfig {
                au_scope: scope,
                ..Default::default()
            },
        )?;
        let id = &encoded.video_ids()[0];
        let active: Vec<String> = encoded.aus[id][0]
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| au_name(i))
            .collect();
        println!(
            "{scope:?} thresholds: {id} has {} windows, window 0 kineme K{} with AUs [{}]",
            encoded.kinemes[id].len(),
            encoded.kinemes[id][0],
            active.join(", ")
        );
        if scope == ThresholdScope::Video {
            write_kinemes(&out.join("kinemes.csv"), &encoded.kinemes)?;
            write_aus(&out.join("aus.csv"), &encoded.aus)?;
            write_speech(&out.join("speech.csv"), &encoded.speech)?;
        }
    }
    println!("kinemes.csv, aus.csv and speech.csv written");
    Ok(())
}
