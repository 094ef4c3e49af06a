//! Learns a kineme codebook from synthetic head-pose streams with four planted
//! movement templates and reports how well they were recovered.
//!
//! cargo run --release --example learn_codebook

use kineme_lab::kineme::{learn_codebook, CodebookConfig};
use kineme_lab::synth::{codebook_recovery, generate_corpus, SynthConfig};

fn main() -> kineme_lab::Result<()> {
    let mut synth = SynthConfig {
        n_videos: 20,
        ..Default::default()
    };
    synth.kinemes.angle_noise = 0.02;
    let corpus = generate_corpus(&synth)?;
    let series = corpus.pose_series();

    let config = CodebookConfig {
        k: 4,
        rank: 20,
        ..Default::default()
    };
    let codebook = learn_codebook(&series, &config)?;
    println!(
        "K = {}, rank = {}, segment = {} values, NMF objective {:.4e} after {} iterations",
        codebook.k(),
        codebook.rank(),
        codebook.dim(),
        codebook.nmf.objective_trace.last().copied().unwrap_or(f64::NAN),
        codebook.nmf.objective_trace.len() - 1,
    );

    let decoded = series
        .iter()
        .map(|s| codebook.decode(s))
        .collect::<kineme_lab::Result<Vec<_>>>()?;
    let report = codebook_recovery(&codebook, &corpus, &decoded)?;
    for (j, (&l, c)) in report.matching.iter().zip(&report.cosine).enumerate() {
        println!("planted template {j} -> K{l}  cosine {c:.3}");
    }
    println!(
        "mean cosine {:.3}, window agreement {:.1}% over {} windows",
        report.mean_cosine,
        100.0 * report.agreement,
        report.scored_windows
    );

    let first = &decoded[0];
    let ids: Vec<String> = first.ids.iter().map(|i| format!("K{i}")).collect();
    println!("{}: {}", first.video_id, ids.join(" "));
    Ok(())
}
