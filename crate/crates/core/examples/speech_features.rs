//! Extracts frame-level pitch, voicing, zero-crossing rate and MFCCs from a
//! synthetic tone track, then averages them into 2 s windows.
//!
//! cargo run --release --example speech_features

use kineme_lab::ingest::{AudioTrack, WindowSpec};
use kineme_lab::speech::{encode_speech, extract_lld, speech_feature_names, SpeechConfig};

fn main() -> kineme_lab::Result<()> {
    let sr = 8000u32;
    // 3 s at 120 Hz, then 3 s at 200 Hz, each with two harmonics.
    let samples: Vec<f64> = (0..6 * sr as usize)
        .map(|i| {
            let t = i as f64 / sr as f64;
            let f0 = if t < 3.0 { 120.0 } else { 200.0 };
            let p = 2.0 * std::f64::consts::PI * f0 * t;
            0.4 * p.sin() + 0.2 * (2.0 * p).sin() + 0.1 * (3.0 * p).sin()
        })
        .collect();
    let track = AudioTrack::new("tone", sr, samples)?;
    let config = SpeechConfig::default();

    let lld = extract_lld(&track, &config)?;
    println!("{} analysis frames", lld.frames.len());
    for i in [0, lld.frames.len() / 2, lld.frames.len() - 1] {
        let f = &lld.frames[i];
        println!(
            "frame {i:3} at {:.3} s: f0 {:6.1} Hz  voicing {:.2}  zcr {:.3}  mfcc1 {:7.2}",
            lld.centers[i] / sr as f64,
            f.f0,
            f.voicing,
            f.zcr,
            f.mfcc[0]
        );
    }

    let windows = encode_speech(&track, &config, &WindowSpec::default())?;
    let names = speech_feature_names();
    for (w, v) in windows.vectors.iter().enumerate() {
        println!("window {w}: {} {:.1}  {} {:.2}", names[0], v[0], names[1], v[1]);
    }
    Ok(())
}
