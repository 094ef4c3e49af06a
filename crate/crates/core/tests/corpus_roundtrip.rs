use kineme_lab::eval::read_labels;
use kineme_lab::kineme::CodebookConfig;
use kineme_lab::pipeline::{
    encode_streams, learn_corpus_codebook, load_streams, read_aus, read_kinemes, read_speech, write_aus, write_kinemes,
    write_speech, EncodeConfig, TARGET_FPS,
};
use kineme_lab::synth::{codebook_recovery, generate_corpus, Manifest, SynthConfig};

fn corpus() -> kineme_lab::synth::SyntheticCorpus {
    generate_corpus(&SynthConfig {
        n_videos: 30,
        video_len_s: 12,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn written_corpus_reads_back() {
    let corpus = corpus();
    let dir = tempfile::tempdir().unwrap();
    corpus.write(dir.path()).unwrap();
    let disk = load_streams(dir.path(), TARGET_FPS).unwrap();
    let mem = corpus.streams().unwrap();
    assert_eq!(disk.video_ids(), mem.video_ids());

    for (a, b) in disk.pose.iter().zip(&mem.pose) {
        assert_eq!(a.len(), b.len());
        for (fa, fb) in a.frames().iter().zip(b.frames()) {
            for k in 0..3 {
                assert!((fa[k] - fb[k]).abs() < 1e-6);
            }
        }
    }
    for (a, b) in disk.au.iter().zip(&mem.au) {
        assert_eq!(a.len(), b.len());
    }
    for (a, b) in disk.audio.iter().zip(&mem.audio) {
        assert_eq!(a.sample_rate, b.sample_rate);
        assert_eq!(a.samples().len(), b.samples().len());
        let worst = a
            .samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1.0 / 32767.0, "PCM error {worst}");
    }

    let labels = read_labels(&dir.path().join("labels.csv")).unwrap();
    assert_eq!(labels["E"], corpus.labels());
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest, corpus.manifest());
}

#[test]
fn disk_and_memory_encode_alike() {
    let corpus = corpus();
    let dir = tempfile::tempdir().unwrap();
    corpus.write(dir.path()).unwrap();
    let disk = load_streams(dir.path(), TARGET_FPS).unwrap();
    let mem = corpus.streams().unwrap();
    let cfg = CodebookConfig {
        k: 4,
        ..Default::default()
    };
    let codebook = learn_corpus_codebook(&mem, &cfg).unwrap();
    let a = encode_streams(&mem, &codebook, &EncodeConfig::default()).unwrap();
    let b = encode_streams(&disk, &codebook, &EncodeConfig::default()).unwrap();
    assert_eq!(a.kinemes, b.kinemes);
    assert_eq!(a.aus, b.aus);
    for (va, vb) in a.speech.values().zip(b.speech.values()) {
        assert_eq!(va.len(), vb.len());
    }

    write_kinemes(&dir.path().join("k.csv"), &a.kinemes).unwrap();
    write_aus(&dir.path().join("a.csv"), &a.aus).unwrap();
    write_speech(&dir.path().join("s.csv"), &a.speech).unwrap();
    assert_eq!(read_kinemes(&dir.path().join("k.csv")).unwrap(), a.kinemes);
    assert_eq!(read_aus(&dir.path().join("a.csv")).unwrap(), a.aus);
    assert_eq!(read_speech(&dir.path().join("s.csv")).unwrap(), a.speech);

    let records = a.records(&corpus.labels()).unwrap();
    assert_eq!(records.len(), 30);
    assert!(records.iter().all(|r| r.kineme[0].len() == 4));
}

#[test]
fn codebook_from_disk_recovers_templates() {
    let corpus = corpus();
    let dir = tempfile::tempdir().unwrap();
    corpus.write(dir.path()).unwrap();
    let disk = load_streams(dir.path(), TARGET_FPS).unwrap();
    let codebook = learn_corpus_codebook(
        &disk,
        &CodebookConfig {
            k: 4,
            ..Default::default()
        },
    )
    .unwrap();
    let decoded: Vec<_> = disk.pose.iter().map(|s| codebook.decode(s).unwrap()).collect();
    let r = codebook_recovery(&codebook, &corpus, &decoded).unwrap();
    assert!(r.mean_cosine >= 0.9, "{r:?}");
    assert!(r.agreement >= 0.95, "{r:?}");
    let mut matched = r.matching.clone();
    matched.sort_unstable();
    assert_eq!(matched, vec![0, 1, 2, 3]);
}
