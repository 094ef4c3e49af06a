//! Synthetic corpora with planted kinemes, AU schedules and speech tones, plus
//! brute-force oracles for the numerical core.

mod matching;
pub mod oracle;

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::TraitLabels;
use crate::ingest::{au_name, AUSeries, AudioTrack, HeadPoseSeries, WindowSpec, N_AUS};
use crate::kineme::{KinemeCodebook, KinemeSequence};
use crate::numeric::seeded_rng;
use crate::pipeline::CorpusStreams;

pub use matching::{best_assignment, MAX_EXHAUSTIVE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinemeRecipe {
    pub n_templates: usize,
    /// Peak angle of every template, radians.
    pub amplitude: f64,
    /// Standard deviation of additive Gaussian angle noise, radians.
    pub angle_noise: f64,
    pub min_block_s: usize,
    pub max_block_s: usize,
}

impl Default for KinemeRecipe {
    fn default() -> Self {
        KinemeRecipe {
            n_templates: 4,
            amplitude: 0.25,
            angle_noise: 0.0,
            min_block_s: 2,
            max_block_s: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuRecipe {
    /// Index (0..17) of the AU whose activity the trait rule reads.
    pub target_au: usize,
    /// Activation probability of every other AU per block.
    pub background_rate: f64,
    pub active_level: f64,
    pub rest_level: f64,
    /// Standard deviation of per-frame intensity jitter.
    pub jitter: f64,
    pub min_block_s: usize,
    pub max_block_s: usize,
}

impl Default for AuRecipe {
    fn default() -> Self {
        AuRecipe {
            target_au: 4,
            background_rate: 0.3,
            active_level: 2.5,
            rest_level: 0.3,
            jitter: 0.1,
            min_block_s: 1,
            max_block_s: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeechRecipe {
    pub sample_rate: u32,
    pub loud_amplitude: f64,
    pub quiet_amplitude: f64,
    pub f0_min: f64,
    pub f0_max: f64,
    /// Tone-to-noise ratio in dB.
    pub snr_db: f64,
    pub min_block_s: usize,
    pub max_block_s: usize,
}

impl Default for SpeechRecipe {
    fn default() -> Self {
        SpeechRecipe {
            sample_rate: 8000,
            loud_amplitude: 0.5,
            quiet_amplitude: 0.1,
            f0_min: 100.0,
            f0_max: 220.0,
            snr_db: 20.0,
            min_block_s: 1,
            max_block_s: 3,
        }
    }
}

/// `score = (wk * kineme + wa * au + ws * speech) / (wk + wa + ws) + noise`,
/// clamped to [0, 1], where each measure is a fraction of planted units:
/// windows showing `kineme_template`, seconds with the target AU active and
/// seconds of loud tone. With all weights zero the score is the latent
/// propensity itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraitRule {
    pub name: String,
    pub kineme_template: usize,
    pub kineme_weight: f64,
    pub au_weight: f64,
    pub speech_weight: f64,
    pub label_noise: f64,
}

impl Default for TraitRule {
    fn default() -> Self {
        TraitRule {
            name: "E".into(),
            kineme_template: 0,
            kineme_weight: 1.0,
            au_weight: 0.0,
            speech_weight: 0.0,
            label_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_videos: usize,
    pub video_len_s: usize,
    pub fps: f64,
    pub seed: u64,
    pub kinemes: KinemeRecipe,
    pub aus: AuRecipe,
    pub speech: SpeechRecipe,
    pub trait_rule: TraitRule,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_videos: 60,
            video_len_s: 15,
            fps: 30.0,
            seed: 7,
            kinemes: KinemeRecipe::default(),
            aus: AuRecipe::default(),
            speech: SpeechRecipe::default(),
            trait_rule: TraitRule::default(),
        }
    }
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        let k = &self.kinemes;
        let blocks = [
            (k.min_block_s, k.max_block_s),
            (self.aus.min_block_s, self.aus.max_block_s),
            (self.speech.min_block_s, self.speech.max_block_s),
        ];
        if blocks.iter().any(|&(lo, hi)| lo == 0 || hi < lo) {
            return Err(Error::Config("block lengths need 1 <= min <= max".into()));
        }
        if k.n_templates < 2 {
            return Err(Error::Config("at least two kineme templates are needed".into()));
        }
        if self.trait_rule.kineme_template >= k.n_templates {
            return Err(Error::Config(format!(
                "trait template {} outside 0..{}",
                self.trait_rule.kineme_template, k.n_templates
            )));
        }
        if self.aus.target_au >= N_AUS {
            return Err(Error::Config(format!(
                "target AU index {} outside 0..17",
                self.aus.target_au
            )));
        }
        if self.video_len_s < 2 || self.n_videos == 0 || !(self.fps > 0.0) {
            return Err(Error::Config(
                "need videos of at least 2 s and a positive frame rate".into(),
            ));
        }
        let r = &self.trait_rule;
        if [r.kineme_weight, r.au_weight, r.speech_weight, r.label_noise]
            .iter()
            .any(|w| *w < 0.0 || !w.is_finite())
        {
            return Err(Error::Config("trait weights and noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Planted template `j`: a one-second periodic sinusoid on one axis. Axis,
/// harmonic and quadrature phase vary with `j`, so templates are mutually
/// orthogonal over a period.
pub fn template_angles(j: usize, amplitude: f64, t: f64) -> [f64; 3] {
    let axis = j % 3;
    let rest = j / 3;
    let harmonic = (1 + rest / 2) as f64;
    let phase = if rest % 2 == 0 { 0.0 } else { PI / 2.0 };
    let mut out = [0.0; 3];
    out[axis] = amplitude * (2.0 * PI * harmonic * t + phase).sin();
    out
}

/// Template `j` laid out as a segment vector (`[pitch | yaw | roll]` over one
/// window starting at a whole second).
pub fn template_segment(j: usize, amplitude: f64, fps: f64, window_s: f64) -> Vec<f64> {
    let len = (window_s * fps).round() as usize;
    let mut v = vec![0.0; 3 * len];
    for t in 0..len {
        let a = template_angles(j, amplitude, t as f64 / fps);
        for axis in 0..3 {
            v[axis * len + t] = a[axis];
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub kineme: f64,
    pub au: f64,
    pub speech: f64,
}

/// Ground truth of one generated video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoTruth {
    pub video_id: String,
    pub propensity: f64,
    pub score: f64,
    pub measures: Measures,
    /// Planted template per second.
    pub second_templates: Vec<usize>,
    /// Planted template per window; `None` where a window straddles two.
    pub window_templates: Vec<Option<usize>>,
    /// Active AU indices per second.
    pub au_active: Vec<Vec<usize>>,
    pub loud_seconds: Vec<bool>,
    pub f0_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: SynthConfig,
    pub videos: Vec<VideoTruth>,
}

#[derive(Debug, Clone)]
pub struct SyntheticVideo {
    pub truth: VideoTruth,
    pub pose: HeadPoseSeries,
    pub au: AUSeries,
    pub audio: AudioTrack,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub config: SynthConfig,
    pub videos: Vec<SyntheticVideo>,
}

/// Whole-second blocks of random length; each block draws one state.
fn block_schedule<T: Clone>(
    rng: &mut ChaCha8Rng,
    seconds: usize,
    min: usize,
    max: usize,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> T,
) -> Vec<T> {
    let mut out = Vec::with_capacity(seconds);
    while out.len() < seconds {
        let len = rng.random_range(min..=max);
        let state = draw(rng);
        for _ in 0..len.min(seconds - out.len()) {
            out.push(state.clone());
        }
    }
    out
}

fn propensity(rng: &mut ChaCha8Rng, weight: f64, shared: f64) -> f64 {
    let own: f64 = rng.random_range(0.0..1.0);
    if weight > 0.0 {
        shared
    } else {
        own
    }
}

fn generate_video(config: &SynthConfig, v: usize) -> Result<SyntheticVideo> {
    let mut rng = seeded_rng(config.seed, v as u64);
    let video_id = format!("vid{v:03}");
    let secs = config.video_len_s;
    let rule = &config.trait_rule;
    let p: f64 = rng.random_range(0.0..1.0);

    let kin = &config.kinemes;
    let pk = propensity(&mut rng, rule.kineme_weight, p);
    let others: Vec<usize> = (0..kin.n_templates).filter(|&j| j != rule.kineme_template).collect();
    let second_templates = block_schedule(&mut rng, secs, kin.min_block_s, kin.max_block_s, |r| {
        if r.random_bool(pk) {
            rule.kineme_template
        } else {
            others[r.random_range(0..others.len())]
        }
    });

    let aus = &config.aus;
    let pa = propensity(&mut rng, rule.au_weight, p);
    let au_active = block_schedule(&mut rng, secs, aus.min_block_s, aus.max_block_s, |r| {
        (0..N_AUS)
            .filter(|&a| {
                if a == aus.target_au {
                    r.random_bool(pa)
                } else {
                    r.random_bool(aus.background_rate)
                }
            })
            .collect::<Vec<usize>>()
    });

    let sp = &config.speech;
    let ps = propensity(&mut rng, rule.speech_weight, p);
    let speech_blocks = block_schedule(&mut rng, secs, sp.min_block_s, sp.max_block_s, |r| {
        (r.random_bool(ps), r.random_range(sp.f0_min..=sp.f0_max))
    });

    let window = WindowSpec::default();
    let n_frames = (secs as f64 * config.fps).round() as usize;
    let plan = window.plan(n_frames, config.fps)?;
    let window_templates: Vec<Option<usize>> = plan
        .boundaries
        .iter()
        .map(|&(start, end)| {
            let first = (start as f64 / config.fps).floor() as usize;
            let last = (((end - 1) as f64) / config.fps).floor() as usize;
            let j = second_templates[first];
            (first..=last.min(secs - 1))
                .all(|s| second_templates[s] == j)
                .then_some(j)
        })
        .collect();

    let angle_noise = Normal::new(0.0, kin.angle_noise.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let frames: Vec<[f64; 3]> = (0..n_frames)
        .map(|i| {
            let t = i as f64 / config.fps;
            let sec = (t.floor() as usize).min(secs - 1);
            let mut a = template_angles(second_templates[sec], kin.amplitude, t);
            if kin.angle_noise > 0.0 {
                for x in &mut a {
                    *x += angle_noise.sample(&mut rng);
                }
            }
            a
        })
        .collect();
    let pose = HeadPoseSeries::new(video_id.clone(), config.fps, frames)?;

    let jitter = Normal::new(0.0, aus.jitter.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let au_frames: Vec<[f64; N_AUS]> = (0..n_frames)
        .map(|i| {
            let sec = ((i as f64 / config.fps).floor() as usize).min(secs - 1);
            let mut f = [aus.rest_level; N_AUS];
            for &a in &au_active[sec] {
                f[a] = aus.active_level;
            }
            if aus.jitter > 0.0 {
                for x in &mut f {
                    *x += jitter.sample(&mut rng);
                }
            }
            f.map(|x| x.clamp(0.0, 5.0))
        })
        .collect();
    let au = AUSeries::new(video_id.clone(), config.fps, au_frames, None)?;

    let sr = sp.sample_rate as f64;
    let n_samples = secs * sp.sample_rate as usize;
    let mut phase = 0.0;
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let sec = (i as f64 / sr).floor() as usize;
        let (loud, f0) = speech_blocks[sec.min(secs - 1)];
        let amp = if loud { sp.loud_amplitude } else { sp.quiet_amplitude };
        let noise_sd = amp / 2f64.sqrt() * 10f64.powf(-sp.snr_db / 20.0);
        phase += 2.0 * PI * f0 / sr;
        let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
        samples.push((amp * phase.sin() + noise_sd * z).clamp(-1.0, 1.0));
    }
    let audio = AudioTrack::new(video_id.clone(), sp.sample_rate, samples)?;

    let n_windows = window_templates.len() as f64;
    let measures = Measures {
        kineme: window_templates
            .iter()
            .filter(|&&w| w == Some(rule.kineme_template))
            .count() as f64
            / n_windows,
        au: au_active.iter().filter(|a| a.contains(&aus.target_au)).count() as f64 / secs as f64,
        speech: speech_blocks.iter().filter(|b| b.0).count() as f64 / secs as f64,
    };
    let total = rule.kineme_weight + rule.au_weight + rule.speech_weight;
    let clean = if total > 0.0 {
        (rule.kineme_weight * measures.kineme + rule.au_weight * measures.au + rule.speech_weight * measures.speech)
            / total
    } else {
        p
    };
    let noise: f64 = if rule.label_noise > 0.0 {
        let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
        rule.label_noise * z
    } else {
        0.0
    };
    let truth = VideoTruth {
        video_id,
        propensity: p,
        score: (clean + noise).clamp(0.0, 1.0),
        measures,
        second_templates,
        window_templates,
        au_active,
        loud_seconds: speech_blocks.iter().map(|b| b.0).collect(),
        f0_seconds: speech_blocks.iter().map(|b| b.1).collect(),
    };
    Ok(SyntheticVideo { truth, pose, au, audio })
}

/// Generates every video in parallel; video `v` draws from its own stream, so
/// the corpus depends only on the configuration.
pub fn generate_corpus(config: &SynthConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let videos = (0..config.n_videos)
        .into_par_iter()
        .map(|v| generate_video(config, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticCorpus {
        config: config.clone(),
        videos,
    })
}

fn write_pose_openface(path: &Path, pose: &HeadPoseSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "frame",
        "timestamp",
        "confidence",
        "success",
        "pose_Rx",
        "pose_Ry",
        "pose_Rz",
    ])?;
    for (i, f) in pose.frames().iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            format!("{:.3}", i as f64 / pose.fps),
            "0.98".to_string(),
            "1".to_string(),
            f[0].to_string(),
            f[1].to_string(),
            f[2].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_au_openface(path: &Path, au: &AUSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["frame".to_string(), "timestamp".to_string()];
    header.extend((0..N_AUS).map(|a| format!("{}_r", au_name(a))));
    w.write_record(&header)?;
    for (i, f) in au.frames().iter().enumerate() {
        let mut rec = vec![(i + 1).to_string(), format!("{:.3}", i as f64 / au.fps)];
        rec.extend(f.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Directory layout shared by the generator and the corpus loader.
pub struct CorpusLayout;

impl CorpusLayout {
    pub const POSE_DIR: &'static str = crate::pipeline::POSE_DIR;
    pub const AU_DIR: &'static str = crate::pipeline::AU_DIR;
    pub const AUDIO_DIR: &'static str = crate::pipeline::AUDIO_DIR;
    pub const LABELS: &'static str = "labels.csv";
    pub const MANIFEST: &'static str = "manifest.json";
}

impl SyntheticCorpus {
    pub fn manifest(&self) -> Manifest {
        Manifest {
            config: self.config.clone(),
            videos: self.videos.iter().map(|v| v.truth.clone()).collect(),
        }
    }

    pub fn labels(&self) -> TraitLabels {
        TraitLabels {
            trait_name: self.config.trait_rule.name.clone(),
            scores: self
                .videos
                .iter()
                .map(|v| (v.truth.video_id.clone(), v.truth.score))
                .collect(),
        }
    }

    pub fn pose_series(&self) -> Vec<HeadPoseSeries> {
        self.videos.iter().map(|v| v.pose.clone()).collect()
    }

    /// The in-memory streams, as [`crate::pipeline::load_streams`] would read
    /// them back from [`SyntheticCorpus::write`].
    pub fn streams(&self) -> Result<CorpusStreams> {
        CorpusStreams::new(
            self.pose_series(),
            self.videos.iter().map(|v| v.au.clone()).collect(),
            self.videos.iter().map(|v| v.audio.clone()).collect(),
        )
    }

    /// Writes OpenFace-style pose and AU CSVs, PCM-16 WAVs, `labels.csv` and
    /// `manifest.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for sub in [CorpusLayout::POSE_DIR, CorpusLayout::AU_DIR, CorpusLayout::AUDIO_DIR] {
            let p = dir.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        self.videos.par_iter().try_for_each(|v| {
            let id = &v.truth.video_id;
            write_pose_openface(&dir.join(CorpusLayout::POSE_DIR).join(format!("{id}.csv")), &v.pose)?;
            write_au_openface(&dir.join(CorpusLayout::AU_DIR).join(format!("{id}.csv")), &v.au)?;
            v.audio
                .write_wav(&dir.join(CorpusLayout::AUDIO_DIR).join(format!("{id}.wav")))
        })?;
        crate::eval::write_labels(&dir.join(CorpusLayout::LABELS), &[&self.labels()])?;
        let path = dir.join(CorpusLayout::MANIFEST);
        std::fs::write(&path, serde_json::to_string_pretty(&self.manifest())?).map_err(|e| Error::io(&path, e))
    }
}

/// How well a learned codebook recovers the planted templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// Learned kineme matched to each planted template.
    pub matching: Vec<usize>,
    pub cosine: Vec<f64>,
    pub mean_cosine: f64,
    /// Share of single-template windows decoded to the matched kineme.
    pub agreement: f64,
    pub scored_windows: usize,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Matches planted to learned templates by maximum total cosine similarity
/// and scores decoding against the planted window ids.
pub fn codebook_recovery(
    codebook: &KinemeCodebook,
    corpus: &SyntheticCorpus,
    decoded: &[KinemeSequence],
) -> Result<RecoveryReport> {
    let kin = &corpus.config.kinemes;
    let window_s = codebook.windows.window_len_s;
    let planted: Vec<Vec<f64>> = (0..kin.n_templates)
        .map(|j| template_segment(j, kin.amplitude, codebook.fps, window_s))
        .collect();
    let sim: Vec<Vec<f64>> = planted
        .iter()
        .map(|p| {
            (0..codebook.k())
                .map(|l| cosine(p, codebook.template_angles(l).as_slice().expect("contiguous")))
                .collect()
        })
        .collect();
    let matching = best_assignment(&sim)?;
    let cos: Vec<f64> = matching.iter().enumerate().map(|(j, &l)| sim[j][l]).collect();
    let (mut hit, mut total) = (0usize, 0usize);
    for (v, seq) in corpus.videos.iter().zip(decoded) {
        for (w, planted) in v.truth.window_templates.iter().enumerate() {
            if let (Some(j), Some(&id)) = (planted, seq.ids.get(w)) {
                total += 1;
                hit += usize::from(matching[*j] == id);
            }
        }
    }
    Ok(RecoveryReport {
        mean_cosine: cos.iter().sum::<f64>() / cos.len() as f64,
        cosine: cos,
        matching,
        agreement: hit as f64 / total.max(1) as f64,
        scored_windows: total,
    })
}
