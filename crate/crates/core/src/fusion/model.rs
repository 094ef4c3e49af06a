use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AlignedSample, Arch, Modality};
use crate::error::{Error, Result};
use crate::eval::Task;
use crate::neural::{softmax, Activation, Dense, LayerNorm, LayerNormCache, Lstm, Network};
use crate::numeric::seeded_rng;

/// Neurons in the attention scoring layer.
pub const ATTENTION_FC: usize = 12;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Per-window modality weights `(kineme, au, speech)`.
pub type AttentionWeights = [f64; 3];

/// Scores each window from the concatenated modality states and mixes the
/// projected, layer-normalized states with the resulting softmax weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionBlock {
    pub fc: Dense,
    pub score: Dense,
    pub norms: Vec<LayerNorm>,
    pub proj: Vec<Dense>,
    pub fusion: Lstm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub arch: Arch,
    pub task: Task,
    pub hidden: usize,
    /// Input dimension of every modality, indexed by [`Modality::index`].
    pub input_dims: [usize; 3],
    /// One encoder per modality used by the architecture, in modality order.
    pub encoders: Vec<Lstm>,
    pub attention: Option<AttentionBlock>,
    pub head: Dense,
    /// Window count the model was trained on; inputs of another length are
    /// rejected when set.
    #[serde(default)]
    pub seq_len: Option<usize>,
}

impl FusionModel {
    pub fn new(arch: Arch, task: Task, input_dims: [usize; 3], hidden: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, 21);
        let mods = arch.modalities();
        let encoders = mods
            .iter()
            .map(|m| Lstm::new(input_dims[m.index()], hidden, &mut rng))
            .collect();
        let (attention, head_in) = if arch.is_attention() {
            let block = AttentionBlock {
                fc: Dense::new(3 * hidden, ATTENTION_FC, &mut rng),
                score: Dense::new(ATTENTION_FC, 3, &mut rng),
                norms: (0..3).map(|_| LayerNorm::new(hidden)).collect(),
                proj: (0..3).map(|_| Dense::new(hidden, hidden, &mut rng)).collect(),
                fusion: Lstm::new(hidden, hidden, &mut rng),
            };
            (Some(block), hidden)
        } else {
            (None, mods.len() * hidden)
        };
        FusionModel {
            arch,
            task,
            hidden,
            input_dims,
            encoders,
            attention,
            head: Dense::new(head_in, 1, &mut rng),
            seq_len: None,
        }
    }

    pub fn with_seq_len(mut self, len: usize) -> Self {
        self.seq_len = Some(len);
        self
    }

    pub fn activation(&self) -> Activation {
        match self.task {
            Task::Cls => Activation::Sigmoid,
            Task::Reg => Activation::Identity,
        }
    }

    fn inputs<'a>(&self, x: &'a AlignedSample) -> Result<Vec<&'a Vec<Vec<f64>>>> {
        let mods = self.arch.modalities();
        let seqs: Vec<_> = mods.iter().map(|&m| x.modality(m)).collect();
        for (m, s) in mods.iter().zip(&seqs) {
            if s.is_empty() {
                return Err(Error::Config(format!("sample {} is missing the {m} modality", x.id)));
            }
        }
        let len = seqs[0].len();
        if seqs.iter().any(|s| s.len() != len) {
            return Err(Error::Shape(format!(
                "sample {}: modality sequences differ in length",
                x.id
            )));
        }
        if let Some(expected) = self.seq_len {
            if len != expected {
                return Err(Error::Shape(format!(
                    "sample {} has {len} windows, model expects {expected}",
                    x.id
                )));
            }
        }
        Ok(seqs)
    }

    /// Prediction plus per-window attention weights for attention models.
    pub fn predict_with_attention(&self, x: &AlignedSample) -> Result<(f64, Option<Vec<AttentionWeights>>)> {
        let pass = self.forward(x)?;
        let weights = pass
            .attention
            .as_ref()
            .map(|a| a.steps.iter().map(|s| [s.w[0], s.w[1], s.w[2]]).collect());
        Ok((pass.output, weights))
    }

    fn forward(&self, x: &AlignedSample) -> Result<ForwardPass> {
        let seqs = self.inputs(x)?;
        let caches = self
            .encoders
            .iter()
            .zip(&seqs)
            .map(|(enc, s)| enc.forward(s))
            .collect::<Result<Vec<_>>>()?;
        let (head_input, attention) = match &self.attention {
            None => (caches.iter().flat_map(|c| c.last_hidden().to_vec()).collect(), None),
            Some(block) => {
                let len = seqs[0].len();
                let mut steps = Vec::with_capacity(len);
                let mut fused = Vec::with_capacity(len);
                for t in 0..len {
                    let a: Vec<f64> = caches.iter().flat_map(|c| c.hs[t].clone()).collect();
                    let r: Vec<f64> = block.fc.forward(&a).iter().map(|v| v.tanh()).collect();
                    let w = softmax(&block.score.forward(&r));
                    let mut ln = Vec::with_capacity(3);
                    let mut normed = Vec::with_capacity(3);
                    let mut projected = Vec::with_capacity(3);
                    let mut u = vec![0.0; self.hidden];
                    for m in 0..3 {
                        let (n, cache) = block.norms[m].forward(&caches[m].hs[t]);
                        let p = block.proj[m].forward(&n);
                        for (ui, pi) in u.iter_mut().zip(&p) {
                            *ui += w[m] * pi;
                        }
                        ln.push(cache);
                        normed.push(n);
                        projected.push(p);
                    }
                    fused.push(u);
                    steps.push(AttentionStep {
                        a,
                        r,
                        w,
                        ln,
                        normed,
                        projected,
                    });
                }
                let fcache = block.fusion.forward(&fused)?;
                (
                    fcache.last_hidden().to_vec(),
                    Some(AttentionPass { steps, fusion: fcache }),
                )
            }
        };
        let output = self.activation().apply(self.head.forward(&head_input)[0]);
        Ok(ForwardPass {
            caches,
            head_input,
            attention,
            output,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ck = Checkpoint {
            version: CHECKPOINT_VERSION,
            model: self.clone(),
        };
        std::fs::write(path, serde_json::to_string(&ck)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "checkpoint version {} not supported",
                ck.version
            )));
        }
        Ok(ck.model)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    model: FusionModel,
}

struct AttentionStep {
    a: Vec<f64>,
    r: Vec<f64>,
    w: Vec<f64>,
    ln: Vec<LayerNormCache>,
    normed: Vec<Vec<f64>>,
    projected: Vec<Vec<f64>>,
}

struct AttentionPass {
    steps: Vec<AttentionStep>,
    fusion: crate::neural::LstmCache,
}

struct ForwardPass {
    caches: Vec<crate::neural::LstmCache>,
    head_input: Vec<f64>,
    attention: Option<AttentionPass>,
    output: f64,
}

impl Network for FusionModel {
    type Input = AlignedSample;

    fn predict(&self, x: &AlignedSample) -> Result<f64> {
        Ok(self.forward(x)?.output)
    }

    fn accumulate_gradient(&self, x: &AlignedSample, d_out: &dyn Fn(f64) -> f64, grad: &mut Self) -> Result<f64> {
        let pass = self.forward(x)?;
        let y = pass.output;
        let dz = d_out(y) * self.activation().derivative(y);
        let d_head = self.head.backward(&pass.head_input, &[dz], &mut grad.head);
        let h = self.hidden;
        let len = pass.caches[0].hs.len();
        let mut dhs: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; h]; len]; self.encoders.len()];

        match (&self.attention, &pass.attention) {
            (Some(block), Some(att)) => {
                let gblock = grad.attention.as_mut().unwrap();
                let mut d_fused_last = vec![vec![0.0; h]; len];
                d_fused_last[len - 1] = d_head;
                let du = block.fusion.backward(&att.fusion, &d_fused_last, &mut gblock.fusion);
                for (t, step) in att.steps.iter().enumerate() {
                    let mut dw = [0.0; 3];
                    for m in 0..3 {
                        dw[m] = du[t].iter().zip(&step.projected[m]).map(|(a, b)| a * b).sum();
                        let dp: Vec<f64> = du[t].iter().map(|v| v * step.w[m]).collect();
                        let dn = block.proj[m].backward(&step.normed[m], &dp, &mut gblock.proj[m]);
                        let dh = block.norms[m].backward(&step.ln[m], &dn, &mut gblock.norms[m]);
                        for (acc, v) in dhs[m][t].iter_mut().zip(dh) {
                            *acc += v;
                        }
                    }
                    let wdw: f64 = (0..3).map(|m| step.w[m] * dw[m]).sum();
                    let ds: Vec<f64> = (0..3).map(|m| step.w[m] * (dw[m] - wdw)).collect();
                    let dr = block.score.backward(&step.r, &ds, &mut gblock.score);
                    let dpre: Vec<f64> = dr.iter().zip(&step.r).map(|(d, r)| d * (1.0 - r * r)).collect();
                    let da = block.fc.backward(&step.a, &dpre, &mut gblock.fc);
                    for m in 0..3 {
                        for (acc, v) in dhs[m][t].iter_mut().zip(&da[m * h..(m + 1) * h]) {
                            *acc += v;
                        }
                    }
                }
            }
            _ => {
                for (m, dh) in dhs.iter_mut().enumerate() {
                    dh[len - 1].copy_from_slice(&d_head[m * h..(m + 1) * h]);
                }
            }
        }
        for (m, enc) in self.encoders.iter().enumerate() {
            enc.backward(&pass.caches[m], &dhs[m], &mut grad.encoders[m]);
        }
        Ok(y)
    }

    fn zeros_like(&self) -> Self {
        let h = self.hidden;
        FusionModel {
            arch: self.arch,
            task: self.task,
            hidden: h,
            input_dims: self.input_dims,
            encoders: self.encoders.iter().map(|e| Lstm::zeros(e.input_dim, h)).collect(),
            attention: self.attention.as_ref().map(|_| AttentionBlock {
                fc: Dense::zeros(3 * h, ATTENTION_FC),
                score: Dense::zeros(ATTENTION_FC, 3),
                norms: (0..3).map(|_| LayerNorm::zeros(h)).collect(),
                proj: (0..3).map(|_| Dense::zeros(h, h)).collect(),
                fusion: Lstm::zeros(h, h),
            }),
            head: Dense::zeros(self.head.input_dim, 1),
            seq_len: self.seq_len,
        }
    }

    fn params(&self) -> Vec<&[f64]> {
        let mut p: Vec<&[f64]> = self.encoders.iter().flat_map(|e| e.params()).collect();
        if let Some(b) = &self.attention {
            p.extend(b.fc.params());
            p.extend(b.score.params());
            for n in &b.norms {
                p.extend(n.params());
            }
            for d in &b.proj {
                p.extend(d.params());
            }
            p.extend(b.fusion.params());
        }
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p: Vec<&mut [f64]> = self.encoders.iter_mut().flat_map(|e| e.params_mut()).collect();
        if let Some(b) = &mut self.attention {
            p.extend(b.fc.params_mut());
            p.extend(b.score.params_mut());
            for n in &mut b.norms {
                p.extend(n.params_mut());
            }
            for d in &mut b.proj {
                p.extend(d.params_mut());
            }
            p.extend(b.fusion.params_mut());
        }
        p.extend(self.head.params_mut());
        p
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
