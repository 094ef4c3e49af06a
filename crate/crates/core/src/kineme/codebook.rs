use std::path::Path;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gmm::{fit_coeff_mixture, CoeffMixture, GmmConfig};
use super::nmf::{fit_nmf, NmfConfig, NmfModel};
use super::nnls::{NnlsResult, NnlsSolver};
use super::segment::{build_segment_matrix, segment_vector};
use crate::error::{Error, Result};
use crate::ingest::{HeadPoseSeries, WindowSpec};

pub const CODEBOOK_VERSION: u32 = 1;

/// Minimum number of segments per requested kineme.
const SEGMENTS_PER_KINEME: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodebookConfig {
    pub k: usize,
    pub rank: usize,
    pub windows: WindowSpec,
    pub nmf_max_iter: usize,
    pub nmf_tol: f64,
    pub em_max_iter: usize,
    pub em_tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        CodebookConfig {
            k: 16,
            rank: 20,
            windows: WindowSpec::default(),
            nmf_max_iter: 500,
            nmf_tol: 1e-6,
            em_max_iter: 300,
            em_tol: 1e-7,
            restarts: 4,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KinemeCodebook {
    pub nmf: NmfModel,
    pub mixture: CoeffMixture,
    /// `dim x K`, column `i` is `basis * means[i]` in shifted space.
    pub templates: Array2<f64>,
    pub segment_frames: usize,
    pub fps: f64,
    pub shift: f64,
    pub windows: WindowSpec,
    solver: NnlsSolver,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KinemeSequence {
    pub video_id: String,
    pub ids: Vec<usize>,
    pub k: usize,
}

impl KinemeSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn one_hot(&self) -> Vec<Vec<f64>> {
        self.ids
            .iter()
            .map(|&id| {
                let mut v = vec![0.0; self.k];
                v[id] = 1.0;
                v
            })
            .collect()
    }
}

pub fn learn_codebook(series: &[HeadPoseSeries], config: &CodebookConfig) -> Result<KinemeCodebook> {
    let h = build_segment_matrix(series, &config.windows)?;
    if config.rank > h.dim() {
        return Err(Error::Config(format!(
            "rank {} exceeds segment dimension {}",
            config.rank,
            h.dim()
        )));
    }
    let needed = config.k * SEGMENTS_PER_KINEME;
    if h.n_segments() < needed {
        return Err(Error::InsufficientData(format!(
            "{} segments available, at least {needed} needed for {} kinemes",
            h.n_segments(),
            config.k
        )));
    }
    let nmf = fit_nmf(
        &h.data,
        &NmfConfig {
            rank: config.rank,
            max_iter: config.nmf_max_iter,
            tol: config.nmf_tol,
            seed: config.seed,
        },
    )?;
    let points = nmf.coeffs.t().to_owned();
    let mixture = fit_coeff_mixture(
        &points,
        &GmmConfig {
            components: config.k,
            max_iter: config.em_max_iter,
            tol: config.em_tol,
            seed: config.seed,
            restarts: config.restarts,
        },
    )?;
    log::info!(
        "codebook: {} segments, rank {}, K {}, NMF objective {:.4e}",
        h.n_segments(),
        config.rank,
        config.k,
        nmf.final_objective()
    );
    Ok(KinemeCodebook::assemble(
        nmf,
        mixture,
        h.segment_frames,
        h.fps,
        h.shift,
        config.windows,
    ))
}

impl KinemeCodebook {
    fn assemble(
        nmf: NmfModel,
        mixture: CoeffMixture,
        segment_frames: usize,
        fps: f64,
        shift: f64,
        windows: WindowSpec,
    ) -> Self {
        let mut templates = Array2::zeros((nmf.basis.nrows(), mixture.components()));
        for (j, mean) in mixture.means.rows().into_iter().enumerate() {
            templates.column_mut(j).assign(&nmf.basis.dot(&mean));
        }
        let solver = NnlsSolver::new(nmf.basis.clone());
        KinemeCodebook {
            nmf,
            mixture,
            templates,
            segment_frames,
            fps,
            shift,
            windows,
            solver,
        }
    }

    pub fn k(&self) -> usize {
        self.mixture.components()
    }

    pub fn rank(&self) -> usize {
        self.nmf.rank()
    }

    pub fn dim(&self) -> usize {
        3 * self.segment_frames
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.nmf.basis
    }

    /// Template `j` with the shift removed, i.e. as pitch/yaw/roll angles.
    pub fn template_angles(&self, j: usize) -> Array1<f64> {
        self.templates.column(j).mapv(|v| v - self.shift)
    }

    /// Template `j` as a pose series of one segment length.
    pub fn template_series(&self, j: usize) -> Result<HeadPoseSeries> {
        let t = self.template_angles(j);
        let l = self.segment_frames;
        let frames = (0..l)
            .map(|i| {
                [
                    t[i].clamp(-std::f64::consts::PI, std::f64::consts::PI),
                    t[l + i].clamp(-std::f64::consts::PI, std::f64::consts::PI),
                    t[2 * l + i].clamp(-std::f64::consts::PI, std::f64::consts::PI),
                ]
            })
            .collect();
        HeadPoseSeries::new(format!("kineme_{j}"), self.fps, frames)
    }

    /// NNLS coefficients of an unshifted segment vector.
    pub fn project_segment(&self, h: &Array1<f64>) -> Result<NnlsResult> {
        if h.len() != self.dim() {
            return Err(Error::Shape(format!(
                "segment has dimension {}, codebook expects {}",
                h.len(),
                self.dim()
            )));
        }
        let shifted = h.mapv(|v| v + self.shift);
        self.solver.solve(&shifted)
    }

    /// Kineme id of an unshifted segment vector.
    pub fn classify_segment(&self, h: &Array1<f64>) -> Result<usize> {
        let c = self.project_segment(h)?;
        Ok(self.mixture.assign(c.coeffs.view()))
    }

    pub fn decode(&self, series: &HeadPoseSeries) -> Result<KinemeSequence> {
        if (series.fps - self.fps).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "series {} is at {} fps, codebook expects {}",
                series.video_id, series.fps, self.fps
            )));
        }
        let plan = self.windows.plan(series.len(), series.fps)?;
        let ids = plan
            .boundaries
            .par_iter()
            .map(|&(start, _)| self.classify_segment(&segment_vector(series, start, self.segment_frames)))
            .collect::<Result<Vec<_>>>()?;
        Ok(KinemeSequence {
            video_id: series.video_id.clone(),
            ids,
            k: self.k(),
        })
    }

    pub fn to_file(&self) -> CodebookFile {
        let rows = |m: &Array2<f64>| m.rows().into_iter().map(|r| r.to_vec()).collect();
        CodebookFile {
            version: CODEBOOK_VERSION,
            k: self.k(),
            rank: self.rank(),
            segment_frames: self.segment_frames,
            fps: self.fps,
            window_len_s: self.windows.window_len_s,
            hop_s: self.windows.hop_s,
            shift: self.shift,
            basis: rows(&self.nmf.basis),
            weights: self.mixture.weights.clone(),
            means: rows(&self.mixture.means),
            variances: rows(&self.mixture.variances),
        }
    }

    pub fn from_file(file: CodebookFile) -> Result<Self> {
        if file.version != CODEBOOK_VERSION {
            return Err(Error::Schema(format!(
                "codebook version {} not supported",
                file.version
            )));
        }
        let basis = matrix(&file.basis, 3 * file.segment_frames, file.rank, "basis")?;
        let means = matrix(&file.means, file.k, file.rank, "means")?;
        let variances = matrix(&file.variances, file.k, file.rank, "variances")?;
        if file.weights.len() != file.k {
            return Err(Error::Schema("weights length differs from k".into()));
        }
        let windows = WindowSpec::new(file.window_len_s, file.hop_s)?;
        let nmf = NmfModel {
            basis,
            coeffs: Array2::zeros((file.rank, 0)),
            objective_trace: Vec::new(),
        };
        let mixture = CoeffMixture {
            weights: file.weights,
            means,
            variances,
            log_likelihood_trace: Vec::new(),
            reseeds: 0,
        };
        Ok(Self::assemble(
            nmf,
            mixture,
            file.segment_frames,
            file.fps,
            file.shift,
            windows,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_file())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_file(serde_json::from_str(&text)?)
    }
}

fn matrix(rows: &[Vec<f64>], n: usize, m: usize, name: &str) -> Result<Array2<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Schema(format!("{name} is not {n} x {m}")));
    }
    Ok(Array2::from_shape_fn((n, m), |(i, j)| rows[i][j]))
}

/// On-disk codebook layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookFile {
    pub version: u32,
    pub k: usize,
    pub rank: usize,
    pub segment_frames: usize,
    pub fps: f64,
    pub window_len_s: f64,
    pub hop_s: f64,
    pub shift: f64,
    /// `3 * segment_frames` rows of `rank` values
    pub basis: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}
