//! Kineme codebook learning and decoding of head-pose series.

mod codebook;
mod gmm;
mod nmf;
mod nnls;
mod segment;

pub use codebook::{learn_codebook, CodebookConfig, CodebookFile, KinemeCodebook, KinemeSequence, CODEBOOK_VERSION};
pub use gmm::{fit_coeff_mixture, CoeffMixture, GmmConfig, VARIANCE_FLOOR};
pub use nmf::{fit_nmf, frobenius_objective, NmfConfig, NmfModel};
pub use nnls::{kkt_residual, nnls, NnlsResult, NnlsSolver, KKT_TOL};
pub use segment::{build_segment_matrix, segment_vector, SegmentMatrix};
