use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::ingest::{HeadPoseSeries, WindowSpec};

/// Head-motion segments as columns: `[pitch span | yaw span | roll span]`,
/// shifted by a global constant so every entry is non-negative.
#[derive(Debug, Clone)]
pub struct SegmentMatrix {
    /// `(3 * segment_frames) x n_segments`
    pub data: Array2<f64>,
    pub segment_frames: usize,
    pub fps: f64,
    /// Constant added to every angle before factorization.
    pub shift: f64,
    /// `(video_id, segment index within that video)` for every column.
    pub source_index: Vec<(String, usize)>,
}

impl SegmentMatrix {
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_segments(&self) -> usize {
        self.data.ncols()
    }
}

/// Unshifted segment vector for one window of a pose series.
pub fn segment_vector(series: &HeadPoseSeries, start: usize, len: usize) -> Array1<f64> {
    let frames = &series.frames()[start..start + len];
    let mut v = Array1::zeros(3 * len);
    for (t, f) in frames.iter().enumerate() {
        for axis in 0..3 {
            v[axis * len + t] = f[axis];
        }
    }
    v
}

/// Stacks the windowed segments of every series column-wise and applies the
/// non-negativity shift `c0 = max(0, -min entry)`.
pub fn build_segment_matrix(series: &[HeadPoseSeries], windows: &WindowSpec) -> Result<SegmentMatrix> {
    let first = series
        .first()
        .ok_or_else(|| Error::InsufficientData("no pose series supplied".into()))?;
    let fps = first.fps;
    if let Some(bad) = series.iter().find(|s| (s.fps - fps).abs() > 1e-9) {
        return Err(Error::Config(format!(
            "inconsistent frame rates: {} has {} fps, expected {fps}",
            bad.video_id, bad.fps
        )));
    }
    let segment_frames = windows.window_samples(fps);
    let mut columns = Vec::new();
    let mut source_index = Vec::new();
    for s in series {
        let plan = windows.plan(s.len(), fps)?;
        for (w, &(start, _)) in plan.boundaries.iter().enumerate() {
            columns.push(segment_vector(s, start, segment_frames));
            source_index.push((s.video_id.clone(), w));
        }
    }
    let dim = 3 * segment_frames;
    let mut data = Array2::zeros((dim, columns.len()));
    for (j, col) in columns.iter().enumerate() {
        data.column_mut(j).assign(col);
    }
    let min = data.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = (-min).max(0.0);
    if shift > 0.0 {
        data.mapv_inplace(|v| v + shift);
    }
    Ok(SegmentMatrix {
        data,
        segment_frames,
        fps,
        shift,
        source_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(id: &str, seconds: usize, f: impl Fn(usize) -> [f64; 3]) -> HeadPoseSeries {
        HeadPoseSeries::new(id, 30.0, (0..seconds * 30).map(f).collect()).unwrap()
    }

    #[test]
    fn single_window_series() {
        let s = series("a", 2, |i| [0.01 * i as f64, 0.0, 0.0]);
        let m = build_segment_matrix(&[s], &WindowSpec::default()).unwrap();
        assert_eq!(m.dim(), 180);
        assert_eq!(m.n_segments(), 1);
        assert_eq!(m.data[[59, 0]], 0.59);
        assert_eq!(m.data[[60, 0]], 0.0);
    }

    #[test]
    fn two_clips_give_28_columns() {
        let a = series("a", 15, |i| [(i as f64 * 0.1).sin() * 0.2, 0.0, 0.1]);
        let b = series("b", 15, |i| [0.0, (i as f64 * 0.1).cos() * 0.2, 0.0]);
        let m = build_segment_matrix(&[a, b], &WindowSpec::default()).unwrap();
        assert_eq!(m.n_segments(), 28);
        assert_eq!(m.source_index[14], ("b".to_string(), 0));
        assert!(m.data.iter().all(|&v| v >= 0.0));
        assert!((m.shift - 0.2).abs() < 1e-3);
    }

    #[test]
    fn zero_pose_has_zero_shift() {
        let a = series("z", 3, |_| [0.0; 3]);
        let m = build_segment_matrix(&[a], &WindowSpec::default()).unwrap();
        assert_eq!(m.shift, 0.0);
        assert!(m.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mixed_fps_is_config_error() {
        let a = series("a", 3, |_| [0.0; 3]);
        let b = HeadPoseSeries::new("b", 25.0, vec![[0.0; 3]; 100]).unwrap();
        assert!(matches!(
            build_segment_matrix(&[a, b], &WindowSpec::default()),
            Err(Error::Config(_))
        ));
    }
}
