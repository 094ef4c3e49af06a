//! Head-pose streams: OpenFace-style CSV input and the canonical dump format.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::csv_util::{self, CsvTable};
use super::resample_linear;
use crate::error::{Error, Result};

/// Per-frame (pitch, yaw, roll) in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadPoseSeries {
    pub video_id: String,
    pub fps: f64,
    frames: Vec<[f64; 3]>,
}

impl HeadPoseSeries {
    pub fn new(video_id: impl Into<String>, fps: f64, frames: Vec<[f64; 3]>) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidValue(format!("fps must be positive, got {fps}")));
        }
        if frames.is_empty() {
            return Err(Error::InvalidValue("pose series has no frames".into()));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.iter().any(|a| !a.is_finite() || a.abs() > std::f64::consts::PI) {
                return Err(Error::InvalidValue(format!(
                    "frame {i}: angles must be finite and within [-pi, pi], got {f:?}"
                )));
            }
        }
        Ok(HeadPoseSeries {
            video_id: video_id.into(),
            fps,
            frames,
        })
    }

    pub fn frames(&self) -> &[[f64; 3]] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f[axis]).collect()
    }

    /// Linear-interpolation resampling to `target_fps`. Identity when rates match.
    pub fn resample(&self, target_fps: f64) -> Result<HeadPoseSeries> {
        if (target_fps - self.fps).abs() < 1e-12 {
            return Ok(self.clone());
        }
        let axes: Vec<Vec<f64>> = (0..3)
            .map(|a| resample_linear(&self.axis(a), self.fps, target_fps))
            .collect();
        let frames = (0..axes[0].len())
            .map(|i| [axes[0][i], axes[1][i], axes[2][i]])
            .collect();
        HeadPoseSeries::new(self.video_id.clone(), target_fps, frames)
    }

    /// Writes `video_id,frame,pitch,yaw,roll` rows. Floats use the shortest
    /// round-trip representation so re-parsing is bit-exact.
    pub fn write_canonical<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["video_id", "frame", "pitch", "yaw", "roll"])?;
        for (i, f) in self.frames.iter().enumerate() {
            w.write_record([
                self.video_id.clone(),
                i.to_string(),
                f[0].to_string(),
                f[1].to_string(),
                f[2].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<pose csv>", e))?;
        Ok(())
    }

    pub fn save_canonical(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_canonical(std::io::BufWriter::new(file))
    }
}

/// Column names to read from a pose CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseColumns {
    pub pitch: String,
    pub yaw: String,
    pub roll: String,
    /// Tracking confidence column. Ignored when absent from the file.
    pub confidence: Option<String>,
    pub video_id: Option<String>,
}

impl Default for PoseColumns {
    /// OpenFace 2.x names.
    fn default() -> Self {
        PoseColumns {
            pitch: "pose_Rx".into(),
            yaw: "pose_Ry".into(),
            roll: "pose_Rz".into(),
            confidence: Some("confidence".into()),
            video_id: Some("video_id".into()),
        }
    }
}

impl PoseColumns {
    /// Names used by [`HeadPoseSeries::write_canonical`].
    pub fn canonical() -> Self {
        PoseColumns {
            pitch: "pitch".into(),
            yaw: "yaw".into(),
            roll: "roll".into(),
            confidence: None,
            video_id: Some("video_id".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseCsvOptions {
    pub columns: PoseColumns,
    pub fps: f64,
    /// Rows with confidence strictly below this are treated as failed tracking.
    pub confidence_threshold: f64,
}

impl Default for PoseCsvOptions {
    fn default() -> Self {
        PoseCsvOptions {
            columns: PoseColumns::default(),
            fps: 30.0,
            confidence_threshold: 0.75,
        }
    }
}

/// Reads a pose CSV. Failed-tracking rows are filled by linear interpolation
/// between the nearest valid neighbours; leading and trailing failures copy
/// the nearest valid frame.
pub fn parse_pose_csv(path: &Path, options: &PoseCsvOptions) -> Result<HeadPoseSeries> {
    let table = CsvTable::read(path)?;
    let cols = &options.columns;
    let idx = [
        table.require(&cols.pitch)?,
        table.require(&cols.yaw)?,
        table.require(&cols.roll)?,
    ];
    let conf_idx = cols.confidence.as_deref().and_then(|c| table.find(c));
    let video_id = csv_util::video_id_from(&table, cols.video_id.as_deref(), path);

    let mut frames = Vec::with_capacity(table.rows.len());
    let mut valid = Vec::with_capacity(table.rows.len());
    for (r, _) in table.rows.iter().enumerate() {
        let mut f = [0.0; 3];
        for (a, &c) in idx.iter().enumerate() {
            f[a] = table.number(r, c)?;
        }
        let ok = match conf_idx {
            Some(c) => table.number(r, c)? >= options.confidence_threshold,
            None => true,
        };
        frames.push(f);
        valid.push(ok);
    }
    if frames.is_empty() {
        return Err(Error::UnusableStream(format!("{}: no data rows", path.display())));
    }
    if !valid.iter().any(|&v| v) {
        return Err(Error::UnusableStream(format!(
            "{}: every row failed tracking",
            path.display()
        )));
    }
    fill_failed_frames(&mut frames, &valid);
    HeadPoseSeries::new(video_id, options.fps, frames)
}

/// Replaces invalid frames in place by interpolating between valid neighbours.
pub(crate) fn fill_failed_frames<const D: usize>(frames: &mut [[f64; D]], valid: &[bool]) {
    let valid_idx: Vec<usize> = (0..frames.len()).filter(|&i| valid[i]).collect();
    let Some(&first) = valid_idx.first() else {
        return;
    };
    let last = *valid_idx.last().unwrap();
    for i in 0..first {
        frames[i] = frames[first];
    }
    for i in last + 1..frames.len() {
        frames[i] = frames[last];
    }
    for pair in valid_idx.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a < 2 {
            continue;
        }
        let (fa, fb) = (frames[a], frames[b]);
        for i in a + 1..b {
            let t = (i - a) as f64 / (b - a) as f64;
            for d in 0..D {
                frames[i][d] = fa[d] + t * (fb[d] - fa[d]);
            }
        }
    }
}
