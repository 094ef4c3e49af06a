//! Facial action-unit intensity streams.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::csv_util::{self, CsvTable};
use super::resample_linear;
use crate::error::{Error, Result};

pub const N_AUS: usize = 17;

/// The OpenFace regression AU set, in column order.
pub const AU_NUMBERS: [u8; N_AUS] = [1, 2, 4, 5, 6, 7, 9, 10, 12, 14, 15, 17, 20, 23, 25, 26, 45];

pub const AU_MAX_INTENSITY: f64 = 5.0;

pub fn au_name(index: usize) -> String {
    format!("AU{:02}", AU_NUMBERS[index])
}

pub type AuFrame = [f64; N_AUS];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AUSeries {
    pub video_id: String,
    pub fps: f64,
    frames: Vec<AuFrame>,
    presence: Option<Vec<[bool; N_AUS]>>,
}

impl AUSeries {
    pub fn new(
        video_id: impl Into<String>,
        fps: f64,
        frames: Vec<AuFrame>,
        presence: Option<Vec<[bool; N_AUS]>>,
    ) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidValue(format!("fps must be positive, got {fps}")));
        }
        if frames.is_empty() {
            return Err(Error::InvalidValue("AU series has no frames".into()));
        }
        if let Some(p) = &presence {
            if p.len() != frames.len() {
                return Err(Error::Shape(format!(
                    "{} presence rows for {} frames",
                    p.len(),
                    frames.len()
                )));
            }
        }
        for (i, f) in frames.iter().enumerate() {
            if f.iter().any(|v| !(0.0..=AU_MAX_INTENSITY).contains(v)) {
                return Err(Error::InvalidValue(format!(
                    "frame {i}: AU intensities must lie in [0, 5]"
                )));
            }
        }
        Ok(AUSeries {
            video_id: video_id.into(),
            fps,
            frames,
            presence,
        })
    }

    pub fn frames(&self) -> &[AuFrame] {
        &self.frames
    }

    pub fn presence(&self) -> Option<&[[bool; N_AUS]]> {
        self.presence.as_deref()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn mean_intensity(&self, au: usize) -> f64 {
        self.frames.iter().map(|f| f[au]).sum::<f64>() / self.frames.len() as f64
    }

    /// Linear resampling of intensities; presence flags are dropped.
    pub fn resample(&self, target_fps: f64) -> Result<AUSeries> {
        if (target_fps - self.fps).abs() < 1e-12 {
            return Ok(self.clone());
        }
        let channels: Vec<Vec<f64>> = (0..N_AUS)
            .map(|a| {
                let col: Vec<f64> = self.frames.iter().map(|f| f[a]).collect();
                resample_linear(&col, self.fps, target_fps)
            })
            .collect();
        let frames = (0..channels[0].len())
            .map(|i| std::array::from_fn(|a| channels[a][i]))
            .collect();
        AUSeries::new(self.video_id.clone(), target_fps, frames, None)
    }

    /// Writes `video_id,frame,AU01..AU45` rows.
    pub fn write_canonical<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["video_id".to_string(), "frame".to_string()];
        header.extend((0..N_AUS).map(au_name));
        w.write_record(&header)?;
        for (i, f) in self.frames.iter().enumerate() {
            let mut rec = vec![self.video_id.clone(), i.to_string()];
            rec.extend(f.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<au csv>", e))?;
        Ok(())
    }

    pub fn save_canonical(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_canonical(std::io::BufWriter::new(file))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuColumns {
    pub intensity: Vec<String>,
    /// Visibility columns, captured only when all 17 are present.
    pub presence: Option<Vec<String>>,
    pub video_id: Option<String>,
}

impl Default for AuColumns {
    /// OpenFace 2.x `AUxx_r` / `AUxx_c` names.
    fn default() -> Self {
        AuColumns {
            intensity: (0..N_AUS).map(|a| format!("{}_r", au_name(a))).collect(),
            presence: Some((0..N_AUS).map(|a| format!("{}_c", au_name(a))).collect()),
            video_id: Some("video_id".into()),
        }
    }
}

impl AuColumns {
    pub fn canonical() -> Self {
        AuColumns {
            intensity: (0..N_AUS).map(au_name).collect(),
            presence: None,
            video_id: Some("video_id".into()),
        }
    }
}

/// Reads an AU CSV, clipping intensities to the 0–5 scale.
pub fn parse_au_csv(path: &Path, columns: &AuColumns, fps: f64) -> Result<AUSeries> {
    if columns.intensity.len() != N_AUS {
        return Err(Error::Config(format!(
            "column map lists {} intensity columns, expected {N_AUS}",
            columns.intensity.len()
        )));
    }
    let table = CsvTable::read(path)?;
    let found: Vec<Option<usize>> = columns.intensity.iter().map(|c| table.find(c)).collect();
    let missing: Vec<&str> = columns
        .intensity
        .iter()
        .zip(&found)
        .filter(|(_, f)| f.is_none())
        .map(|(c, _)| c.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!(
            "{} of {N_AUS} AU intensity columns present; missing {}",
            N_AUS - missing.len(),
            missing.join(", ")
        )));
    }
    let idx: Vec<usize> = found.into_iter().flatten().collect();
    let presence_idx: Option<Vec<usize>> = columns
        .presence
        .as_ref()
        .and_then(|names| names.iter().map(|n| table.find(n)).collect());
    let video_id = csv_util::video_id_from(&table, columns.video_id.as_deref(), path);

    let mut frames = Vec::with_capacity(table.rows.len());
    let mut presence = presence_idx.as_ref().map(|_| Vec::with_capacity(table.rows.len()));
    for r in 0..table.rows.len() {
        let mut f = [0.0; N_AUS];
        for (a, &c) in idx.iter().enumerate() {
            f[a] = table.number(r, c)?.clamp(0.0, AU_MAX_INTENSITY);
        }
        frames.push(f);
        if let (Some(pidx), Some(p)) = (&presence_idx, presence.as_mut()) {
            let mut row = [false; N_AUS];
            for (a, &c) in pidx.iter().enumerate() {
                row[a] = table.number(r, c)? > 0.5;
            }
            p.push(row);
        }
    }
    if frames.is_empty() {
        return Err(Error::UnusableStream(format!("{}: no data rows", path.display())));
    }
    AUSeries::new(video_id, fps, frames, presence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn openface_csv(rows: &[[f64; N_AUS]]) -> tempfile::NamedTempFile {
        let cols = AuColumns::default();
        let mut s = cols.intensity.join(",");
        s.push('\n');
        for r in rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(s.as_bytes()).unwrap();
        f
    }

    #[test]
    fn zero_row_is_zero_vector() {
        let f = openface_csv(&[[0.0; N_AUS]]);
        let s = parse_au_csv(f.path(), &AuColumns::default(), 30.0).unwrap();
        assert_eq!(s.frames()[0], [0.0; N_AUS]);
        assert!(s.presence().is_none());
    }

    #[test]
    fn intensities_are_clipped() {
        let mut row = [0.0; N_AUS];
        row[8] = 6.2; // AU12
        let f = openface_csv(&[row]);
        let s = parse_au_csv(f.path(), &AuColumns::default(), 30.0).unwrap();
        assert_eq!(s.frames()[0][8], 5.0);
    }

    #[test]
    fn mean_over_file() {
        let rows: Vec<[f64; N_AUS]> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&v| {
                let mut r = [0.0; N_AUS];
                r[2] = v; // AU04
                r
            })
            .collect();
        let f = openface_csv(&rows);
        let s = parse_au_csv(f.path(), &AuColumns::default(), 30.0).unwrap();
        assert_eq!(s.mean_intensity(2), 2.0);
    }

    #[test]
    fn fewer_than_seventeen_columns_is_schema_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"AU01_r,AU02_r\n1,2\n").unwrap();
        assert!(matches!(
            parse_au_csv(f.path(), &AuColumns::default(), 30.0),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn canonical_round_trip() {
        let frames: Vec<AuFrame> = (0..5)
            .map(|i| std::array::from_fn(|a| ((i * 7 + a) % 11) as f64 * 0.37 % 5.0))
            .collect();
        let s = AUSeries::new("clip", 30.0, frames, None).unwrap();
        let mut buf = Vec::new();
        s.write_canonical(&mut buf).unwrap();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(&buf).unwrap();
        let back = parse_au_csv(f.path(), &AuColumns::canonical(), 30.0).unwrap();
        assert_eq!(back, s);
    }
}
