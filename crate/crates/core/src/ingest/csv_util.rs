use std::path::Path;

use crate::error::{Error, Result};

/// A fully-read CSV with trimmed header names (OpenFace pads them with spaces).
pub(crate) struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<csv::StringRecord>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(std::io::BufReader::new(file));
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                row: i + 1,
                message: e.to_string(),
            })?;
            rows.push(rec);
        }
        Ok(CsvTable { headers, rows })
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.find(name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    }

    /// Parses cell (`row`, `col`); rows are reported 1-based.
    pub fn number(&self, row: usize, col: usize) -> Result<f64> {
        let cell = self.rows[row].get(col).unwrap_or("");
        cell.parse::<f64>().map_err(|_| Error::Parse {
            row: row + 1,
            message: format!("column `{}`: `{cell}` is not a number", self.headers[col]),
        })
    }

    pub fn text(&self, row: usize, col: usize) -> &str {
        self.rows[row].get(col).unwrap_or("")
    }
}

pub(crate) fn video_id_from(table: &CsvTable, column: Option<&str>, path: &Path) -> String {
    column
        .and_then(|c| table.find(c))
        .filter(|_| !table.rows.is_empty())
        .map(|c| table.text(0, c).to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| file_stem(path))
}

pub(crate) fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
