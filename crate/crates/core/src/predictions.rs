//! Retrieval predictions: one JSONL row per (audio, query) pair.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ScoredSpan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub audio_id: String,
    pub query: String,
    #[serde(default)]
    pub candidates: Vec<ScoredSpan>,
}

impl PredictionRow {
    fn validate(&self) -> Result<()> {
        for c in &self.candidates {
            c.span.validate()?;
            if !c.confidence.is_finite() {
                return Err(Error::invalid(format!(
                    "{}: non-finite confidence",
                    self.audio_id
                )));
            }
        }
        Ok(())
    }
}

pub fn write_predictions_to<W: Write>(rows: &[PredictionRow], mut out: W) -> Result<()> {
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("<predictions>", e))?;
    }
    Ok(())
}

pub fn write_predictions(rows: &[PredictionRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_predictions_to(rows, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions_from<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<PredictionRow>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            reason,
        };
        let row: PredictionRow =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        row.validate().map_err(|e| parse_err(e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions_from(BufReader::new(file), path)
}
