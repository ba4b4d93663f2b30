//! Dataset manifest: one [`AudioItem`] per JSONL line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::span::Span;

/// On-disk manifest format version, reported by the CLI.
pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// A text query paired with the moment it describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAnnotation {
    pub query: String,
    #[serde(flatten)]
    pub span: Span,
}

/// One long-audio recording and its query-moment annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioItem {
    pub audio_id: String,
    #[serde(default)]
    pub audio_path: String,
    pub duration_s: f64,
    #[serde(default)]
    pub annotations: Vec<MomentAnnotation>,
}

impl AudioItem {
    pub fn validate(&self) -> Result<()> {
        if self.audio_id.is_empty() {
            return Err(Error::invalid("empty audio_id"));
        }
        if !self.duration_s.is_finite() || self.duration_s < 0.0 {
            return Err(Error::invalid(format!(
                "{}: invalid duration {}",
                self.audio_id, self.duration_s
            )));
        }
        let mut prev_start = f64::NEG_INFINITY;
        for ann in &self.annotations {
            if ann.query.is_empty() {
                return Err(Error::invalid(format!("{}: empty query", self.audio_id)));
            }
            ann.span.validate()?;
            if ann.span.end_s > self.duration_s {
                return Err(Error::invalid(format!(
                    "{}: annotation end {} exceeds duration {}",
                    self.audio_id, ann.span.end_s, self.duration_s
                )));
            }
            if ann.span.start_s < prev_start {
                return Err(Error::invalid(format!(
                    "{}: annotations not sorted by start",
                    self.audio_id
                )));
            }
            prev_start = ann.span.start_s;
        }
        Ok(())
    }

    /// Unique queries in first-appearance order, each with all of its spans.
    pub fn grouped_queries(&self) -> Vec<(&str, Vec<Span>)> {
        let mut out: Vec<(&str, Vec<Span>)> = Vec::new();
        for ann in &self.annotations {
            match out.iter_mut().find(|(q, _)| *q == ann.query) {
                Some((_, spans)) => spans.push(ann.span),
                None => out.push((ann.query.as_str(), vec![ann.span])),
            }
        }
        out
    }
}

pub fn write_manifest_to<W: Write>(items: &[AudioItem], mut out: W) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("<manifest>", e))?;
    }
    Ok(())
}

pub fn write_manifest(items: &[AudioItem], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_manifest_to(items, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest_from<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<AudioItem>> {
    let mut items = Vec::new();
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
        let item: AudioItem = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        item.validate().map_err(|e| parse_err(e.to_string()))?;
        items.push(item);
    }
    Ok(items)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<AudioItem>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_manifest_from(BufReader::new(file), path)
}
