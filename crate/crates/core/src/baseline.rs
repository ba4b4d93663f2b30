//! Sliding-window similarity baseline.
//!
//! Window embeddings are compared with the query embedding, thresholded into
//! a binary activity sequence, smoothed with a median filter, and each run of
//! active windows becomes a candidate whose confidence is the mean similarity
//! over the run.

use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine, EmbeddingStore};
use crate::error::{Error, Result};
use crate::metrics::{self, QueryResult, ScoredSpan};
use crate::span::Span;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub threshold: f64,
    pub median_len: usize,
    pub window_s: f64,
    pub hop_s: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            threshold: 0.5,
            median_len: 1,
            window_s: 1.0,
            hop_s: 1.0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.median_len.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "median length must be odd, got {}",
                self.median_len
            )));
        }
        if self.window_s.is_nan()
            || self.window_s <= 0.0
            || self.hop_s.is_nan()
            || self.hop_s <= 0.0
        {
            return Err(Error::invalid("window_s and hop_s must be > 0"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::invalid("threshold must be finite"));
        }
        Ok(())
    }
}

/// Cosine similarity of the query to each audio window, in time order.
pub fn similarity_curve(audio: &EmbeddingStore, query: &EmbeddingStore) -> Result<Vec<f64>> {
    if audio.dim() != query.dim() {
        return Err(Error::DimensionMismatch {
            left: audio.dim(),
            right: query.dim(),
        });
    }
    if query.rows() != 1 {
        return Err(Error::invalid(format!(
            "query store must hold one pooled row, found {}",
            query.rows()
        )));
    }
    let q = query.row(0);
    audio.iter_rows().map(|row| cosine(row, q)).collect()
}

pub fn binarize(sims: &[f64], threshold: f64) -> Vec<bool> {
    sims.iter().map(|&s| s >= threshold).collect()
}

/// Majority vote over a centred window of odd length `m`, zero-padded at
/// both ends.
pub fn median_filter(bits: &[bool], m: usize) -> Result<Vec<bool>> {
    if m.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "median length must be odd, got {m}"
        )));
    }
    let half = m / 2;
    let need = half + 1;
    // Prefix sums make each window count O(1).
    let mut prefix = Vec::with_capacity(bits.len() + 1);
    prefix.push(0usize);
    for &b in bits {
        prefix.push(prefix.last().unwrap() + usize::from(b));
    }
    Ok((0..bits.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(bits.len());
            prefix[hi] - prefix[lo] >= need
        })
        .collect())
}

/// Turns runs of active windows into candidates sorted by confidence.
///
/// A run over window indices `a..=b` spans `[a·hop, b·hop + window]`, clipped
/// to the audio duration.
pub fn extract_moments(
    bits: &[bool],
    sims: &[f64],
    hop_s: f64,
    window_s: f64,
    duration_s: f64,
) -> Result<Vec<ScoredSpan>> {
    if bits.len() != sims.len() {
        return Err(Error::DimensionMismatch {
            left: bits.len(),
            right: sims.len(),
        });
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < bits.len() {
        if !bits[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < bits.len() && bits[i] {
            i += 1;
        }
        let end = i - 1;
        let run = &sims[start..=end];
        let confidence = run.iter().sum::<f64>() / run.len() as f64;
        let s = (start as f64 * hop_s).min(duration_s);
        let e = (end as f64 * hop_s + window_s).min(duration_s);
        out.push(ScoredSpan {
            span: Span {
                start_s: s,
                end_s: e.max(s),
            },
            confidence,
        });
    }
    // Stable: equal confidences keep time order.
    out.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    Ok(out)
}

/// Candidates from a precomputed similarity curve.
pub fn retrieve_from_curve(
    sims: &[f64],
    cfg: &BaselineConfig,
    duration_s: f64,
) -> Result<Vec<ScoredSpan>> {
    cfg.validate()?;
    let bits = median_filter(&binarize(sims, cfg.threshold), cfg.median_len)?;
    extract_moments(&bits, sims, cfg.hop_s, cfg.window_s, duration_s)
}

fn check_windows(audio: &EmbeddingStore, cfg: &BaselineConfig) -> Result<()> {
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
    if !same(audio.window_s, cfg.window_s) || !same(audio.hop_s, cfg.hop_s) {
        return Err(Error::invalid(format!(
            "store windows ({} s, hop {} s) differ from configured ({} s, hop {} s)",
            audio.window_s, audio.hop_s, cfg.window_s, cfg.hop_s
        )));
    }
    Ok(())
}

/// End-to-end retrieval, clipping spans to the extent covered by the store.
pub fn retrieve(
    audio: &EmbeddingStore,
    query: &EmbeddingStore,
    cfg: &BaselineConfig,
) -> Result<Vec<ScoredSpan>> {
    retrieve_within(audio, query, cfg, audio.covered_duration())
}

/// End-to-end retrieval with an explicit audio duration.
pub fn retrieve_within(
    audio: &EmbeddingStore,
    query: &EmbeddingStore,
    cfg: &BaselineConfig,
    duration_s: f64,
) -> Result<Vec<ScoredSpan>> {
    check_windows(audio, cfg)?;
    let sims = similarity_curve(audio, query)?;
    retrieve_from_curve(&sims, cfg, duration_s)
}

/// One validation query with its similarity curve precomputed.
#[derive(Debug, Clone)]
pub struct TuningQuery {
    pub similarities: Vec<f64>,
    pub ground_truths: Vec<Span>,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub config: BaselineConfig,
    pub avg_map: f64,
}

/// Default threshold grid 0.00, 0.05, …, 0.90.
pub fn default_threshold_grid() -> Vec<f64> {
    (0..=18).map(|i| (5 * i) as f64 / 100.0).collect()
}

/// Default median lengths 1, 3, …, 31.
pub fn default_median_grid() -> Vec<usize> {
    (0..16).map(|i| 2 * i + 1).collect()
}

/// Average mAP of a configuration over the validation queries.
pub fn score_config(queries: &[TuningQuery], cfg: &BaselineConfig) -> Result<f64> {
    let results = queries
        .iter()
        .map(|q| {
            Ok(QueryResult {
                ground_truths: q.ground_truths.clone(),
                candidates: retrieve_from_curve(&q.similarities, cfg, q.duration_s)?,
                duration_s: q.duration_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    metrics::avg_map(&results)
}

/// Grid search maximizing average mAP; ties prefer the smaller median
/// length, then the smaller threshold.
pub fn tune(
    queries: &[TuningQuery],
    thresholds: &[f64],
    medians: &[usize],
    window_s: f64,
    hop_s: f64,
) -> Result<TuneOutcome> {
    if thresholds.is_empty() || medians.is_empty() {
        return Err(Error::invalid("tuning grids must be non-empty"));
    }
    let mut medians = medians.to_vec();
    medians.sort_unstable();
    medians.dedup();
    let mut thresholds = thresholds.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let mut best: Option<TuneOutcome> = None;
    for &m in &medians {
        for &t in &thresholds {
            let config = BaselineConfig {
                threshold: t,
                median_len: m,
                window_s,
                hop_s,
            };
            let score = score_config(queries, &config)?;
            if best.is_none_or(|b| score > b.avg_map) {
                best = Some(TuneOutcome {
                    config,
                    avg_map: score,
                });
            }
        }
    }
    Ok(best.expect("non-empty grid"))
}
