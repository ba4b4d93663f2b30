//! Retrieval metrics (R1@θ, mAP@θ, average mAP) and frame-level sound event
//! detection scores.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::span::Span;

/// θ values reported for R1.
pub const R1_THRESHOLDS: [f64; 2] = [0.5, 0.7];
/// θ values reported individually for mAP.
pub const MAP_THRESHOLDS: [f64; 2] = [0.5, 0.75];

/// The ten IoU thresholds 0.50, 0.55, …, 0.95 averaged by [`avg_map`].
pub fn avg_map_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

/// A candidate resolved to absolute seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpan {
    #[serde(flatten)]
    pub span: Span,
    pub confidence: f64,
}

/// Ground truth and candidates for one (audio, query) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub ground_truths: Vec<Span>,
    pub candidates: Vec<ScoredSpan>,
    pub duration_s: f64,
}

impl QueryResult {
    /// Candidates by confidence descending; ties go to the earlier start,
    /// then to input order.
    pub fn ranked(&self) -> Vec<ScoredSpan> {
        let mut out = self.candidates.clone();
        out.sort_by(|a, b| {
            b.confidence
                .total_cmp(&a.confidence)
                .then(a.span.start_s.total_cmp(&b.span.start_s))
        });
        out
    }

    fn best_iou(&self, span: &Span) -> f64 {
        self.ground_truths
            .iter()
            .map(|g| g.iou(span))
            .fold(0.0, f64::max)
    }
}

fn require_results(results: &[QueryResult]) -> Result<()> {
    if results.is_empty() {
        return Err(Error::invalid("no query results to evaluate"));
    }
    Ok(())
}

/// Percentage of queries whose top-ranked candidate reaches IoU ≥ θ with any
/// ground truth. A query without candidates counts as a miss.
pub fn recall1_at(results: &[QueryResult], theta: f64) -> Result<f64> {
    require_results(results)?;
    let hits = results
        .iter()
        .filter(|r| {
            r.ranked()
                .first()
                .is_some_and(|top| r.best_iou(&top.span) >= theta)
        })
        .count();
    Ok(100.0 * hits as f64 / results.len() as f64)
}

/// Non-interpolated average precision for one query.
///
/// Walking down the ranking, a candidate is a true positive when its best
/// IoU against a not-yet-matched ground truth reaches θ; that ground truth is
/// then consumed. AP is the sum of precision at each true positive divided by
/// the number of ground truths.
pub fn average_precision(result: &QueryResult, theta: f64) -> Result<f64> {
    if result.ground_truths.is_empty() {
        return Err(Error::invalid(
            "average precision needs at least one ground truth",
        ));
    }
    let mut matched = vec![false; result.ground_truths.len()];
    let mut tp = 0usize;
    let mut sum_precision = 0.0;
    for (rank, cand) in result.ranked().iter().enumerate() {
        let best = result
            .ground_truths
            .iter()
            .enumerate()
            .filter(|(i, _)| !matched[*i])
            .map(|(i, g)| (i, g.iou(&cand.span)))
            .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((i, v)),
            });
        if let Some((gi, v)) = best {
            if v >= theta {
                matched[gi] = true;
                tp += 1;
                sum_precision += tp as f64 / (rank + 1) as f64;
            }
        }
    }
    Ok(sum_precision / result.ground_truths.len() as f64)
}

/// Mean AP over queries, as a percentage.
pub fn map_at(results: &[QueryResult], theta: f64) -> Result<f64> {
    require_results(results)?;
    let mut total = 0.0;
    for r in results {
        total += average_precision(r, theta)?;
    }
    Ok(100.0 * total / results.len() as f64)
}

/// Mean of mAP@θ over [`avg_map_thresholds`].
pub fn avg_map(results: &[QueryResult]) -> Result<f64> {
    let thetas = avg_map_thresholds();
    let mut total = 0.0;
    for &t in &thetas {
        total += map_at(results, t)?;
    }
    Ok(total / thetas.len() as f64)
}

/// Formats θ as used for report keys: `0.5`, `0.7`, `0.75`.
pub fn theta_key(theta: f64) -> String {
    let s = format!("{theta:.2}");
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub r1_at: BTreeMap<String, f64>,
    pub map_at: BTreeMap<String, f64>,
    pub avg_map: f64,
    pub queries: usize,
}

/// Computes R1 and mAP at the given thresholds plus average mAP.
pub fn evaluate(
    results: &[QueryResult],
    r1_thetas: &[f64],
    map_thetas: &[f64],
) -> Result<MetricReport> {
    let mut r1 = BTreeMap::new();
    for &t in r1_thetas {
        r1.insert(theta_key(t), recall1_at(results, t)?);
    }
    let mut map = BTreeMap::new();
    for &t in map_thetas {
        map.insert(theta_key(t), map_at(results, t)?);
    }
    Ok(MetricReport {
        r1_at: r1,
        map_at: map,
        avg_map: avg_map(results)?,
        queries: results.len(),
    })
}

/// Frame-level counts pooled over classes and recordings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SedScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl FrameCounts {
    /// Rasterizes one recording and adds its counts.
    ///
    /// Each class gets `⌈duration / frame_s⌉` frames; a frame is active when
    /// some span covers its midpoint.
    pub fn add_recording(
        &mut self,
        predicted: &BTreeMap<String, Vec<Span>>,
        reference: &BTreeMap<String, Vec<Span>>,
        duration_s: f64,
        frame_s: f64,
    ) -> Result<()> {
        if frame_s.is_nan() || frame_s <= 0.0 || !duration_s.is_finite() || duration_s < 0.0 {
            return Err(Error::invalid(format!(
                "invalid frame {frame_s} or duration {duration_s}"
            )));
        }
        let frames = (duration_s / frame_s).ceil() as usize;
        let classes: BTreeSet<&String> = predicted.keys().chain(reference.keys()).collect();
        let empty = Vec::new();
        for class in classes {
            let pred = predicted.get(class).unwrap_or(&empty);
            let gt = reference.get(class).unwrap_or(&empty);
            for i in 0..frames {
                let mid = (i as f64 + 0.5) * frame_s;
                let p = pred.iter().any(|s| s.covers(mid));
                let g = gt.iter().any(|s| s.covers(mid));
                match (p, g) {
                    (true, true) => self.true_positive += 1,
                    (true, false) => self.false_positive += 1,
                    (false, true) => self.false_negative += 1,
                    (false, false) => {}
                }
            }
        }
        Ok(())
    }

    pub fn predicted_positive(&self) -> u64 {
        self.true_positive + self.false_positive
    }

    /// Micro-averaged scores in percent; undefined ratios are reported as 0.
    pub fn scores(&self) -> SedScores {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let p = ratio(self.true_positive, self.true_positive + self.false_positive);
        let r = ratio(self.true_positive, self.true_positive + self.false_negative);
        let f1 = if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        };
        SedScores {
            precision: 100.0 * p,
            recall: 100.0 * r,
            f1: 100.0 * f1,
        }
    }
}

/// Frame-level micro precision/recall/F1 for a single recording.
pub fn sed_frame_metrics(
    predicted: &BTreeMap<String, Vec<Span>>,
    reference: &BTreeMap<String, Vec<Span>>,
    duration_s: f64,
    frame_s: f64,
) -> Result<SedScores> {
    let mut counts = FrameCounts::default();
    counts.add_recording(predicted, reference, duration_s, frame_s)?;
    Ok(counts.scores())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(a: f64, b: f64) -> Span {
        Span::new(a, b).unwrap()
    }

    fn cand(a: f64, b: f64, c: f64) -> ScoredSpan {
        ScoredSpan {
            span: span(a, b),
            confidence: c,
        }
    }

    fn query(gts: &[(f64, f64)], cands: &[ScoredSpan]) -> QueryResult {
        QueryResult {
            ground_truths: gts.iter().map(|&(a, b)| span(a, b)).collect(),
            candidates: cands.to_vec(),
            duration_s: 60.0,
        }
    }

    #[test]
    fn threshold_grid() {
        let g = avg_map_thresholds();
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.5);
        assert_eq!(g[9], 0.95);
        for w in g.windows(2) {
            assert!((w[1] - w[0] - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn recall_examples() {
        let exact = [query(&[(16.0, 44.0)], &[cand(16.0, 44.0, 0.9)])];
        for t in avg_map_thresholds() {
            assert_eq!(recall1_at(&exact, t).unwrap(), 100.0);
        }
        assert_eq!(recall1_at(&exact, 1.0).unwrap(), 100.0);
        let shifted = [query(&[(16.0, 44.0)], &[cand(20.0, 50.0, 0.9)])];
        assert_eq!(recall1_at(&shifted, 0.5).unwrap(), 100.0);
        assert_eq!(recall1_at(&shifted, 0.75).unwrap(), 0.0);
        assert!(recall1_at(&[], 0.5).is_err());
    }

    #[test]
    fn recall_uses_top_ranked_only() {
        let q = [query(
            &[(0.0, 10.0)],
            &[cand(30.0, 40.0, 0.9), cand(0.0, 10.0, 0.8)],
        )];
        assert_eq!(recall1_at(&q, 0.5).unwrap(), 0.0);
        let none = [query(&[(0.0, 10.0)], &[])];
        assert_eq!(recall1_at(&none, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn ap_examples() {
        let q = query(&[(10.0, 20.0)], &[cand(10.0, 20.0, 0.9)]);
        assert_eq!(average_precision(&q, 0.5).unwrap(), 1.0);
        let q = query(
            &[(10.0, 20.0)],
            &[cand(40.0, 50.0, 0.9), cand(10.0, 20.0, 0.5)],
        );
        assert_eq!(average_precision(&q, 0.5).unwrap(), 0.5);
        let q = query(
            &[(0.0, 10.0), (30.0, 40.0)],
            &[cand(0.0, 10.0, 0.9), cand(30.0, 40.0, 0.8)],
        );
        assert_eq!(average_precision(&q, 0.5).unwrap(), 1.0);
        assert!(average_precision(&query(&[], &[]), 0.5).is_err());
    }

    #[test]
    fn ap_consumes_matched_ground_truth() {
        // Both candidates hit the same single ground truth; only the first counts.
        let q = query(
            &[(10.0, 20.0)],
            &[cand(10.0, 20.0, 0.9), cand(10.0, 20.0, 0.8)],
        );
        assert_eq!(average_precision(&q, 0.5).unwrap(), 1.0);
        let q = query(
            &[(0.0, 10.0), (30.0, 40.0)],
            &[
                cand(0.0, 10.0, 0.9),
                cand(0.5, 10.0, 0.8),
                cand(30.0, 40.0, 0.7),
            ],
        );
        assert!((average_precision(&q, 0.5).unwrap() - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn fig1_shaped_case_avg_map_50() {
        let q = [query(&[(16.0, 44.0)], &[cand(20.0, 50.0, 0.7)])];
        assert_eq!(map_at(&q, 0.5).unwrap(), 100.0);
        assert_eq!(map_at(&q, 0.75).unwrap(), 0.0);
        // θ ∈ {0.50, …, 0.70} pass, 0.75..0.95 fail.
        let passing = avg_map_thresholds()
            .iter()
            .filter(|&&t| 24.0 / 34.0 >= t)
            .count();
        assert_eq!(passing, 5);
        assert_eq!(avg_map(&q).unwrap(), 50.0);
    }

    #[test]
    fn ties_break_by_earlier_start() {
        let q = query(&[(0.0, 5.0)], &[cand(30.0, 35.0, 0.5), cand(0.0, 5.0, 0.5)]);
        assert_eq!(q.ranked()[0].span.start_s, 0.0);
        assert_eq!(recall1_at(std::slice::from_ref(&q), 0.9).unwrap(), 100.0);
    }

    #[test]
    fn report_keys() {
        assert_eq!(theta_key(0.5), "0.5");
        assert_eq!(theta_key(0.75), "0.75");
        assert_eq!(theta_key(0.7), "0.7");
        let q = [query(&[(1.0, 5.0)], &[cand(1.0, 5.0, 1.0)])];
        let r = evaluate(&q, &R1_THRESHOLDS, &MAP_THRESHOLDS).unwrap();
        assert_eq!(r.r1_at.keys().collect::<Vec<_>>(), vec!["0.5", "0.7"]);
        assert_eq!(r.map_at.keys().collect::<Vec<_>>(), vec!["0.5", "0.75"]);
        assert_eq!(r.avg_map, 100.0);
    }

    fn classes(entries: &[(&str, &[(f64, f64)])]) -> BTreeMap<String, Vec<Span>> {
        entries
            .iter()
            .map(|(k, v)| (k.to_string(), v.iter().map(|&(a, b)| span(a, b)).collect()))
            .collect()
    }

    #[test]
    fn sed_examples() {
        let gt = classes(&[("dog", &[(10.0, 20.0)])]);
        let pred = classes(&[("dog", &[(15.0, 25.0)])]);
        let s = sed_frame_metrics(&pred, &gt, 60.0, 1.0).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (50.0, 50.0, 50.0));

        let s = sed_frame_metrics(&gt, &gt, 60.0, 1.0).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (100.0, 100.0, 100.0));

        let all = classes(&[("dog", &[(0.0, 60.0)])]);
        let s = sed_frame_metrics(&all, &gt, 60.0, 1.0).unwrap();
        assert_eq!(s.recall, 100.0);
        assert!((s.precision - 100.0 * 10.0 / 60.0).abs() < 1e-12);

        let s = sed_frame_metrics(&BTreeMap::new(), &gt, 60.0, 1.0).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn sed_split_spans_and_order_invariant() {
        let gt = classes(&[("car", &[(3.0, 30.0)]), ("bird", &[(40.0, 44.0)])]);
        let a = classes(&[
            ("car", &[(5.0, 12.0), (20.0, 33.0)]),
            ("bird", &[(41.0, 50.0)]),
        ]);
        let b = classes(&[
            ("car", &[(20.0, 27.5), (27.5, 33.0), (5.0, 12.0)]),
            ("bird", &[(41.0, 50.0)]),
        ]);
        assert_eq!(
            sed_frame_metrics(&a, &gt, 50.0, 1.0).unwrap(),
            sed_frame_metrics(&b, &gt, 50.0, 1.0).unwrap()
        );
    }

    #[test]
    fn sed_partial_last_frame() {
        let gt = classes(&[("x", &[(59.0, 60.5)])]);
        let mut counts = FrameCounts::default();
        counts.add_recording(&gt, &gt, 60.5, 1.0).unwrap();
        // 61 frames; the partial last frame's midpoint sits at the span end.
        assert_eq!(counts.true_positive, 1);
        assert_eq!(counts.false_negative, 0);
    }
}
