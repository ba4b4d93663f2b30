//! Set-prediction training objective for moment retrieval heads.
//!
//! A head emits `K` candidate moments with confidences. Ground-truth moments
//! are matched to candidates by minimizing `Σ (−c + moment loss)`, then the
//! overall loss combines a cross-entropy score term over all candidates with
//! the moment loss of each matched pair.

use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::error::{Error, Result};
use crate::span::{interval_giou, Candidate, NormalizedMoment};

/// Confidences are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const LOG_EPS: f64 = 1e-7;

/// Distance from a kink below which a gradient is flagged.
pub const KINK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_l1: f64,
    pub lambda_giou: f64,
    pub lambda_score: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_l1: 10.0,
            lambda_giou: 1.0,
            lambda_score: 4.0,
        }
    }
}

impl LossWeights {
    pub fn new(lambda_l1: f64, lambda_giou: f64, lambda_score: f64) -> Result<Self> {
        let w = LossWeights {
            lambda_l1,
            lambda_giou,
            lambda_score,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_l1", self.lambda_l1),
            ("lambda_giou", self.lambda_giou),
            ("lambda_score", self.lambda_score),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// The `K` candidates emitted for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    candidates: Vec<Candidate>,
}

impl PredictionSet {
    pub fn new(candidates: Vec<Candidate>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::invalid(
                "prediction set needs at least one candidate",
            ));
        }
        if let Some(c) = candidates
            .iter()
            .find(|c| !(0.0..=1.0).contains(&c.confidence))
        {
            return Err(Error::invalid(format!(
                "confidence {} outside [0, 1]",
                c.confidence
            )));
        }
        Ok(PredictionSet { candidates })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn confidences(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.confidence).collect()
    }
}

/// Matched `(candidate, ground_truth)` pairs, ordered by ground-truth index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
}

impl Assignment {
    /// Candidate index matched to each ground truth, in ground-truth order.
    pub fn from_columns(columns: &[usize]) -> Self {
        Assignment {
            pairs: columns.iter().enumerate().map(|(n, &k)| (k, n)).collect(),
        }
    }

    pub fn is_matched(&self, candidate: usize) -> bool {
        self.pairs.iter().any(|&(k, _)| k == candidate)
    }

    pub fn candidate_for(&self, ground_truth: usize) -> Option<usize> {
        self.pairs
            .iter()
            .find(|&&(_, n)| n == ground_truth)
            .map(|&(k, _)| k)
    }

    fn validate(&self, k: usize) -> Result<()> {
        let mut seen_k = vec![false; k];
        let mut seen_n = std::collections::HashSet::new();
        for &(ci, gi) in &self.pairs {
            if ci >= k {
                return Err(Error::invalid(format!(
                    "candidate index {ci} out of range for {k} candidates"
                )));
            }
            if std::mem::replace(&mut seen_k[ci], true) || !seen_n.insert(gi) {
                return Err(Error::invalid("assignment reuses an index"));
            }
        }
        Ok(())
    }
}

/// `|ĉ − c| + |ŵ − w|`, i.e. half the start+end error plus the width error.
pub fn l1_loss(pred: &NormalizedMoment, gt: &NormalizedMoment) -> f64 {
    let center_err = 0.5 * ((pred.start() + pred.end()) - (gt.start() + gt.end())).abs();
    let width_err = ((pred.end() - pred.start()) - (gt.end() - gt.start())).abs();
    center_err + width_err
}

/// Negative generalized IoU; a negative predicted width is an empty interval
/// at its center.
pub fn giou_loss(pred: &NormalizedMoment, gt: &NormalizedMoment) -> f64 {
    -interval_giou(pred.bounds(), gt.bounds())
}

pub fn moment_loss(pred: &NormalizedMoment, gt: &NormalizedMoment, w: &LossWeights) -> f64 {
    w.lambda_l1 * l1_loss(pred, gt) + w.lambda_giou * giou_loss(pred, gt)
}

fn clamp_confidence(c: f64) -> f64 {
    c.clamp(LOG_EPS, 1.0 - LOG_EPS)
}

/// Cross-entropy over all candidates: matched ones are pushed toward 1,
/// unmatched ones toward 0.
pub fn score_loss(confidences: &[f64], assignment: &Assignment) -> Result<f64> {
    assignment.validate(confidences.len())?;
    let mut matched = vec![false; confidences.len()];
    for &(k, _) in &assignment.pairs {
        matched[k] = true;
    }
    Ok(confidences
        .iter()
        .zip(&matched)
        .map(|(&c, &m)| {
            let c = clamp_confidence(c);
            if m {
                -c.ln()
            } else {
                -(1.0 - c).ln()
            }
        })
        .sum())
}

/// `N × K` matrix of `−c_k + moment_loss(ŷ_k, y_n)`.
pub fn matching_cost_matrix(
    preds: &PredictionSet,
    gts: &[NormalizedMoment],
    w: &LossWeights,
) -> Vec<Vec<f64>> {
    gts.iter()
        .map(|gt| {
            preds
                .candidates()
                .iter()
                .map(|c| -c.confidence + moment_loss(&c.moment, gt, w))
                .collect()
        })
        .collect()
}

/// Total matching cost of an assignment, summed in ground-truth order.
pub fn matching_cost(
    preds: &PredictionSet,
    gts: &[NormalizedMoment],
    w: &LossWeights,
    assignment: &Assignment,
) -> f64 {
    let cands = preds.candidates();
    assignment
        .pairs
        .iter()
        .map(|&(k, n)| -cands[k].confidence + moment_loss(&cands[k].moment, &gts[n], w))
        .sum()
}

/// Minimum-cost injection of ground truths into candidates. Among optimal
/// injections the one whose candidate sequence (in ground-truth order) is
/// lexicographically smallest is returned.
pub fn optimal_assignment(
    preds: &PredictionSet,
    gts: &[NormalizedMoment],
    w: &LossWeights,
) -> Result<Assignment> {
    if gts.len() > preds.len() {
        return Err(Error::TooManyGroundTruths {
            count: gts.len(),
            candidates: preds.len(),
        });
    }
    let cost = matching_cost_matrix(preds, gts, w);
    Ok(Assignment::from_columns(
        &assignment::lexicographic_assignment(&cost),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub score: f64,
    pub moment: f64,
    pub matching_cost: f64,
    pub assignment: Assignment,
}

/// `λ_score · score_loss + Σ moment_loss` under the optimal assignment.
pub fn overall_loss(
    preds: &PredictionSet,
    gts: &[NormalizedMoment],
    w: &LossWeights,
) -> Result<LossBreakdown> {
    let assignment = optimal_assignment(preds, gts, w)?;
    let score = score_loss(&preds.confidences(), &assignment)?;
    let cands = preds.candidates();
    let moment: f64 = assignment
        .pairs
        .iter()
        .map(|&(k, n)| moment_loss(&cands[k].moment, &gts[n], w))
        .sum();
    let matching_cost = matching_cost(preds, gts, w, &assignment);
    Ok(LossBreakdown {
        total: w.lambda_score * score + moment,
        score,
        moment,
        matching_cost,
        assignment,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentGradient {
    pub d_center: f64,
    pub d_width: f64,
    /// The prediction lies within [`KINK_TOLERANCE`] of a non-differentiable
    /// point; the values are right-hand derivatives there.
    pub near_kink: bool,
}

/// Analytic gradient of [`moment_loss`] in `(center, width)`.
///
/// Each component is the one-sided derivative obtained by increasing that
/// coordinate, so at kinks the right-hand derivative is reported.
pub fn moment_loss_gradient(
    pred: &NormalizedMoment,
    gt: &NormalizedMoment,
    w: &LossWeights,
) -> MomentGradient {
    let right_sign = |x: f64| if x >= 0.0 { 1.0 } else { -1.0 };
    let (gs, ge) = gt.bounds();
    let (ps, pe) = pred.bounds();
    let collapsed = pred.width < 0.0;

    let giou_dc = giou_directional((ps, pe), (gs, ge), (1.0, 1.0));
    let giou_dw = if collapsed {
        0.0
    } else {
        giou_directional((ps, pe), (gs, ge), (-0.5, 0.5))
    };

    let d_center = w.lambda_l1 * right_sign(pred.center - gt.center) - w.lambda_giou * giou_dc;
    let d_width = w.lambda_l1 * right_sign(pred.width - gt.width) - w.lambda_giou * giou_dw;

    let near = |a: f64, b: f64| (a - b).abs() < KINK_TOLERANCE;
    let near_kink = near(pred.center, gt.center)
        || near(pred.width, gt.width)
        || near(pred.width, 0.0)
        || [gs, ge]
            .iter()
            .any(|&g| near(pred.start(), g) || near(pred.end(), g));

    MomentGradient {
        d_center,
        d_width,
        near_kink,
    }
}

/// Directional derivative of gIoU when the predicted bounds move along
/// `(ds, de)`. Ties in each min/max are resolved by the direction of motion.
fn giou_directional(pred: (f64, f64), gt: (f64, f64), (ds, de): (f64, f64)) -> f64 {
    let (ps, pe) = pred;
    let (gs, ge) = gt;

    let (lo, d_lo) = if ps > gs || (ps == gs && ds > 0.0) {
        (ps, ds)
    } else {
        (gs, 0.0)
    };
    let (hi, d_hi) = if pe < ge || (pe == ge && de < 0.0) {
        (pe, de)
    } else {
        (ge, 0.0)
    };
    let gap = hi - lo;
    let d_gap = d_hi - d_lo;
    let (inter, d_inter) = if gap > 0.0 || (gap == 0.0 && d_gap > 0.0) {
        (gap.max(0.0), d_gap)
    } else {
        (0.0, 0.0)
    };

    let union = (pe - ps) + (ge - gs) - inter;
    let d_union = (de - ds) - d_inter;

    let (hull_hi, d_hull_hi) = if pe > ge || (pe == ge && de > 0.0) {
        (pe, de)
    } else {
        (ge, 0.0)
    };
    let (hull_lo, d_hull_lo) = if ps < gs || (ps == gs && ds < 0.0) {
        (ps, ds)
    } else {
        (gs, 0.0)
    };
    let hull = hull_hi - hull_lo;
    let d_hull = d_hull_hi - d_hull_lo;
    if hull <= 0.0 {
        return 0.0;
    }

    // gIoU = I/U − 1 + U/H
    let d_iou = if union > 0.0 {
        (d_inter * union - inter * d_union) / (union * union)
    } else {
        0.0
    };
    let d_cover = (d_union * hull - union * d_hull) / (hull * hull);
    d_iou + d_cover
}
