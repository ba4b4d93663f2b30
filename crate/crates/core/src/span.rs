//! Interval algebra shared by the simulator, losses, metrics and baseline.
//!
//! Two parameterizations of a moment are used throughout the crate:
//! [`Span`] holds absolute `(start, end)` seconds, while [`NormalizedMoment`]
//! holds `(center, width)` as fractions of the audio duration, which is what a
//! DETR-style head predicts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start_s: f64,
    pub end_s: f64,
}

impl Span {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self> {
        let span = Span { start_s, end_s };
        span.validate()?;
        Ok(span)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.start_s.is_finite() || !self.end_s.is_finite() {
            return Err(Error::invalid(format!(
                "span bounds must be finite, got ({}, {})",
                self.start_s, self.end_s
            )));
        }
        if self.start_s < 0.0 {
            return Err(Error::invalid(format!(
                "span start {} is negative",
                self.start_s
            )));
        }
        if self.end_s < self.start_s {
            return Err(Error::invalid(format!(
                "span end {} precedes start {}",
                self.end_s, self.start_s
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.end_s - self.start_s
    }

    #[inline]
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start_s + self.end_s)
    }

    /// Half-open coverage test `start <= t < end`.
    #[inline]
    pub fn covers(&self, t: f64) -> bool {
        self.start_s <= t && t < self.end_s
    }

    pub fn iou(&self, other: &Span) -> f64 {
        interval_iou((self.start_s, self.end_s), (other.start_s, other.end_s))
    }

    pub fn giou(&self, other: &Span) -> f64 {
        interval_giou((self.start_s, self.end_s), (other.start_s, other.end_s))
    }
}

/// Moment as `(center, width)` relative to the audio duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMoment {
    pub center: f64,
    pub width: f64,
}

impl NormalizedMoment {
    pub fn new(center: f64, width: f64) -> Self {
        NormalizedMoment { center, width }
    }

    /// Builds a moment from normalized start/end coordinates.
    pub fn from_bounds(start: f64, end: f64) -> Self {
        NormalizedMoment {
            center: 0.5 * (start + end),
            width: end - start,
        }
    }

    #[inline]
    pub fn start(&self) -> f64 {
        self.center - 0.5 * self.width
    }

    #[inline]
    pub fn end(&self) -> f64 {
        self.center + 0.5 * self.width
    }

    /// Normalized `(start, end)`; a negative width collapses to its center.
    pub fn bounds(&self) -> (f64, f64) {
        if self.width < 0.0 {
            (self.center, self.center)
        } else {
            (self.start(), self.end())
        }
    }
}

/// A predicted moment with its confidence score in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub moment: NormalizedMoment,
    pub confidence: f64,
}

impl Candidate {
    pub fn new(moment: NormalizedMoment, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invalid(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Candidate { moment, confidence })
    }
}

/// Converts a normalized moment into seconds, clamping to `[0, duration_s]`.
pub fn to_span(m: NormalizedMoment, duration_s: f64) -> Result<Span> {
    if !m.center.is_finite() || !m.width.is_finite() || !duration_s.is_finite() {
        return Err(Error::invalid(format!(
            "non-finite moment ({}, {}) or duration {duration_s}",
            m.center, m.width
        )));
    }
    if duration_s <= 0.0 {
        return Err(Error::invalid(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    let start = (m.start() * duration_s).clamp(0.0, duration_s);
    let end = (m.end() * duration_s).clamp(0.0, duration_s);
    Ok(Span {
        start_s: start,
        end_s: end.max(start),
    })
}

/// Converts an absolute span into `(center, width)` relative to `duration_s`.
pub fn from_span(s: Span, duration_s: f64) -> Result<NormalizedMoment> {
    if !duration_s.is_finite() || duration_s <= 0.0 {
        return Err(Error::invalid(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    s.validate()?;
    if s.end_s > duration_s {
        return Err(Error::invalid(format!(
            "span end {} exceeds duration {duration_s}",
            s.end_s
        )));
    }
    Ok(NormalizedMoment {
        center: (s.start_s + s.end_s) / (2.0 * duration_s),
        width: (s.end_s - s.start_s) / duration_s,
    })
}

pub fn iou(a: &Span, b: &Span) -> f64 {
    a.iou(b)
}

pub fn giou(a: &Span, b: &Span) -> f64 {
    a.giou(b)
}

/// IoU over raw `(lo, hi)` bounds. A zero-length union yields 0.
pub fn interval_iou(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let union = (a.1 - a.0) + (b.1 - b.0) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Generalized IoU over raw `(lo, hi)` bounds: IoU minus the fraction of the
/// enclosing hull not covered by the union. Two identical points give 1.
pub fn interval_giou(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let union = (a.1 - a.0) + (b.1 - b.0) - inter;
    let hull = a.1.max(b.1) - a.0.min(b.0);
    if hull <= 0.0 {
        return 1.0;
    }
    let iou = if union > 0.0 { inter / union } else { 0.0 };
    iou - (hull - union) / hull
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn span(a: f64, b: f64) -> Span {
        Span::new(a, b).unwrap()
    }

    #[test]
    fn to_span_examples() {
        let s = to_span(NormalizedMoment::new(0.5, 0.5), 60.0).unwrap();
        assert_eq!((s.start_s, s.end_s), (15.0, 45.0));
        let s = to_span(NormalizedMoment::new(0.0, 0.2), 60.0).unwrap();
        assert_eq!(s.start_s, 0.0);
        assert!((s.end_s - 6.0).abs() < 1e-12);
    }

    #[test]
    fn to_span_round_trip_odd_duration() {
        let m = NormalizedMoment::new(0.5, 0.4667);
        let s = to_span(m, 64.3).unwrap();
        let back = from_span(s, 64.3).unwrap();
        assert!((back.center - m.center).abs() < 1e-12);
        assert!((back.width - m.width).abs() < 1e-12);
    }

    #[test]
    fn to_span_rejects_bad_input() {
        assert!(to_span(NormalizedMoment::new(f64::NAN, 0.1), 10.0).is_err());
        assert!(to_span(NormalizedMoment::new(0.5, 0.1), 0.0).is_err());
        assert!(to_span(NormalizedMoment::new(0.5, f64::INFINITY), 1.0).is_err());
    }

    #[test]
    fn to_span_negative_width_is_point() {
        let s = to_span(NormalizedMoment::new(0.5, -0.2), 10.0).unwrap();
        assert!(s.end_s >= s.start_s);
    }

    #[test]
    fn from_span_examples() {
        let m = from_span(span(16.0, 44.0), 60.0).unwrap();
        assert!((m.center - 0.5).abs() < 1e-12);
        assert!((m.width - 28.0 / 60.0).abs() < 1e-12);
        assert!((m.width - 0.4667).abs() < 1e-4);

        let m = from_span(span(0.0, 37.5), 37.5).unwrap();
        assert_eq!((m.center, m.width), (0.5, 1.0));

        let m = from_span(span(10.0, 10.0), 60.0).unwrap();
        assert!((m.center - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.width, 0.0);

        assert!(from_span(span(0.0, 1.0), 0.0).is_err());
        assert!(from_span(span(0.0, 2.0), 1.0).is_err());
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&span(3.0, 9.0), &span(3.0, 9.0)), 1.0);
        assert_eq!(iou(&span(0.0, 1.0), &span(2.0, 3.0)), 0.0);
        let v = iou(&span(16.0, 44.0), &span(20.0, 50.0));
        assert!((v - 24.0 / 34.0).abs() < 1e-15);
        assert_eq!(iou(&span(5.0, 5.0), &span(5.0, 5.0)), 0.0);
    }

    #[test]
    fn giou_examples() {
        assert_eq!(giou(&span(0.1, 0.7), &span(0.1, 0.7)), 1.0);
        let v = giou(&span(0.0, 0.2), &span(0.4, 0.6));
        assert!((v + 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(giou(&span(0.0, 0.5), &span(0.5, 1.0)), 0.0);
        assert_eq!(giou(&span(2.0, 2.0), &span(2.0, 2.0)), 1.0);
        assert_eq!(giou(&span(1.0, 1.0), &span(2.0, 2.0)), -1.0);
    }

    #[test]
    fn span_rejects_invalid() {
        assert!(Span::new(2.0, 1.0).is_err());
        assert!(Span::new(-1.0, 1.0).is_err());
        assert!(Span::new(0.0, f64::NAN).is_err());
    }

    fn arb_span() -> impl Strategy<Value = Span> {
        (0.0f64..100.0, 0.0f64..50.0).prop_map(|(s, l)| Span {
            start_s: s,
            end_s: s + l,
        })
    }

    proptest! {
        #[test]
        fn giou_bounded_by_iou(a in arb_span(), b in arb_span()) {
            let i = iou(&a, &b);
            let g = giou(&a, &b);
            prop_assert!(g <= i + 1e-12);
            prop_assert!(i <= 1.0);
            prop_assert!(g >= -1.0 - 1e-12);
            prop_assert_eq!(i, iou(&b, &a));
            prop_assert!((g - giou(&b, &a)).abs() < 1e-12);
        }

        #[test]
        fn round_trip_inside_bounds(c in 0.1f64..0.9, w in 0.001f64..0.2, d in 1.0f64..3600.0) {
            let m = NormalizedMoment::new(c, w);
            let back = from_span(to_span(m, d).unwrap(), d).unwrap();
            prop_assert!((back.center - c).abs() <= 1e-9 * c);
            prop_assert!((back.width - w).abs() <= 1e-9 * w.max(1e-3));
        }

        #[test]
        fn unit_iou_only_for_equal_spans(a in arb_span(), b in arb_span()) {
            prop_assume!(a.length() > 0.0 && b.length() > 0.0);
            if iou(&a, &b) == 1.0 {
                prop_assert_eq!(a, b);
            }
            prop_assert_eq!(iou(&a, &a), 1.0);
        }
    }
}
