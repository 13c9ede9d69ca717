//! Closed real intervals and the comparison metrics defined over them.
//!
//! An extracted composition and its ground truth are both intervals; the
//! metrics here compare an estimate `E` against a truth `T` by midpoint
//! error (absolute and relative-percent) and by overlap precision/recall.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A closed interval `[lo, hi]` of finite reals with `lo <= hi`.
///
/// Degenerate intervals (`lo == hi`) are allowed; they represent point
/// values, which the repair stage produces when a source reported a single
/// number instead of a range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

/// Unvalidated mirror used so deserialization goes through [`Interval::new`].
#[derive(Deserialize)]
struct RawInterval {
    lo: f64,
    hi: f64,
}

impl TryFrom<RawInterval> for Interval {
    type Error = IntervalError;

    fn try_from(raw: RawInterval) -> Result<Self, IntervalError> {
        Interval::new(raw.lo, raw.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("interval bounds must be finite, got [{lo}, {hi}]")]
    NonFinite { lo: f64, hi: f64 },
    #[error("interval lower bound {lo} exceeds upper bound {hi}")]
    Inverted { lo: f64, hi: f64 },
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(IntervalError::NonFinite { lo, hi });
        }
        if lo > hi {
            return Err(IntervalError::Inverted { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// Degenerate interval holding a single value.
    pub fn point(value: f64) -> Result<Self, IntervalError> {
        Self::new(value, value)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// `hi - lo`.
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// `lo + (hi - lo) / 2`.
    pub fn midpoint(&self) -> f64 {
        self.lo + (self.hi - self.lo) / 2.0
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Overlap of two intervals, or `None` when they are disjoint.
    /// Touching endpoints yield a degenerate intersection.
    pub fn intersection(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Smallest interval containing both inputs.
    pub fn envelope(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }
}

impl core::fmt::Display for Interval {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Absolute difference of midpoints, `|m_T - m_E|`.
pub fn midpoint_abs_err(truth: &Interval, estimate: &Interval) -> f64 {
    (truth.midpoint() - estimate.midpoint()).abs()
}

/// Relative percent difference of midpoints, `100 * |m_T - m_E| / m_T`.
///
/// Undefined when the truth midpoint is exactly zero; callers report the
/// metric as absent rather than zero in that case.
pub fn midpoint_rel_err(truth: &Interval, estimate: &Interval) -> Option<f64> {
    let m_t = truth.midpoint();
    if m_t == 0.0 {
        return None;
    }
    Some(100.0 * (m_t - estimate.midpoint()).abs() / m_t)
}

/// `|T ∩ E| / |E|`.
///
/// For a degenerate estimate (`|E| = 0`) the ratio is undefined; the value
/// is 1 when the estimate's point lies inside the truth and 0 otherwise,
/// the limit a shrinking estimate converges to. Disjoint intervals score 0.
pub fn precision(truth: &Interval, estimate: &Interval) -> f64 {
    overlap_fraction(estimate, truth)
}

/// `|T ∩ E| / |T|`, with the same degenerate-interval convention as
/// [`precision`] applied to the truth side.
pub fn recall(truth: &Interval, estimate: &Interval) -> f64 {
    overlap_fraction(truth, estimate)
}

/// Fraction of `base` covered by `base ∩ other`.
fn overlap_fraction(base: &Interval, other: &Interval) -> f64 {
    let Some(overlap) = base.intersection(other) else {
        return 0.0;
    };
    if base.is_degenerate() {
        // overlap is nonempty, so the point is inside `other`
        return 1.0;
    }
    overlap.length() / base.length()
}
