//! Extended reals and nontrivial real intervals.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point of the extended real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtendedReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtendedReal {
    /// Wraps a float; infinities map to the symbolic ends, NaN is rejected.
    pub fn from_f64(x: f64) -> Option<Self> {
        if x.is_nan() {
            None
        } else if x == f64::INFINITY {
            Some(ExtendedReal::PosInf)
        } else if x == f64::NEG_INFINITY {
            Some(ExtendedReal::NegInf)
        } else {
            Some(ExtendedReal::Finite(x))
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// The float carrying the same order position (infinities become `±inf`).
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::NegInf => f64::NEG_INFINITY,
            ExtendedReal::Finite(x) => x,
            ExtendedReal::PosInf => f64::INFINITY,
        }
    }
}

impl Eq for ExtendedReal {}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedReal {
    fn cmp(&self, other: &Self) -> Ordering {
        use ExtendedReal::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            // NaN never reaches a `Finite`.
            (Finite(a), Finite(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::NegInf => write!(f, "-inf"),
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::PosInf => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("interval is trivial: need lo < hi, got {lo} and {hi}")]
    Trivial { lo: ExtendedReal, hi: ExtendedReal },
    #[error("infinite endpoint {0} must be open")]
    ClosedInfinity(ExtendedReal),
    #[error("endpoint is NaN")]
    NaN,
    #[error("malformed interval {text:?}: {reason}")]
    Malformed { text: String, reason: String },
}

/// A nonempty, non-singleton interval of the real line.
///
/// Endpoints live on the extended line so that `sup I` and `inf I` are always
/// available; an infinite endpoint is always open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: ExtendedReal,
    hi: ExtendedReal,
    lo_open: bool,
    hi_open: bool,
}

impl Interval {
    pub fn new(
        lo: ExtendedReal,
        lo_open: bool,
        hi: ExtendedReal,
        hi_open: bool,
    ) -> Result<Self, IntervalError> {
        if lo >= hi {
            return Err(IntervalError::Trivial { lo, hi });
        }
        if !lo.is_finite() && !lo_open {
            return Err(IntervalError::ClosedInfinity(lo));
        }
        if !hi.is_finite() && !hi_open {
            return Err(IntervalError::ClosedInfinity(hi));
        }
        Ok(Interval {
            lo,
            hi,
            lo_open,
            hi_open,
        })
    }

    /// Builds from floats, where `±inf` stands for the symbolic infinities.
    pub fn from_bounds(lo: f64, lo_open: bool, hi: f64, hi_open: bool) -> Result<Self, IntervalError> {
        let lo_x = ExtendedReal::from_f64(lo).ok_or(IntervalError::NaN)?;
        let hi_x = ExtendedReal::from_f64(hi).ok_or(IntervalError::NaN)?;
        Self::new(lo_x, lo_open, hi_x, hi_open)
    }

    pub fn real_line() -> Self {
        Interval {
            lo: ExtendedReal::NegInf,
            hi: ExtendedReal::PosInf,
            lo_open: true,
            hi_open: true,
        }
    }

    /// `]a, b[`
    pub fn open(a: f64, b: f64) -> Result<Self, IntervalError> {
        Self::from_bounds(a, true, b, true)
    }

    /// `[a, b]`
    pub fn closed(a: f64, b: f64) -> Result<Self, IntervalError> {
        Self::from_bounds(a, false, b, false)
    }

    pub fn lo(&self) -> ExtendedReal {
        self.lo
    }

    pub fn hi(&self) -> ExtendedReal {
        self.hi
    }

    pub fn lo_open(&self) -> bool {
        self.lo_open
    }

    pub fn hi_open(&self) -> bool {
        self.hi_open
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Membership respecting the open/closed flags. Non-finite `x` is never inside.
    pub fn contains(&self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        let p = ExtendedReal::Finite(x);
        let above_lo = match p.cmp(&self.lo) {
            Ordering::Greater => true,
            Ordering::Equal => !self.lo_open,
            Ordering::Less => false,
        };
        let below_hi = match p.cmp(&self.hi) {
            Ordering::Less => true,
            Ordering::Equal => !self.hi_open,
            Ordering::Greater => false,
        };
        above_lo && below_hi
    }

    /// Intersection with `[-w, w]`, used as the sampling window for unbounded
    /// domains. When the domain misses `[-w, w]` entirely, a window of width
    /// `2w` is anchored at the nearest finite endpoint instead.
    pub fn window(&self, w: f64) -> Interval {
        let w = w.abs().max(f64::MIN_POSITIVE);
        let lo_f = self.lo.to_f64();
        let hi_f = self.hi.to_f64();
        let (mut lo, mut lo_open) = if lo_f >= -w { (lo_f, self.lo_open) } else { (-w, false) };
        let (mut hi, mut hi_open) = if hi_f <= w { (hi_f, self.hi_open) } else { (w, false) };
        if lo >= hi {
            if lo_f.is_finite() && lo_f >= w {
                lo = lo_f;
                lo_open = self.lo_open;
                hi = if hi_f.is_finite() { hi_f.min(lo_f + 2.0 * w) } else { lo_f + 2.0 * w };
                hi_open = hi_f.is_finite() && hi == hi_f && self.hi_open;
            } else {
                hi = hi_f;
                hi_open = self.hi_open;
                lo = if lo_f.is_finite() { lo_f.max(hi_f - 2.0 * w) } else { hi_f - 2.0 * w };
                lo_open = lo_f.is_finite() && lo == lo_f && self.lo_open;
            }
        }
        Interval {
            lo: ExtendedReal::Finite(lo),
            hi: ExtendedReal::Finite(hi),
            lo_open,
            hi_open,
        }
    }

    /// Smallest finite value of the window; only meaningful for bounded intervals.
    pub fn lo_f64(&self) -> f64 {
        self.lo.to_f64()
    }

    pub fn hi_f64(&self) -> f64 {
        self.hi.to_f64()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_open { '(' } else { '[' };
        let r = if self.hi_open { ')' } else { ']' };
        write!(f, "{l}{},{}{r}", self.lo, self.hi)
    }
}

fn parse_endpoint(tok: &str, text: &str) -> Result<f64, IntervalError> {
    let t = tok.trim();
    match t {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => t.parse::<f64>().map_err(|_| IntervalError::Malformed {
            text: text.to_string(),
            reason: format!("bad endpoint {t:?}"),
        }),
    }
}

/// Parses `(a,b)`, `[a,b)`, `(-inf,b]`, … ; `]a,b[` is accepted as well.
impl FromStr for Interval {
    type Err = IntervalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim();
        let malformed = |reason: &str| IntervalError::Malformed {
            text: s.to_string(),
            reason: reason.to_string(),
        };
        let mut chars = text.chars();
        let first = chars.next().ok_or_else(|| malformed("empty"))?;
        let last = chars.next_back().ok_or_else(|| malformed("too short"))?;
        let lo_open = match first {
            '(' | ']' => true,
            '[' => false,
            _ => return Err(malformed("must start with '(' or '['")),
        };
        let hi_open = match last {
            ')' | '[' => true,
            ']' => false,
            _ => return Err(malformed("must end with ')' or ']'")),
        };
        let body = chars.as_str();
        let (a, b) = body.split_once(',').ok_or_else(|| malformed("missing ','"))?;
        if b.contains(',') {
            return Err(malformed("too many ','"));
        }
        let lo = parse_endpoint(a, s)?;
        let hi = parse_endpoint(b, s)?;
        Interval::from_bounds(lo, lo_open, hi, hi_open)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contains_respects_flags() {
        let pos = Interval::from_bounds(0.0, true, f64::INFINITY, true).unwrap();
        assert!(pos.contains(1.0));
        assert!(!pos.contains(0.0));
        let neg = Interval::from_bounds(f64::NEG_INFINITY, true, 0.0, false).unwrap();
        assert!(neg.contains(0.0));
        assert!(!neg.contains(f64::NAN));
        assert!(!neg.contains(f64::NEG_INFINITY));
    }

    #[test]
    fn rejects_trivial_and_closed_infinity() {
        assert!(matches!(Interval::closed(1.0, 1.0), Err(IntervalError::Trivial { .. })));
        assert!(matches!(Interval::open(2.0, 1.0), Err(IntervalError::Trivial { .. })));
        assert!(matches!(
            Interval::from_bounds(0.0, true, f64::INFINITY, false),
            Err(IntervalError::ClosedInfinity(_))
        ));
    }

    #[test]
    fn extended_order() {
        use ExtendedReal::*;
        assert!(NegInf < Finite(-1e308));
        assert!(Finite(1e308) < PosInf);
        assert!(Finite(1.0) < Finite(2.0));
        assert_eq!(ExtendedReal::from_f64(f64::INFINITY), Some(PosInf));
        assert_eq!(ExtendedReal::from_f64(f64::NAN), None);
    }

    #[test]
    fn parse_round_trip() {
        for text in ["(0,inf)", "[0,1)", "(-inf,0]", "(-inf,inf)", "[-2.5,3]"] {
            let iv: Interval = text.parse().unwrap();
            assert_eq!(iv.to_string(), text);
        }
        let iv: Interval = "]0, 1[".parse().unwrap();
        assert_eq!(iv, Interval::open(0.0, 1.0).unwrap());
        assert!("(0,1".parse::<Interval>().is_err());
        assert!("[0,inf]".parse::<Interval>().is_err());
        assert!("(a,1)".parse::<Interval>().is_err());
    }

    #[test]
    fn window_clips_unbounded_ends() {
        let pos = Interval::from_bounds(0.0, true, f64::INFINITY, true).unwrap();
        let w = pos.window(10.0);
        assert_eq!((w.lo_f64(), w.hi_f64()), (0.0, 10.0));
        assert!(w.lo_open() && !w.hi_open());
        let far = Interval::from_bounds(100.0, false, f64::INFINITY, true).unwrap();
        let w = far.window(10.0);
        assert_eq!((w.lo_f64(), w.hi_f64()), (100.0, 120.0));
        let unit = Interval::open(0.0, 1.0).unwrap();
        assert_eq!(unit.window(10.0), unit);
    }
}
