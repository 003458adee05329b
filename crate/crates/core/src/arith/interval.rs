use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Rat;

/// Interval with rational endpoints and independent openness at each end.
///
/// A nonempty interval has `lo < hi`, or `lo == hi` with both ends closed
/// (a single point). Empty intervals are never constructed; operations that
/// may produce nothing return `Option`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntervalQ {
    lo: Rat,
    hi: Rat,
    lo_open: bool,
    hi_open: bool,
}

impl IntervalQ {
    pub fn new(lo: Rat, hi: Rat, lo_open: bool, hi_open: bool) -> Option<Self> {
        let ok = match lo.cmp(&hi) {
            Ordering::Less => true,
            Ordering::Equal => !lo_open && !hi_open,
            Ordering::Greater => false,
        };
        ok.then_some(IntervalQ { lo, hi, lo_open, hi_open })
    }

    /// Panics unless `lo < hi`.
    pub fn open(lo: Rat, hi: Rat) -> Self {
        assert!(lo < hi, "open interval needs lo < hi ({lo} .. {hi})");
        IntervalQ { lo, hi, lo_open: true, hi_open: true }
    }

    /// Panics unless `lo <= hi`.
    pub fn closed(lo: Rat, hi: Rat) -> Self {
        assert!(lo <= hi, "closed interval needs lo <= hi ({lo} .. {hi})");
        IntervalQ { lo, hi, lo_open: false, hi_open: false }
    }

    pub fn point(x: Rat) -> Self {
        IntervalQ { lo: x.clone(), hi: x, lo_open: false, hi_open: false }
    }

    pub fn lo(&self) -> &Rat {
        &self.lo
    }

    pub fn hi(&self) -> &Rat {
        &self.hi
    }

    pub fn openness(&self) -> (bool, bool) {
        (self.lo_open, self.hi_open)
    }

    pub fn length(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn midpoint(&self) -> Rat {
        self.lo.midpoint(&self.hi)
    }

    pub fn closure(&self) -> IntervalQ {
        IntervalQ::closed(self.lo.clone(), self.hi.clone())
    }

    /// The open interval with the same endpoints; `None` for a point.
    pub fn interior(&self) -> Option<IntervalQ> {
        (self.lo < self.hi).then(|| IntervalQ::open(self.lo.clone(), self.hi.clone()))
    }

    pub fn contains(&self, x: &Rat) -> bool {
        let above = match self.lo.cmp(x) {
            Ordering::Less => true,
            Ordering::Equal => !self.lo_open,
            Ordering::Greater => false,
        };
        let below = match x.cmp(&self.hi) {
            Ordering::Less => true,
            Ordering::Equal => !self.hi_open,
            Ordering::Greater => false,
        };
        above && below
    }

    /// `other ⊆ self`.
    pub fn contains_interval(&self, other: &IntervalQ) -> bool {
        let lo_ok = match self.lo.cmp(&other.lo) {
            Ordering::Less => true,
            Ordering::Equal => !self.lo_open || other.lo_open,
            Ordering::Greater => false,
        };
        let hi_ok = match other.hi.cmp(&self.hi) {
            Ordering::Less => true,
            Ordering::Equal => !self.hi_open || other.hi_open,
            Ordering::Greater => false,
        };
        lo_ok && hi_ok
    }

    /// `other ⊊ self`.
    pub fn strictly_contains(&self, other: &IntervalQ) -> bool {
        self != other && self.contains_interval(other)
    }

    pub fn intersect(&self, other: &IntervalQ) -> Option<IntervalQ> {
        let (lo, lo_open) = match self.lo.cmp(&other.lo) {
            Ordering::Greater => (&self.lo, self.lo_open),
            Ordering::Less => (&other.lo, other.lo_open),
            Ordering::Equal => (&self.lo, self.lo_open || other.lo_open),
        };
        let (hi, hi_open) = match self.hi.cmp(&other.hi) {
            Ordering::Less => (&self.hi, self.hi_open),
            Ordering::Greater => (&other.hi, other.hi_open),
            Ordering::Equal => (&self.hi, self.hi_open || other.hi_open),
        };
        IntervalQ::new(lo.clone(), hi.clone(), lo_open, hi_open)
    }

    pub fn is_disjoint(&self, other: &IntervalQ) -> bool {
        self.intersect(other).is_none()
    }

    /// Exact "disjoint or nested" predicate for a pair of intervals.
    pub fn disjoint_or_nested(&self, other: &IntervalQ) -> bool {
        self.is_disjoint(other) || self.contains_interval(other) || other.contains_interval(self)
    }

    /// Smallest closed interval containing both.
    pub fn hull(&self, other: &IntervalQ) -> IntervalQ {
        IntervalQ::closed(std::cmp::min(&self.lo, &other.lo).clone(), std::cmp::max(&self.hi, &other.hi).clone())
    }

    /// Position order: left endpoint ascending, then right endpoint descending,
    /// so that a container sorts before everything it contains.
    pub fn nesting_cmp(&self, other: &IntervalQ) -> Ordering {
        self.lo
            .cmp(&other.lo)
            .then(self.lo_open.cmp(&other.lo_open))
            .then(other.hi.cmp(&self.hi))
            .then(self.hi_open.cmp(&other.hi_open))
    }
}

impl fmt::Display for IntervalQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_open { '(' } else { '[' };
        let r = if self.hi_open { ')' } else { ']' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

impl fmt::Debug for IntervalQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    lo: Rat,
    hi: Rat,
    open: [bool; 2],
}

impl Serialize for IntervalQ {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        IntervalRepr {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            open: [self.lo_open, self.hi_open],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntervalQ {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = IntervalRepr::deserialize(d)?;
        let desc = format!("{} .. {}", r.lo, r.hi);
        IntervalQ::new(r.lo, r.hi, r.open[0], r.open[1])
            .ok_or_else(|| serde::de::Error::custom(format!("empty interval {desc}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::q;

    #[test]
    fn openness_matters_for_membership() {
        let u = IntervalQ::open(q(2, 5), q(3, 5));
        assert!(!u.contains(&q(2, 5)));
        assert!(u.contains(&q(1, 2)));
        assert!(u.closure().contains(&q(3, 5)));
    }

    #[test]
    fn touching_open_intervals_are_disjoint() {
        let a = IntervalQ::open(q(0, 1), q(1, 3));
        let b = IntervalQ::open(q(1, 3), q(2, 3));
        assert!(a.is_disjoint(&b));
        assert!(!a.closure().is_disjoint(&b.closure()));
        assert_eq!(a.closure().intersect(&b.closure()), Some(IntervalQ::point(q(1, 3))));
    }

    #[test]
    fn nesting_and_crossing() {
        let big = IntervalQ::open(q(0, 1), q(1, 1));
        let small = IntervalQ::open(q(1, 5), q(3, 10));
        let cross = IntervalQ::open(q(1, 4), q(3, 2));
        assert!(big.strictly_contains(&small));
        assert!(!small.contains_interval(&big));
        assert!(big.disjoint_or_nested(&small));
        assert!(!big.disjoint_or_nested(&cross));
        assert!(!big.strictly_contains(&big));
    }

    #[test]
    fn rejects_empty() {
        assert!(IntervalQ::new(q(1, 2), q(1, 2), true, false).is_none());
        assert!(IntervalQ::new(q(1, 2), q(1, 3), false, false).is_none());
        assert!(IntervalQ::new(q(1, 2), q(1, 2), false, false).is_some());
    }

    #[test]
    fn json_shape() {
        let u = IntervalQ::open(q(2, 5), q(3, 5));
        let s = serde_json::to_string(&u).unwrap();
        assert_eq!(s, r#"{"lo":"2/5","hi":"3/5","open":[true,true]}"#);
        let back: IntervalQ = serde_json::from_str(&s).unwrap();
        assert_eq!(back, u);
        assert!(serde_json::from_str::<IntervalQ>(r#"{"lo":"1/2","hi":"1/3","open":[false,false]}"#).is_err());
    }
}
