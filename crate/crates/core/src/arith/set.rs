use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{IntervalQ, Rat};

/// Exact Lebesgue measure of a finite union of intervals.
///
/// Sweeps the intervals in left-endpoint order and merges overlaps; openness
/// never affects the measure.
pub fn interval_union_measure<'a, I>(intervals: I) -> Rat
where
    I: IntoIterator<Item = &'a IntervalQ>,
{
    let mut spans: Vec<(&Rat, &Rat)> = intervals.into_iter().map(|j| (j.lo(), j.hi())).collect();
    spans.sort();
    let mut total = Rat::zero();
    let mut current: Option<(&Rat, &Rat)> = None;
    for (lo, hi) in spans {
        match current {
            Some((clo, chi)) if lo <= chi => current = Some((clo, std::cmp::max(chi, hi))),
            Some((clo, chi)) => {
                total = total + (chi - clo);
                current = Some((lo, hi));
            }
            None => current = Some((lo, hi)),
        }
    }
    if let Some((clo, chi)) = current {
        total = total + (chi - clo);
    }
    total
}

/// Normalized finite union of closed intervals: sorted, pairwise disjoint,
/// touching pieces merged. Degenerate pieces (points) are kept.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedUnion {
    pieces: Vec<IntervalQ>,
}

impl ClosedUnion {
    pub fn empty() -> Self {
        ClosedUnion { pieces: Vec::new() }
    }

    /// Closures of the inputs, merged.
    pub fn from_intervals<I: IntoIterator<Item = IntervalQ>>(intervals: I) -> Self {
        let mut spans: Vec<IntervalQ> = intervals.into_iter().map(|j| j.closure()).collect();
        spans.sort_by(|a, b| a.lo().cmp(b.lo()).then(b.hi().cmp(a.hi())));
        let mut pieces: Vec<IntervalQ> = Vec::with_capacity(spans.len());
        for s in spans {
            match pieces.last_mut() {
                Some(last) if s.lo() <= last.hi() => {
                    if s.hi() > last.hi() {
                        *last = IntervalQ::closed(last.lo().clone(), s.hi().clone());
                    }
                }
                _ => pieces.push(s),
            }
        }
        ClosedUnion { pieces }
    }

    /// `closure(within) − ⋃ interior(removed)` as closed pieces. Two removed
    /// intervals that only touch leave their common endpoint behind.
    pub fn complement_in<'a, I>(within: &IntervalQ, removed: I) -> Self
    where
        I: IntoIterator<Item = &'a IntervalQ>,
    {
        let mut holes: Vec<(&Rat, &Rat)> = removed.into_iter().map(|j| (j.lo(), j.hi())).collect();
        holes.sort();
        let mut pieces = Vec::new();
        let mut cursor = within.lo().clone();
        for (lo, hi) in holes {
            if lo >= within.hi() {
                break;
            }
            if lo >= &cursor {
                pieces.push(IntervalQ::closed(cursor.clone(), lo.clone()));
            }
            if hi > &cursor {
                cursor = hi.clone();
            }
        }
        if &cursor <= within.hi() {
            pieces.push(IntervalQ::closed(cursor, within.hi().clone()));
        }
        ClosedUnion::from_intervals(pieces)
    }

    pub fn pieces(&self) -> &[IntervalQ] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn measure(&self) -> Rat {
        self.pieces.iter().map(|p| p.length()).sum()
    }

    pub fn union(&self, other: &ClosedUnion) -> ClosedUnion {
        ClosedUnion::from_intervals(self.pieces.iter().chain(other.pieces.iter()).cloned())
    }

    /// Closure of `self ∩ j`.
    pub fn intersect_interval(&self, j: &IntervalQ) -> ClosedUnion {
        ClosedUnion::from_intervals(self.pieces.iter().filter_map(|p| p.intersect(j)))
    }

    pub fn intersect(&self, other: &ClosedUnion) -> ClosedUnion {
        let (a, b) = (&self.pieces, &other.pieces);
        let (mut i, mut k) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && k < b.len() {
            if let Some(x) = a[i].intersect(&b[k]) {
                out.push(x);
            }
            if a[i].hi() < b[k].hi() {
                i += 1;
            } else {
                k += 1;
            }
        }
        ClosedUnion::from_intervals(out)
    }

    /// `|self \ other|`.
    pub fn measure_outside(&self, other: &ClosedUnion) -> Rat {
        self.measure() - self.intersect(other).measure()
    }

    /// `self ⊆ other`, as sets of points.
    pub fn is_subset_of(&self, other: &ClosedUnion) -> bool {
        self.pieces.iter().all(|p| other.pieces.iter().any(|o| o.contains_interval(p)))
    }

    fn locate(&self, x: &Rat) -> Result<usize, usize> {
        self.pieces.binary_search_by(|p| {
            if p.hi() < x {
                Ordering::Less
            } else if p.lo() > x {
                Ordering::Greater
            } else {
                Ordering::Equal
            }
        })
    }

    pub fn contains(&self, x: &Rat) -> bool {
        self.locate(x).is_ok()
    }

    /// Distance from `x` to the union; `None` when the union is empty.
    pub fn distance(&self, x: &Rat) -> Option<Rat> {
        match self.locate(x) {
            Ok(_) => Some(Rat::zero()),
            Err(i) => {
                let left = i.checked_sub(1).map(|k| x - self.pieces[k].hi());
                let right = self.pieces.get(i).map(|p| p.lo() - x);
                match (left, right) {
                    (Some(l), Some(r)) => Some(std::cmp::min(l, r)),
                    (l, r) => l.or(r),
                }
            }
        }
    }

    pub fn max_piece_length(&self) -> Rat {
        self.pieces.iter().map(|p| p.length()).max().unwrap_or_else(Rat::zero)
    }

    /// Smallest gap between consecutive pieces; `None` with fewer than two pieces.
    pub fn min_gap(&self) -> Option<Rat> {
        self.pieces.windows(2).map(|w| w[1].lo() - w[0].hi()).min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::q;
    use proptest::prelude::*;

    #[test]
    fn union_measure_examples() {
        let a = [IntervalQ::open(q(0, 1), q(1, 2)), IntervalQ::open(q(1, 4), q(3, 4))];
        assert_eq!(interval_union_measure(&a), q(3, 4));
        assert_eq!(interval_union_measure(&[]), q(0, 1));
        let b = [IntervalQ::open(q(0, 1), q(1, 3)), IntervalQ::open(q(1, 3), q(2, 3))];
        assert_eq!(interval_union_measure(&b), q(2, 3));
    }

    #[test]
    fn complement_keeps_touching_points() {
        let n = IntervalQ::closed(q(0, 1), q(1, 1));
        let holes = [IntervalQ::open(q(1, 5), q(3, 10)), IntervalQ::open(q(3, 10), q(2, 5)), IntervalQ::open(q(9, 10), q(1, 1))];
        let c = ClosedUnion::complement_in(&n, &holes);
        assert_eq!(
            c.pieces(),
            &[
                IntervalQ::closed(q(0, 1), q(1, 5)),
                IntervalQ::point(q(3, 10)),
                IntervalQ::closed(q(2, 5), q(9, 10)),
                IntervalQ::point(q(1, 1)),
            ]
        );
        assert_eq!(c.measure(), q(7, 10));
        assert_eq!(ClosedUnion::complement_in(&n, &[]).measure(), q(1, 1));
    }

    #[test]
    fn closed_union_merges_and_measures() {
        let u = ClosedUnion::from_intervals([
            IntervalQ::closed(q(0, 1), q(1, 4)),
            IntervalQ::open(q(1, 4), q(1, 2)),
            IntervalQ::point(q(3, 4)),
            IntervalQ::closed(q(4, 5), q(1, 1)),
        ]);
        assert_eq!(u.pieces().len(), 3);
        assert_eq!(u.measure(), q(1, 2) + q(1, 5));
        assert!(u.contains(&q(3, 4)));
        assert!(!u.contains(&q(7, 10)));
        assert_eq!(u.distance(&q(7, 10)), Some(q(1, 20)));
        assert_eq!(u.min_gap(), Some(q(1, 20)));
        assert_eq!(u.max_piece_length(), q(1, 2));
    }

    #[test]
    fn intersection_and_difference() {
        let a = ClosedUnion::from_intervals([IntervalQ::closed(q(0, 1), q(1, 2))]);
        let b = ClosedUnion::from_intervals([
            IntervalQ::closed(q(1, 4), q(3, 8)),
            IntervalQ::closed(q(7, 16), q(1, 1)),
        ]);
        assert_eq!(a.intersect(&b).measure(), q(1, 8) + q(1, 16));
        assert_eq!(a.measure_outside(&b), q(1, 2) - q(3, 16));
        assert!(a.intersect(&b).is_subset_of(&a));
    }

    fn spans() -> impl Strategy<Value = Vec<IntervalQ>> {
        prop::collection::vec((0i64..200, 1i64..40), 0..12).prop_map(|v| {
            v.into_iter().map(|(a, w)| IntervalQ::open(q(a, 100), q(a + w, 100))).collect()
        })
    }

    proptest! {
        #[test]
        fn measure_monotone_and_bounded(mut s in spans(), extra in (0i64..200, 1i64..40)) {
            let before = interval_union_measure(&s);
            if let Some(h) = s.iter().cloned().reduce(|a, b| a.hull(&b)) {
                prop_assert!(before <= h.length());
            }
            s.push(IntervalQ::open(q(extra.0, 100), q(extra.0 + extra.1, 100)));
            prop_assert!(interval_union_measure(&s) >= before);
            prop_assert_eq!(ClosedUnion::from_intervals(s.clone()).measure(), interval_union_measure(&s));
        }
    }
}
