use std::fmt;

use serde::{Deserialize, Serialize};

use super::{IntervalQ, Rat};

/// Affine map `x ↦ slope·x + offset` with nonzero rational slope.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffineQ {
    pub slope: Rat,
    pub offset: Rat,
}

impl AffineQ {
    /// Panics on a zero slope.
    pub fn new(slope: Rat, offset: Rat) -> Self {
        assert!(!slope.is_zero(), "affine map with zero slope");
        AffineQ { slope, offset }
    }

    pub fn identity() -> Self {
        AffineQ { slope: Rat::one(), offset: Rat::zero() }
    }

    pub fn apply(&self, x: &Rat) -> Rat {
        &self.slope * x + &self.offset
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineQ) -> AffineQ {
        AffineQ {
            slope: &self.slope * &inner.slope,
            offset: &self.slope * &inner.offset + &self.offset,
        }
    }

    pub fn invert(&self) -> AffineQ {
        let inv = self.slope.recip();
        AffineQ { offset: -(&self.offset * &inv), slope: inv }
    }

    pub fn is_increasing(&self) -> bool {
        self.slope.is_positive()
    }

    /// Exact image of `j`; endpoints (and their openness) swap for negative slopes.
    pub fn image(&self, j: &IntervalQ) -> IntervalQ {
        let a = self.apply(j.lo());
        let b = self.apply(j.hi());
        let (lo_open, hi_open) = j.openness();
        let built = if self.is_increasing() {
            IntervalQ::new(a, b, lo_open, hi_open)
        } else {
            IntervalQ::new(b, a, hi_open, lo_open)
        };
        built.expect("affine bijection maps nonempty intervals to nonempty intervals")
    }

    pub fn preimage(&self, j: &IntervalQ) -> IntervalQ {
        self.invert().image(j)
    }
}

impl fmt::Debug for AffineQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x ↦ {}·x + {}", self.slope, self.offset)
    }
}

/// Free-function form of [`AffineQ::image`].
pub fn interval_image(a: &AffineQ, j: &IntervalQ) -> IntervalQ {
    a.image(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::q;
    use proptest::prelude::*;

    #[test]
    fn image_examples() {
        let doubling = AffineQ::new(q(2, 1), q(0, 1));
        assert_eq!(
            interval_image(&doubling, &IntervalQ::open(q(1, 5), q(3, 10))),
            IntervalQ::open(q(2, 5), q(3, 5))
        );
        let fold = AffineQ::new(q(-2, 1), q(2, 1));
        assert_eq!(
            interval_image(&fold, &IntervalQ::open(q(7, 10), q(4, 5))),
            IntervalQ::open(q(2, 5), q(3, 5))
        );
        let j = IntervalQ::new(q(1, 7), q(3, 7), false, true).unwrap();
        assert_eq!(interval_image(&AffineQ::identity(), &j), j);
    }

    #[test]
    fn openness_swaps_under_reversal() {
        let j = IntervalQ::new(q(0, 1), q(1, 2), false, true).unwrap();
        let img = AffineQ::new(q(-1, 1), q(0, 1)).image(&j);
        assert_eq!(img, IntervalQ::new(q(-1, 2), q(0, 1), true, false).unwrap());
    }

    #[test]
    fn composition_law() {
        let g = AffineQ::new(q(3, 2), q(1, 4));
        let h = AffineQ::new(q(-2, 1), q(5, 3));
        let gh = g.compose(&h);
        assert_eq!(gh.slope, q(-3, 1));
        assert_eq!(gh.offset, q(3, 2) * q(5, 3) + q(1, 4));
        let x = q(7, 11);
        assert_eq!(gh.apply(&x), g.apply(&h.apply(&x)));
    }

    fn nonzero_rat() -> impl Strategy<Value = Rat> {
        (-50i64..50, 1i64..50).prop_filter_map("nonzero", |(n, d)| (n != 0).then(|| q(n, d)))
    }

    proptest! {
        #[test]
        fn inverse_round_trips(s in nonzero_rat(), t in (-50i64..50, 1i64..50), a in (-100i64..100), w in (1i64..100), d in (1i64..60)) {
            let f = AffineQ::new(s, q(t.0, t.1));
            let j = IntervalQ::open(q(a, d), q(a + w, d));
            let y = q(a, d);
            prop_assert_eq!(f.apply(&f.invert().apply(&y)), y);
            prop_assert_eq!(f.preimage(&f.image(&j)), j);
        }
    }
}
