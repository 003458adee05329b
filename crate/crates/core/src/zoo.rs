//! Named example maps.

use crate::arith::{q, Rat};
use crate::pamap::PAMap;

/// `x ↦ 1 − |1 − 2x|` on `[0, 1]`.
pub fn full_tent() -> PAMap {
    tent(q(2, 1))
}

/// Symmetric tent of slope `±s` on `[0, 1]` with peak value `s/2` (`0 < s ≤ 2`).
pub fn tent(s: Rat) -> PAMap {
    let peak = &s / Rat::from_integer(2);
    PAMap::from_values(&[q(0, 1), q(1, 2), q(1, 1)], &[q(0, 1), peak, q(0, 1)]).expect("valid tent")
}

/// Symmetric tent of slope `±s` restricted to its dynamical core `[f²(c), f(c)]`.
pub fn tent_core(s: Rat) -> PAMap {
    let half = q(1, 2);
    let peak = &s * &half;
    let low = &s * (Rat::one() - &peak);
    let right = &s * (Rat::one() - &peak);
    let left = &s * &low;
    PAMap::from_values(&[low.clone(), half, peak.clone()], &[left, peak, right]).expect("valid tent core")
}

/// Full skew tent with peak at `c`: slopes `1/c` and `−1/(1−c)`.
pub fn full_skew_tent(c: Rat) -> PAMap {
    PAMap::from_values(&[q(0, 1), c, q(1, 1)], &[q(0, 1), q(1, 1), q(0, 1)]).expect("valid skew tent")
}

/// Slopes `3` and `−3/2`.
pub fn skew_tent_3() -> PAMap {
    full_skew_tent(q(1, 3))
}

/// Slopes `5/2` and `−5/3`.
pub fn skew_tent_5_2() -> PAMap {
    full_skew_tent(q(2, 5))
}

/// Bimodal map with three interior breakpoints: turning points at 1/4 and
/// 3/4, and a non-turning slope change at 7/8. Slopes `2, −2, 3/2, 5/2`.
pub fn bimodal() -> PAMap {
    PAMap::from_values(
        &[q(0, 1), q(1, 4), q(3, 4), q(7, 8), q(1, 1)],
        &[q(1, 2), q(1, 1), q(0, 1), q(3, 16), q(1, 2)],
    )
    .expect("valid bimodal map")
}

/// Slopes `4, −4, 1/2`: the contracting lap maps into the first lap, so
/// `|Df²| ≥ 2` although `|Df| = 1/2` there.
pub fn eventually_expanding() -> PAMap {
    PAMap::from_values(&[q(0, 1), q(1, 4), q(1, 2), q(1, 1)], &[q(0, 1), q(1, 1), q(0, 1), q(1, 4)])
        .expect("valid map")
}

/// The four maps used by the acceptance suite.
pub fn acceptance_zoo() -> Vec<(&'static str, PAMap)> {
    vec![
        ("full-tent", full_tent()),
        ("skew-tent-3", skew_tent_3()),
        ("skew-tent-5/2", skew_tent_5_2()),
        ("bimodal", bimodal()),
    ]
}
