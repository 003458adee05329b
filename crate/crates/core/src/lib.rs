//! Exact-arithmetic construction of induced Markov maps for continuous
//! piecewise affine interval maps, with bad-set measurement and ergodic
//! diagnostics.
//!
//! Modules build on each other bottom-up:
//! [`arith`] → [`pamap`] → [`nice`] → [`inducer`] → [`badset`] → [`ergodic`].
//! Everything up to and including [`badset`] is exact rational geometry;
//! floating point appears only in [`ergodic`].

pub mod arith;
pub mod badset;
pub mod ergodic;
pub mod error;
pub mod inducer;
pub mod nice;
pub mod pamap;
pub mod sample;
pub mod zoo;

pub use arith::{q, AffineQ, ClosedUnion, IntervalQ, Rat};
pub use error::{Error, Result};
pub use pamap::PAMap;

use serde::{Deserialize, Serialize};

/// Resource limits shared by the enumeration stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    /// Maximum number of laps of an iterate, or good intervals per time step.
    pub laps: usize,
    /// Maximum decimal digits of any endpoint.
    pub digits: u64,
    /// Maximum orbit length before periodicity is reported unknown.
    pub orbit_cap: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { laps: 1 << 20, digits: 400, orbit_cap: 10_000 }
    }
}
