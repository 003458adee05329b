//! Seeded rational starting points and bounded-size orbit stepping.
//!
//! Starts are grid points `a + (b − a)·j/7^22` with `j` drawn from a ChaCha
//! stream keyed by the sample index, so each sample is reproducible on its
//! own and parallel runs agree with sequential ones. Orbits are iterated
//! exactly; once a point grows past the digit budget it is snapped back to
//! the grid. Slopes of the maps of interest never carry a factor 7, so the
//! snapped denominator cannot collapse under iteration.

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::{IntervalQ, Rat};
use crate::pamap::PAMap;

const GRID: u64 = 3_909_821_048_582_988_049; // 7^22

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Digit count above which an orbit point is snapped to the grid.
    pub digit_budget: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { seed: 0x5eed, digit_budget: 40 }
    }
}

pub struct Sampler<'a> {
    m: &'a PAMap,
    config: SamplerConfig,
    grid: BigInt,
}

impl<'a> Sampler<'a> {
    pub fn new(m: &'a PAMap, config: SamplerConfig) -> Self {
        Sampler { m, config, grid: BigInt::from(GRID) }
    }

    pub fn map(&self) -> &PAMap {
        self.m
    }

    fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(index);
        rng
    }

    fn grid_point(&self, j: u64, within: &IntervalQ) -> Rat {
        let t = Rat::from_bigints(BigInt::from(j), self.grid.clone()).expect("nonzero grid");
        within.lo() + within.length() * t
    }

    /// Start of sample `index`, strictly inside the phase and off every breakpoint.
    pub fn start(&self, index: u64) -> Rat {
        self.start_in(index, self.m.phase())
    }

    /// Start of sample `index` strictly inside `within`.
    pub fn start_in(&self, index: u64, within: &IntervalQ) -> Rat {
        let mut rng = self.rng(index);
        loop {
            let x = self.grid_point(rng.gen_range(1..GRID), within);
            if !self.m.breakpoints().contains(&x) {
                return x;
            }
        }
    }

    pub fn step(&self, x: &Rat) -> Rat {
        let y = self.m.apply(x);
        if y.digits() <= self.config.digit_budget {
            return y;
        }
        let phase = self.m.phase();
        let width = phase.length();
        let t = ((&y - phase.lo()) / &width).round_to_denominator(&self.grid);
        phase.lo() + width * t
    }

    /// `x, f(x), …` with grid snapping, `len` points in total.
    pub fn orbit(&self, x: Rat, len: usize) -> impl Iterator<Item = Rat> + '_ {
        std::iter::successors(Some(x), move |y| Some(self.step(y))).take(len)
    }
}
