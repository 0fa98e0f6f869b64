use serde::{Deserialize, Serialize};
use std::fmt;

/// Inclusive integer interval of lattice sites. Empty when `hi < lo`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub lo: i64,
    pub hi: i64,
}

impl Interval {
    pub fn new(lo: i64, hi: i64) -> Self {
        Interval { lo, hi }
    }

    /// The empty interval anchored at `lo`.
    pub fn empty_at(lo: i64) -> Self {
        Interval { lo, hi: lo - 1 }
    }

    pub fn site(x: i64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.hi - self.lo + 1) as usize
        }
    }

    pub fn contains(&self, x: i64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.is_empty() || (self.lo <= other.lo && other.hi <= self.hi)
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if hi < lo {
            Interval::empty_at(lo)
        } else {
            Interval { lo, hi }
        }
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &Interval) -> Interval {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn shifted(&self, j: i64) -> Interval {
        Interval { lo: self.lo + j, hi: self.hi + j }
    }

    /// Image under the site reflection `x -> -x`.
    pub fn reflected(&self) -> Interval {
        if self.is_empty() {
            Interval::empty_at(-self.lo)
        } else {
            Interval { lo: -self.hi, hi: -self.lo }
        }
    }

    /// Position of site `x` inside the interval.
    pub fn position(&self, x: i64) -> Option<usize> {
        self.contains(x).then(|| (x - self.lo) as usize)
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "[]")
        } else {
            write!(f, "[{}, {}]", self.lo, self.hi)
        }
    }
}
