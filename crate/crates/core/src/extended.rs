//! Extended reals with an explicit `+∞` tag.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

/// A real number or the `+∞` sentinel.
///
/// Comparisons are total: every finite value is below `PosInfinity`, and
/// finite values are ordered by `f64::total_cmp`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::PosInfinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtendedReal::PosInfinity)
    }

    /// Product with a nonnegative real. `∞ · 0` is taken to be `0`, the
    /// convention needed when a vanishing density meets an infinite
    /// distortion coefficient.
    pub fn mul_nonneg(self, x: f64) -> ExtendedReal {
        match self {
            ExtendedReal::Finite(a) => ExtendedReal::Finite(a * x),
            ExtendedReal::PosInfinity if x == 0.0 => ExtendedReal::Finite(0.0),
            ExtendedReal::PosInfinity => ExtendedReal::PosInfinity,
        }
    }

    pub fn powf(self, p: f64) -> ExtendedReal {
        match self {
            ExtendedReal::Finite(a) => ExtendedReal::Finite(a.powf(p)),
            ExtendedReal::PosInfinity if p > 0.0 => ExtendedReal::PosInfinity,
            ExtendedReal::PosInfinity if p == 0.0 => ExtendedReal::Finite(1.0),
            ExtendedReal::PosInfinity => ExtendedReal::Finite(0.0),
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(x: f64) -> Self {
        ExtendedReal::Finite(x)
    }
}

impl PartialEq for ExtendedReal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
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
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.total_cmp(b),
            (ExtendedReal::Finite(_), ExtendedReal::PosInfinity) => Ordering::Less,
            (ExtendedReal::PosInfinity, ExtendedReal::Finite(_)) => Ordering::Greater,
            (ExtendedReal::PosInfinity, ExtendedReal::PosInfinity) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::PosInfinity => write!(f, "inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_dominates_every_finite_value() {
        let inf = ExtendedReal::PosInfinity;
        assert!(ExtendedReal::Finite(f64::MAX) < inf);
        assert!(ExtendedReal::Finite(-1.0) < ExtendedReal::Finite(1.0));
        assert_eq!(inf, ExtendedReal::PosInfinity);
        assert_eq!(inf.mul_nonneg(0.0), ExtendedReal::Finite(0.0));
        assert!(inf.mul_nonneg(2.0).is_infinite());
    }
}
