//! Values of the additive valuation: rationals plus a top element.

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

/// An element of ℚ ∪ {∞}. `Inf` is the valuation of zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gamma {
    Fin(Rational64),
    Inf,
}

impl Gamma {
    pub const ZERO: Gamma = Gamma::Fin(Rational64::new_raw(0, 1));

    pub fn int(n: i64) -> Gamma {
        Gamma::Fin(Rational64::from_integer(n))
    }

    pub fn frac(n: i64, d: i64) -> Gamma {
        Gamma::Fin(Rational64::new(n, d))
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, Gamma::Inf)
    }

    pub fn fin(&self) -> Option<Rational64> {
        match self {
            Gamma::Fin(r) => Some(*r),
            Gamma::Inf => None,
        }
    }

    /// The finite value; panics on ∞.
    pub fn unwrap(&self) -> Rational64 {
        self.fin().expect("finite valuation expected")
    }

    pub fn is_positive(&self) -> bool {
        match self {
            Gamma::Fin(r) => r.is_positive(),
            Gamma::Inf => true,
        }
    }

    pub fn is_nonneg(&self) -> bool {
        match self {
            Gamma::Fin(r) => !r.is_negative(),
            Gamma::Inf => true,
        }
    }

    pub fn mul_int(&self, k: i64) -> Gamma {
        match self {
            Gamma::Fin(r) => Gamma::Fin(*r * k),
            Gamma::Inf if k == 0 => Gamma::ZERO,
            Gamma::Inf => Gamma::Inf,
        }
    }

    /// Scaled integer value `self * e`, when it is an integer.
    pub fn scaled(&self, e: i64) -> Option<i64> {
        let r = self.fin()? * e;
        if r.is_integer() {
            Some(r.to_integer())
        } else {
            None
        }
    }

    pub fn min(self, other: Gamma) -> Gamma {
        std::cmp::min(self, other)
    }

    pub fn max(self, other: Gamma) -> Gamma {
        std::cmp::max(self, other)
    }
}

impl From<i64> for Gamma {
    fn from(n: i64) -> Self {
        Gamma::int(n)
    }
}

impl From<Rational64> for Gamma {
    fn from(r: Rational64) -> Self {
        Gamma::Fin(r)
    }
}

impl Add for Gamma {
    type Output = Gamma;
    fn add(self, o: Gamma) -> Gamma {
        match (self, o) {
            (Gamma::Fin(a), Gamma::Fin(b)) => Gamma::Fin(a + b),
            _ => Gamma::Inf,
        }
    }
}

impl Sub for Gamma {
    type Output = Gamma;
    /// `∞ - x = ∞`; subtracting ∞ from a finite value is a logic error.
    fn sub(self, o: Gamma) -> Gamma {
        match (self, o) {
            (Gamma::Fin(a), Gamma::Fin(b)) => Gamma::Fin(a - b),
            (Gamma::Inf, _) => Gamma::Inf,
            (Gamma::Fin(_), Gamma::Inf) => panic!("finite minus infinite valuation"),
        }
    }
}

impl Neg for Gamma {
    type Output = Gamma;
    fn neg(self) -> Gamma {
        match self {
            Gamma::Fin(a) => Gamma::Fin(-a),
            Gamma::Inf => panic!("negating infinite valuation"),
        }
    }
}

impl PartialEq<i64> for Gamma {
    fn eq(&self, o: &i64) -> bool {
        *self == Gamma::int(*o)
    }
}

impl PartialOrd<i64> for Gamma {
    fn partial_cmp(&self, o: &i64) -> Option<Ordering> {
        Some(self.cmp(&Gamma::int(*o)))
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Inf => write!(f, "inf"),
            Gamma::Fin(r) if r.is_zero() => write!(f, "0"),
            Gamma::Fin(r) => write!(f, "{}", r),
        }
    }
}

/// Parses `3`, `-1/2`, `inf`.
pub fn parse_gamma(s: &str) -> Option<Gamma> {
    let s = s.trim();
    if s == "inf" || s == "∞" {
        return Some(Gamma::Inf);
    }
    if let Some((a, b)) = s.split_once('/') {
        let n: i64 = a.trim().parse().ok()?;
        let d: i64 = b.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Gamma::frac(n, d));
    }
    s.parse::<i64>().ok().map(Gamma::int)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inf_absorbs_and_orders_last() {
        assert_eq!(Gamma::int(3) + Gamma::Inf, Gamma::Inf);
        assert!(Gamma::frac(7, 2) < Gamma::Inf);
        assert!(Gamma::frac(1, 3) < Gamma::frac(1, 2));
        assert_eq!(Gamma::frac(2, 4), Gamma::frac(1, 2));
    }

    #[test]
    fn parse_and_print() {
        assert_eq!(parse_gamma("-1/2"), Some(Gamma::frac(-1, 2)));
        assert_eq!(parse_gamma("inf"), Some(Gamma::Inf));
        assert_eq!(Gamma::frac(3, 6).to_string(), "1/2");
        assert_eq!(Gamma::ZERO.to_string(), "0");
    }
}
