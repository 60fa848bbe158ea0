//! Exact rational values.

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Exact rational used for every value, distance and threshold.
pub type Q = Ratio<i64>;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

pub fn int(n: i64) -> Q {
    Q::from_integer(n)
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// `1/(k+1)`, the Baire distance between a node and its length-`k` prefix.
pub fn inv_succ(k: usize) -> Q {
    Q::new(1, k as i64 + 1)
}

pub fn clamp01(x: Q) -> Q {
    if x < Q::zero() {
        Q::zero()
    } else if x > Q::one() {
        Q::one()
    } else {
        x
    }
}

/// Truncated subtraction `u ∸ v = max(0, u - v)`.
pub fn monus(u: Q, v: Q) -> Q {
    let r = u - v;
    if r.is_negative() {
        Q::zero()
    } else {
        r
    }
}

pub fn pow2_neg(n: u32) -> Q {
    Q::new(1, 1i64 << n)
}

pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Parse(format!("bad rational '{s}'"));
    match s.split_once('/') {
        Some((a, b)) => {
            let n: i64 = a.trim().parse().map_err(|_| bad())?;
            let d: i64 = b.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(Q::new(n, d))
        }
        None => Ok(Q::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

pub fn fmt_q(x: &Q) -> String {
    x.to_string()
}

/// Smallest integer `>= x`.
pub fn ceil_int(x: &Q) -> i64 {
    x.ceil().to_integer()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print_round_trip() {
        for s in ["0", "1", "1/2", "3/7", "-2/3"] {
            assert_eq!(fmt_q(&parse_q(s).unwrap()), s);
        }
        assert_eq!(parse_q("2/4").unwrap(), q(1, 2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("x").is_err());
    }

    #[test]
    fn monus_and_clamp() {
        assert_eq!(monus(q(1, 4), q(1, 2)), zero());
        assert_eq!(monus(q(3, 4), q(1, 2)), q(1, 4));
        assert_eq!(clamp01(int(3)), one());
        assert_eq!(clamp01(q(-1, 3)), zero());
        assert_eq!(inv_succ(2), q(1, 3));
        assert_eq!(pow2_neg(3), q(1, 8));
    }
}
