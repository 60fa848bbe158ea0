//! Piecewise-linear moduli of uniform continuity.
//!
//! A modulus `Δ` maps a tolerance `ε ∈ (0,1]` to a radius `δ ∈ (0,1]`. It is
//! stored as breakpoints `(ε_i, δ_i)`: linear from the origin to the first
//! breakpoint, linear between breakpoints, constant after the last one.
//! An empty breakpoint list is the constant map `Δ ≡ 1`.

use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::q::{fmt_q, parse_q, Q};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Modulus {
    pts: Vec<(Q, Q)>,
}

impl Modulus {
    /// The modulus `ε ↦ min(ε/L, 1)` of an `L`-Lipschitz map.
    pub fn lipschitz(l: Q) -> Modulus {
        if l <= Q::zero() {
            return Modulus::constant();
        }
        Modulus { pts: vec![(l, Q::one())] }
    }

    /// Modulus of a map that does not depend on its argument.
    pub fn constant() -> Modulus {
        Modulus { pts: Vec::new() }
    }

    pub fn from_points(mut pts: Vec<(Q, Q)>) -> Result<Modulus> {
        pts.sort();
        let mut prev = (Q::zero(), Q::zero());
        for &(e, d) in &pts {
            if e <= prev.0 || d < prev.1 || d <= Q::zero() || d > Q::one() {
                return Err(Error::Invalid(format!(
                    "modulus breakpoints must be increasing with values in (0,1], got ({},{})",
                    fmt_q(&e),
                    fmt_q(&d)
                )));
            }
            prev = (e, d);
        }
        Ok(Modulus { pts }.simplified())
    }

    pub fn points(&self) -> &[(Q, Q)] {
        &self.pts
    }

    pub fn eval(&self, eps: Q) -> Q {
        if self.pts.is_empty() {
            return Q::one();
        }
        if eps <= Q::zero() {
            return Q::zero();
        }
        let mut prev = (Q::zero(), Q::zero());
        for &(e, d) in &self.pts {
            if eps <= e {
                return prev.1 + (d - prev.1) * (eps - prev.0) / (e - prev.0);
            }
            prev = (e, d);
        }
        prev.1
    }

    /// `Some(L)` when this is the modulus of an `L`-Lipschitz map on `(0,1]`.
    pub fn lipschitz_const(&self) -> Option<Q> {
        match self.pts.first() {
            None => Some(Q::zero()),
            Some(&(e, d)) if self.pts.len() == 1 && d == Q::one() => Some(e),
            Some(&(e, d)) if e >= Q::one() => Some(e / d),
            _ => None,
        }
    }

    /// Supremum of the tolerances `ε ≤ 1` whose radius is at most `t`. A pair at
    /// distance `t` may change a value by at most this much; 1 when no radius exceeds `t`.
    pub fn tolerance_at(&self, t: Q) -> Q {
        if self.eval(Q::one()) <= t {
            return Q::one();
        }
        if self.pts.is_empty() {
            return Q::zero();
        }
        let mut prev = (Q::zero(), Q::zero());
        for &(e, d) in &self.pts {
            if d > t {
                // Δ crosses t inside (prev.0, e]
                return (prev.0 + (e - prev.0) * (t - prev.1) / (d - prev.1)).min(Q::one());
            }
            prev = (e, d);
        }
        Q::one()
    }

    /// Smallest `ε ∈ (0,1]` with `Δ(ε) ≥ r`, if any.
    pub fn eps_for_radius(&self, r: Q) -> Option<Q> {
        if r <= Q::zero() {
            return Some(Q::zero());
        }
        if self.eval(Q::one()) < r {
            return None;
        }
        if self.pts.is_empty() {
            return Some(Q::zero());
        }
        let mut prev = (Q::zero(), Q::zero());
        for &(e, d) in &self.pts {
            if d >= r {
                return Some((prev.0 + (e - prev.0) * (r - prev.1) / (d - prev.1)).min(Q::one()));
            }
            prev = (e, d);
        }
        None
    }

    /// `ε ↦ Δ(ε / c)`.
    pub fn scale_input(&self, c: Q) -> Modulus {
        if c <= Q::zero() {
            return Modulus::constant();
        }
        Modulus { pts: self.pts.iter().map(|&(e, d)| (e * c, d)).collect() }
    }

    /// Pointwise minimum.
    pub fn min(&self, other: &Modulus) -> Modulus {
        if self.pts.is_empty() {
            return other.clone();
        }
        if other.pts.is_empty() {
            return self.clone();
        }
        let mut xs: Vec<Q> = self.pts.iter().chain(other.pts.iter()).map(|p| p.0).collect();
        xs.sort();
        xs.dedup();
        // crossings between consecutive candidate abscissae
        let mut all = xs.clone();
        let mut prev = Q::zero();
        for &x in &xs {
            let (a0, b0) = (self.eval(prev), other.eval(prev));
            let (a1, b1) = (self.eval(x), other.eval(x));
            let (d0, d1) = (a0 - b0, a1 - b1);
            if (d0 < Q::zero() && d1 > Q::zero()) || (d0 > Q::zero() && d1 < Q::zero()) {
                all.push(prev + (x - prev) * d0 / (d0 - d1));
            }
            prev = x;
        }
        all.sort();
        all.dedup();
        let pts = all.into_iter().map(|x| (x, self.eval(x).min(other.eval(x)))).collect();
        Modulus { pts }.simplified()
    }

    /// `ε ↦ inner(outer(ε))`.
    pub fn compose(inner: &Modulus, outer: &Modulus) -> Modulus {
        if outer.pts.is_empty() {
            return Modulus { pts: vec![(Q::one(), inner.eval(Q::one()))] }.simplified_or_const(inner);
        }
        let mut xs: Vec<Q> = outer.pts.iter().map(|p| p.0).collect();
        for &(y, _) in &inner.pts {
            let mut prev = (Q::zero(), Q::zero());
            for &(e, d) in &outer.pts {
                if prev.1 < y && y <= d {
                    xs.push(prev.0 + (e - prev.0) * (y - prev.1) / (d - prev.1));
                }
                prev = (e, d);
            }
        }
        xs.sort();
        xs.dedup();
        let pts = xs.into_iter().map(|x| (x, inner.eval(outer.eval(x)))).collect();
        Modulus { pts }.simplified()
    }

    fn simplified_or_const(self, inner: &Modulus) -> Modulus {
        if inner.eval(Q::one()) == Q::one() {
            Modulus::constant()
        } else {
            self
        }
    }

    /// True when `self(ε) ≥ other(ε)` for every `ε ∈ (0,1]`.
    pub fn dominates(&self, other: &Modulus) -> bool {
        let mut xs: Vec<Q> = self.pts.iter().chain(other.pts.iter()).map(|p| p.0).collect();
        xs.push(Q::one());
        xs.into_iter()
            .filter(|x| *x > Q::zero() && *x <= Q::one())
            .all(|x| self.eval(x) >= other.eval(x))
            && {
                // near zero both are linear; compare slopes via the first abscissa
                let first = self
                    .pts
                    .iter()
                    .chain(other.pts.iter())
                    .map(|p| p.0)
                    .fold(Q::one(), |a, b| a.min(b));
                self.eval(first) >= other.eval(first)
            }
    }

    fn simplified(self) -> Modulus {
        let mut out: Vec<(Q, Q)> = Vec::new();
        for p in self.pts {
            if out.last().map(|l| l.0 == p.0).unwrap_or(false) {
                continue;
            }
            out.push(p);
            // drop a middle point collinear with its neighbours
            while out.len() >= 2 {
                let n = out.len();
                let a = if n >= 3 { out[n - 3] } else { (Q::zero(), Q::zero()) };
                let (b, c) = (out[n - 2], out[n - 1]);
                if (b.1 - a.1) * (c.0 - b.0) == (c.1 - b.1) * (b.0 - a.0) {
                    out.remove(n - 2);
                } else {
                    break;
                }
            }
        }
        // the map is constant after its last breakpoint anyway
        while out.len() >= 2 && out[out.len() - 1].1 == out[out.len() - 2].1 {
            out.pop();
        }
        Modulus { pts: out }
    }

    pub fn parse(s: &str) -> Result<Modulus> {
        let s = s.trim();
        if s == "const" {
            return Ok(Modulus::constant());
        }
        if let Some(rest) = s.strip_prefix("lip(").and_then(|r| r.strip_suffix(')')) {
            return Ok(Modulus::lipschitz(parse_q(rest)?));
        }
        if let Some(rest) = s.strip_prefix("pl[").and_then(|r| r.strip_suffix(']')) {
            let mut pts = Vec::new();
            for part in rest.split(';').filter(|p| !p.trim().is_empty()) {
                let part = part.trim().trim_start_matches('(').trim_end_matches(')');
                let (e, d) = part
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("bad modulus breakpoint '{part}'")))?;
                pts.push((parse_q(e)?, parse_q(d)?));
            }
            return Modulus::from_points(pts);
        }
        Err(Error::Parse(format!("bad modulus '{s}'")))
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pts.is_empty() {
            return write!(f, "const");
        }
        if self.pts.len() == 1 && self.pts[0].1 == Q::one() {
            return write!(f, "lip({})", fmt_q(&self.pts[0].0));
        }
        let parts: Vec<String> =
            self.pts.iter().map(|(e, d)| format!("({},{})", fmt_q(e), fmt_q(d))).collect();
        write!(f, "pl[{}]", parts.join(";"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::q::q;

    #[test]
    fn lipschitz_modulus_evaluates_linearly() {
        let m = Modulus::lipschitz(q(3, 1));
        assert_eq!(m.eval(q(1, 2)), q(1, 6));
        assert_eq!(m.lipschitz_const(), Some(q(3, 1)));
        assert_eq!(Modulus::lipschitz(q(1, 2)).eval(q(1, 1)), q(1, 1));
        assert_eq!(Modulus::constant().eval(q(1, 100)), q(1, 1));
    }

    #[test]
    fn min_of_lipschitz_is_the_worse_one() {
        let a = Modulus::lipschitz(q(1, 1));
        let b = Modulus::lipschitz(q(2, 1));
        assert_eq!(a.min(&b), b);
        assert!(a.dominates(&b));
        assert!(!b.dominates(&a));
    }

    #[test]
    fn min_handles_crossings() {
        let a = Modulus::from_points(vec![(q(1, 4), q(1, 2)), (q(1, 1), q(3, 4))]).unwrap();
        let b = Modulus::lipschitz(q(1, 1));
        let m = a.min(&b);
        for k in 1..=20 {
            let e = q(k, 20);
            assert_eq!(m.eval(e), a.eval(e).min(b.eval(e)));
        }
    }

    #[test]
    fn composition_of_lipschitz_multiplies_constants() {
        let inner = Modulus::lipschitz(q(2, 1));
        let outer = Modulus::lipschitz(q(3, 1));
        let c = Modulus::compose(&inner, &outer);
        assert_eq!(c.lipschitz_const(), Some(q(6, 1)));
        for k in 1..=10 {
            let e = q(k, 10);
            assert_eq!(c.eval(e), inner.eval(outer.eval(e)));
        }
    }

    #[test]
    fn tolerance_inverts_lipschitz() {
        let m = Modulus::lipschitz(q(2, 1));
        assert_eq!(m.tolerance_at(q(1, 4)), q(1, 2));
        assert_eq!(m.tolerance_at(q(1, 1)), q(1, 1));
        assert_eq!(Modulus::constant().tolerance_at(q(1, 2)), q(0, 1));
    }

    #[test]
    fn scale_input_divides_tolerance() {
        let m = Modulus::lipschitz(q(1, 1)).scale_input(q(2, 1));
        assert_eq!(m.lipschitz_const(), Some(q(2, 1)));
    }

    #[test]
    fn text_round_trip() {
        for m in [
            Modulus::lipschitz(q(3, 1)),
            Modulus::constant(),
            Modulus::from_points(vec![(q(1, 4), q(1, 2)), (q(1, 1), q(3, 4))]).unwrap(),
        ] {
            assert_eq!(Modulus::parse(&m.to_string()).unwrap(), m);
        }
    }

    #[test]
    fn rejects_decreasing_breakpoints() {
        assert!(Modulus::from_points(vec![(q(1, 2), q(1, 2)), (q(1, 1), q(1, 4))]).is_err());
    }
}
