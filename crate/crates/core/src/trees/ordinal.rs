//! Ordinals below ω^ω in Cantor normal form, plus a top element for ill-founded trees.

use std::cmp::Ordering;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Ordinal {
    /// `Σ ω^k·c`, exponents strictly decreasing, coefficients ≥ 1.
    Cnf(Vec<(u32, u64)>),
    Inf,
}

impl Ordinal {
    pub fn zero() -> Ordinal {
        Ordinal::Cnf(Vec::new())
    }

    pub fn nat(n: u64) -> Ordinal {
        if n == 0 {
            Ordinal::zero()
        } else {
            Ordinal::Cnf(vec![(0, n)])
        }
    }

    pub fn omega() -> Ordinal {
        Ordinal::Cnf(vec![(1, 1)])
    }

    /// Builds from arbitrary `(exp, coeff)` terms, normalizing to CNF.
    pub fn from_terms(terms: &[(u32, u64)]) -> Ordinal {
        terms
            .iter()
            .fold(Ordinal::zero(), |acc, &(k, c)| if c == 0 { acc } else { acc.add(&Ordinal::Cnf(vec![(k, c)])) })
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, Ordinal::Inf)
    }

    pub fn as_nat(&self) -> Option<u64> {
        match self {
            Ordinal::Cnf(t) if t.is_empty() => Some(0),
            Ordinal::Cnf(t) if t.len() == 1 && t[0].0 == 0 => Some(t[0].1),
            _ => None,
        }
    }

    pub fn terms(&self) -> Option<&[(u32, u64)]> {
        match self {
            Ordinal::Cnf(t) => Some(t),
            Ordinal::Inf => None,
        }
    }

    /// Ordinal sum `self + other`: terms of `self` below the leading exponent of `other` vanish.
    pub fn add(&self, other: &Ordinal) -> Ordinal {
        let (a, b) = match (self, other) {
            (Ordinal::Cnf(a), Ordinal::Cnf(b)) => (a, b),
            _ => return Ordinal::Inf,
        };
        let Some(&(lead, c)) = b.first() else {
            return self.clone();
        };
        let mut out: Vec<(u32, u64)> = a.iter().copied().filter(|&(k, _)| k > lead).collect();
        let merged = a.iter().find(|&&(k, _)| k == lead).map_or(0, |&(_, c0)| c0);
        out.push((lead, merged + c));
        out.extend(b.iter().skip(1).copied());
        Ordinal::Cnf(out)
    }

    pub fn succ(&self) -> Ordinal {
        self.add(&Ordinal::nat(1))
    }

    pub fn sup<'a, I: IntoIterator<Item = &'a Ordinal>>(items: I) -> Ordinal {
        items.into_iter().fold(Ordinal::zero(), |m, o| if *o > m { o.clone() } else { m })
    }
}

impl Ord for Ordinal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Ordinal::Inf, Ordinal::Inf) => Ordering::Equal,
            (Ordinal::Inf, _) => Ordering::Greater,
            (_, Ordinal::Inf) => Ordering::Less,
            (Ordinal::Cnf(a), Ordinal::Cnf(b)) => {
                for (x, y) in a.iter().zip(b) {
                    let o = x.0.cmp(&y.0).then(x.1.cmp(&y.1));
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                a.len().cmp(&b.len())
            }
        }
    }
}

impl PartialOrd for Ordinal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = match self {
            Ordinal::Inf => return write!(f, "inf"),
            Ordinal::Cnf(t) if t.is_empty() => return write!(f, "0"),
            Ordinal::Cnf(t) => t,
        };
        let parts: Vec<String> = t
            .iter()
            .map(|&(k, c)| {
                let base = match k {
                    0 => return c.to_string(),
                    1 => "w".to_string(),
                    _ => format!("w^{k}"),
                };
                if c == 1 {
                    base
                } else {
                    format!("{base}*{c}")
                }
            })
            .collect();
        write!(f, "{}", parts.join("+"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_absorbs_smaller_left_terms() {
        assert_eq!(Ordinal::nat(2).add(&Ordinal::omega()), Ordinal::omega());
        assert_eq!(Ordinal::omega().add(&Ordinal::nat(2)).to_string(), "w+2");
        assert_eq!(Ordinal::omega().add(&Ordinal::omega()).to_string(), "w*2");
        let a = Ordinal::from_terms(&[(2, 3), (1, 1), (0, 1)]);
        assert_eq!(a.to_string(), "w^2*3+w+1");
        assert_eq!(a.add(&Ordinal::Inf), Ordinal::Inf);
    }

    #[test]
    fn order_is_lexicographic_on_terms() {
        let w2 = Ordinal::Cnf(vec![(2, 1)]);
        let wn = Ordinal::Cnf(vec![(1, 7), (0, 9)]);
        assert!(wn < w2);
        assert!(Ordinal::nat(100) < Ordinal::omega());
        assert!(w2 < Ordinal::Inf);
        assert_eq!(Ordinal::sup([&wn, &w2, &Ordinal::nat(3)]), w2);
        assert_eq!(Ordinal::zero().to_string(), "0");
    }
}
