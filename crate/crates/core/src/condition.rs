//! Conditions `φ = 0`, `φ < q`, `φ ≤ q` and their normal forms.

use std::fmt;

use num_traits::{One, Zero};

use crate::formula::{fclamp, fmonus, Formula};
use crate::q::{fmt_q, int, Q};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Condition {
    /// `φ = 0`
    Closed(Formula),
    /// `φ < q`
    Open(Formula, Q),
    /// `φ ≤ q`, a closed condition with a threshold
    Le(Formula, Q),
}

impl Condition {
    pub fn formula(&self) -> &Formula {
        match self {
            Condition::Closed(f) | Condition::Open(f, _) | Condition::Le(f, _) => f,
        }
    }

    pub fn is_open(&self) -> bool {
        matches!(self, Condition::Open(..))
    }

    /// Whether a formula value satisfies the condition.
    pub fn holds(&self, value: Q) -> bool {
        match self {
            Condition::Closed(_) => value.is_zero(),
            Condition::Open(_, q) => value < *q,
            Condition::Le(_, q) => value <= *q,
        }
    }
}

/// Normal form with the default `η = ε/2`.
pub fn normalize_condition(c: &Condition) -> Condition {
    match c {
        Condition::Open(_, eps) => normalize_with(c, *eps / int(2)),
        _ => normalize_with(c, Q::one()),
    }
}

/// `open(φ, ε)` becomes `open(f(φ), 1)` with `f(u) = clamp((u - ε + η)/η)`, so that
/// `f(u) = 1` exactly when `u ≥ ε`; `φ ≤ ε` becomes `closed(φ ∸ ε)`.
/// `η` is clipped into `(0, ε]`.
pub fn normalize_with(c: &Condition, eta: Q) -> Condition {
    match c {
        Condition::Closed(f) => Condition::Closed(f.clone()),
        Condition::Le(f, eps) => {
            if *eps < Q::zero() {
                // never satisfied: 1 = 0
                Condition::Closed(Formula::Const(Q::one()))
            } else if eps.is_zero() {
                Condition::Closed(f.clone())
            } else {
                Condition::Closed(fmonus(f.clone(), Formula::Const(*eps)))
            }
        }
        Condition::Open(f, eps) => {
            if *eps <= Q::zero() {
                return Condition::Open(Formula::Const(Q::one()), Q::one());
            }
            let eta = if eta <= Q::zero() || eta > *eps { *eps / int(2) } else { eta };
            let a = Q::one() / eta;
            let b = (eta - *eps) / eta;
            Condition::Open(fclamp(a, b, f.clone()), Q::one())
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Closed(x) => write!(f, "{x} = 0"),
            Condition::Open(x, q) => write!(f, "{x} < {}", fmt_q(q)),
            Condition::Le(x, q) => write!(f, "{x} <= {}", fmt_q(q)),
        }
    }
}
