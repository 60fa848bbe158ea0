//! Small constructors for writing formulas in code.

use super::{Formula, Quant, Term, Var};
use crate::q::Q;

pub fn fconst(x: Q) -> Formula {
    Formula::Const(x)
}

pub fn dist(a: Term, b: Term) -> Formula {
    Formula::Dist(a, b)
}

pub fn pred(p: &str, args: Vec<Term>) -> Formula {
    Formula::Pred(p.to_string(), args)
}

pub fn fmax(xs: Vec<Formula>) -> Formula {
    if xs.len() == 1 {
        return xs.into_iter().next().unwrap();
    }
    Formula::Max(xs)
}

pub fn fmin(xs: Vec<Formula>) -> Formula {
    if xs.len() == 1 {
        return xs.into_iter().next().unwrap();
    }
    Formula::Min(xs)
}

pub fn fneg(a: Formula) -> Formula {
    Formula::Neg(Box::new(a))
}

pub fn fmonus(a: Formula, b: Formula) -> Formula {
    Formula::Monus(Box::new(a), Box::new(b))
}

pub fn fcut(m: u32, a: Formula) -> Formula {
    Formula::Cut(m, Box::new(a))
}

pub fn fclamp(a: Q, b: Q, x: Formula) -> Formula {
    Formula::Clamp(a, b, Box::new(x))
}

pub fn sup(v: Var, body: Formula) -> Formula {
    Formula::Quant(Quant::Sup, v, Box::new(body))
}

pub fn inf(v: Var, body: Formula) -> Formula {
    Formula::Quant(Quant::Inf, v, Box::new(body))
}

/// Truncated sum `min(1, u + v)`, written as `neg(monus(neg u, v))`.
pub fn fadd(u: Formula, v: Formula) -> Formula {
    fneg(fmonus(fneg(u), v))
}

/// `|u - v|` as `max(u ∸ v, v ∸ u)`.
pub fn fabsdiff(u: Formula, v: Formula) -> Formula {
    Formula::Max(vec![fmonus(u.clone(), v.clone()), fmonus(v, u)])
}
