//! Bounds on the value of a prenex formula in the intended infinite model,
//! derived from a finite truncation.
//!
//! The truncation is a substructure, so a `sup` witness gives a lower bound
//! and an `inf` witness an upper bound. The other side needs a density claim
//! `r` for the quantified sort and the body's modulus: every intended point is
//! within `< r` of a finite one, so the body moves by at most `ε` with `Δ(ε) ≥ r`.

use std::fmt;

use num_traits::{One, Zero};

use super::eval::{Assignment, Compiled};
use super::FiniteStructure;
use crate::error::{Error, Result};
use crate::formula::{formula_modulus, is_prenex, Formula, Quant, Var};
use crate::q::{clamp01, fmt_q, monus, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    Exact,
    Lower,
    Upper,
    Interval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub kind: BoundKind,
    pub lo: Q,
    pub hi: Q,
    /// Quantifier witnesses (variable, point name) for the lower bound.
    pub lo_witness: Vec<(u32, String)>,
    pub hi_witness: Vec<(u32, String)>,
    /// Value with the truncation itself taken as the structure.
    pub finite_value: Q,
    /// For the outermost quantifier: each point with the finite value of the rest.
    pub inner: Vec<(String, Q)>,
    pub notes: Vec<String>,
}

impl fmt::Display for EvalResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            BoundKind::Exact => write!(f, "exact({})", fmt_q(&self.lo)),
            BoundKind::Lower => write!(f, "lower({})", fmt_q(&self.lo)),
            BoundKind::Upper => write!(f, "upper({})", fmt_q(&self.hi)),
            BoundKind::Interval => write!(f, "interval({},{})", fmt_q(&self.lo), fmt_q(&self.hi)),
        }
    }
}

struct Node {
    lo: Q,
    lo_cert: bool,
    lo_wit: Vec<(u32, usize)>,
    hi: Q,
    hi_cert: bool,
    hi_wit: Vec<(u32, usize)>,
    fv: Q,
}

struct Ctx<'a> {
    m: &'a FiniteStructure,
    prefix: Vec<(Quant, Var, usize)>,
    /// Slack `ε` per quantifier level, when the sort declares a density radius.
    slack: Vec<Option<Q>>,
    matrix: Compiled<'a>,
}

impl Ctx<'_> {
    fn rec(&self, i: usize, env: &mut Vec<usize>) -> Node {
        if i == self.prefix.len() {
            let v = self.matrix.eval_slots(env);
            return Node { lo: v, lo_cert: true, lo_wit: vec![], hi: v, hi_cert: true, hi_wit: vec![], fv: v };
        }
        let (k, var, sort) = &self.prefix[i];
        let slot = var.idx as usize;
        let n = self.m.sorts[*sort].len();
        let kids: Vec<(usize, Node)> = (0..n)
            .map(|p| {
                env[slot] = p;
                (p, self.rec(i + 1, env))
            })
            .collect();
        let slack = self.slack[i];
        let wit = |p: usize, w: &[(u32, usize)]| {
            let mut out = vec![(var.idx, p)];
            out.extend_from_slice(w);
            out
        };
        match k {
            Quant::Sup => {
                let fv = kids.iter().map(|(_, c)| c.fv).max().unwrap_or_else(Q::zero);
                let best_lo = kids.iter().max_by(|a, b| a.1.lo.cmp(&b.1.lo));
                let (lo, lo_cert, lo_wit) = match best_lo {
                    Some((p, c)) => (c.lo, c.lo_cert, wit(*p, &c.lo_wit)),
                    None => (Q::zero(), true, vec![]),
                };
                let (hi, hi_cert, hi_wit) = match (slack, kids.iter().max_by(|a, b| a.1.hi.cmp(&b.1.hi))) {
                    (Some(e), Some((p, c))) => (clamp01(c.hi + e), kids.iter().all(|k| k.1.hi_cert), wit(*p, &c.hi_wit)),
                    _ => (Q::one(), false, vec![]),
                };
                Node { lo, lo_cert, lo_wit, hi, hi_cert, hi_wit, fv }
            }
            Quant::Inf => {
                let fv = kids.iter().map(|(_, c)| c.fv).min().unwrap_or_else(Q::one);
                let best_hi = kids.iter().min_by(|a, b| a.1.hi.cmp(&b.1.hi));
                let (hi, hi_cert, hi_wit) = match best_hi {
                    Some((p, c)) => (c.hi, c.hi_cert, wit(*p, &c.hi_wit)),
                    None => (Q::one(), true, vec![]),
                };
                let (lo, lo_cert, lo_wit) = match (slack, kids.iter().min_by(|a, b| a.1.lo.cmp(&b.1.lo))) {
                    (Some(e), Some((p, c))) => (monus(c.lo, e), kids.iter().all(|k| k.1.lo_cert), wit(*p, &c.lo_wit)),
                    _ => (Q::zero(), false, vec![]),
                };
                Node { lo, lo_cert, lo_wit, hi, hi_cert, hi_wit, fv }
            }
        }
    }
}

fn split_prefix(f: &Formula) -> (Vec<(Quant, Var)>, Formula) {
    let mut p = Vec::new();
    let mut cur = f;
    while let Formula::Quant(k, v, body) = cur {
        p.push((*k, v.clone()));
        cur = body;
    }
    (p, cur.clone())
}

/// Bounds for the intended model. With `two_sided`, every quantified sort must
/// carry a density radius.
pub fn eval_bounds(f: &Formula, m: &FiniteStructure, asg: &Assignment, two_sided: bool) -> Result<EvalResult> {
    let whole = Compiled::new(f, m)?;
    if f.is_quantifier_free() {
        let v = whole.eval(asg)?;
        return Ok(EvalResult {
            kind: BoundKind::Exact,
            lo: v,
            hi: v,
            lo_witness: vec![],
            hi_witness: vec![],
            finite_value: v,
            inner: vec![],
            notes: vec!["quantifier-free: exact".into()],
        });
    }
    if !is_prenex(f) {
        return Err(Error::Unsupported("eval_bounds needs a prenex formula; apply prenex first".into()));
    }
    let (prefix, matrix) = split_prefix(f);
    let sig = m.signature();
    let mut slack = Vec::new();
    let mut notes = Vec::new();
    let mut resolved = Vec::new();
    for (i, (k, v)) in prefix.iter().enumerate() {
        let sort = whole.sorts[&v.idx];
        resolved.push((*k, v.clone(), sort));
        let s = &m.sorts[sort];
        match s.density {
            Some(r) => {
                let body = prefix[i + 1..]
                    .iter()
                    .rev()
                    .fold(matrix.clone(), |acc, (k, v)| Formula::Quant(*k, v.clone(), Box::new(acc)));
                let md = formula_modulus(&body, &sig)?;
                let e = md.eps_for_radius(r).unwrap_or_else(Q::one);
                notes.push(format!("x{}: sort {} density {} gives slack {}", v.idx, s.name, fmt_q(&r), fmt_q(&e)));
                slack.push(Some(e));
            }
            None => {
                if two_sided {
                    return Err(Error::Invalid(format!("sort {} has no density metadata", s.name)));
                }
                notes.push(format!("x{}: sort {} has no density claim; one-sided", v.idx, s.name));
                slack.push(None);
            }
        }
    }
    let ctx = Ctx { m, prefix: resolved, slack, matrix: Compiled::new(&matrix, m)? };
    let mut env = whole.env_for(asg)?;
    let need = f.all_vars().into_iter().max().map(|x| x as usize + 1).unwrap_or(0);
    if env.len() < need {
        env.resize(need, 0);
    }
    let root = ctx.rec(0, &mut env);
    let (_, v0, s0) = &ctx.prefix[0];
    let inner = (0..m.sorts[*s0].len())
        .map(|p| {
            env[v0.idx as usize] = p;
            (m.sorts[*s0].names[p].clone(), ctx.rec(1, &mut env).fv)
        })
        .collect();
    let name = |w: &[(u32, usize)]| -> Vec<(u32, String)> {
        w.iter()
            .map(|(v, p)| {
                let s = ctx.prefix.iter().find(|x| x.1.idx == *v).map(|x| x.2).unwrap_or(0);
                (*v, m.sorts[s].names[*p].clone())
            })
            .collect()
    };
    let kind = if root.lo == root.hi {
        BoundKind::Exact
    } else if root.lo_cert && root.hi_cert {
        BoundKind::Interval
    } else if root.hi_cert && root.hi < Q::one() {
        BoundKind::Upper
    } else {
        BoundKind::Lower
    };
    Ok(EvalResult {
        kind,
        lo: root.lo,
        hi: root.hi,
        lo_witness: name(&root.lo_wit),
        hi_witness: name(&root.hi_wit),
        finite_value: root.fv,
        inner,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::q::q;
    use crate::structure::Metric;

    fn line() -> FiniteStructure {
        let mut m = FiniteStructure::new("line");
        let t = vec![q(0, 1), q(1, 2), q(1, 1), q(1, 2), q(0, 1), q(1, 1), q(1, 1), q(1, 1), q(0, 1)];
        m.add_sort("D", vec!["a".into(), "b".into(), "c".into()], Metric::Dense(t));
        m
    }

    #[test]
    fn quantifier_free_is_exact() {
        let r = eval_bounds(&parse_formula("d(a,b)").unwrap(), &line(), &Assignment::new(), false).unwrap();
        assert_eq!(r.kind, BoundKind::Exact);
        assert_eq!(r.lo, q(1, 2));
    }

    #[test]
    fn inf_distance_to_self_is_exact_zero() {
        let r = eval_bounds(&parse_formula("inf x0 . d(a,x0)").unwrap(), &line(), &Assignment::new(), false).unwrap();
        assert_eq!(r.kind, BoundKind::Exact);
        assert_eq!(r.hi, q(0, 1));
        assert_eq!(r.hi_witness, vec![(0, "a".to_string())]);
    }

    #[test]
    fn sup_without_density_is_lower() {
        // a witness at the ceiling 1 is already exact; keep the body below it
        let r = eval_bounds(&parse_formula("sup x0 . min(d(a,x0), 1/2)").unwrap(), &line(), &Assignment::new(), false).unwrap();
        assert_eq!(r.kind, BoundKind::Lower);
        assert_eq!(r.lo, q(1, 2));
        assert!(eval_bounds(&parse_formula("sup x0 . d(a,x0)").unwrap(), &line(), &Assignment::new(), true).is_err());
    }

    #[test]
    fn density_gives_two_sided_bounds() {
        let m = line().with_density("D", Some(q(1, 8))).unwrap();
        let r = eval_bounds(&parse_formula("sup x0 . d(b,x0)").unwrap(), &m, &Assignment::new(), true).unwrap();
        assert_eq!((r.lo, r.hi), (q(1, 1), q(1, 1)));
        let r = eval_bounds(&parse_formula("inf x0 . monus(d(c,x0), 1/2)").unwrap(), &m, &Assignment::new(), true).unwrap();
        assert_eq!(r.kind, BoundKind::Exact);
        let r = eval_bounds(&parse_formula("inf x0 . neg(d(a,x0))").unwrap(), &m, &Assignment::new(), true).unwrap();
        assert_eq!((r.lo, r.hi, r.kind), (q(0, 1), q(0, 1), BoundKind::Exact));
        let r = eval_bounds(&parse_formula("sup x0 . neg(d(a,x0))").unwrap(), &m, &Assignment::new(), true).unwrap();
        assert_eq!(r.kind, BoundKind::Exact);
        let r = eval_bounds(&parse_formula("inf x0 . max(d(a,x0), 1/4)").unwrap(), &m, &Assignment::new(), true).unwrap();
        assert_eq!((r.lo, r.hi, r.kind), (q(1, 8), q(1, 4), BoundKind::Interval));
    }
}
