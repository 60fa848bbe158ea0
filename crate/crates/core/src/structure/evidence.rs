//! Certified bounds and evidence drawn from finite structures and banks.

use std::fmt;

use num_traits::{One, Zero};

use super::bounds::{eval_bounds, EvalResult};
use super::eval::{Assignment, Compiled};
use super::iso::{verify_iso, IsoWitness, Sublanguage};
use super::realize::{annotate, realizes};
use super::FiniteStructure;
use crate::condition::Condition;
use crate::error::{Error, Result};
use crate::formula::{formula_modulus, is_prenex, prenex, Formula, Term};
use crate::q::{fmt_q, int, pow2_neg, Q};
use crate::types::{PartialType, UniformSequence};

fn symbols(f: &Formula) -> Vec<String> {
    fn term(t: &Term, out: &mut Vec<String>) {
        match t {
            Term::Var(_) => {}
            Term::Const(c) => out.push(c.clone()),
            Term::App(g, args) => {
                out.push(g.clone());
                args.iter().for_each(|a| term(a, out));
            }
        }
    }
    let mut out = Vec::new();
    f.visit(&mut |g| match g {
        Formula::Dist(a, b) => {
            term(a, &mut out);
            term(b, &mut out);
        }
        Formula::Pred(p, args) => {
            out.push(p.clone());
            args.iter().for_each(|a| term(a, &mut out));
        }
        _ => {}
    });
    out.sort();
    out.dedup();
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct EqEvidence {
    /// Certified bound on `|f^A - f^B|`.
    pub delta: Q,
    /// Value-change bound of the matrix for an `ε`-perturbation of every variable.
    pub change: Q,
    pub nvars: usize,
}

fn dense_in(m: &FiniteStructure, w: &IsoWitness, eps: Q, image: bool) -> Result<()> {
    for (si, map) in w.maps.iter().enumerate() {
        let dom: Vec<usize> = if image { map.values().copied().collect() } else { map.keys().copied().collect() };
        for p in 0..m.sorts[si].len() {
            if !dom.iter().any(|&q| m.dist(si, p, q) <= eps) {
                return Err(Error::Invalid(format!(
                    "matched set is not {}-dense: {} is farther from it",
                    fmt_q(&eps),
                    m.sorts[si].names[p]
                )));
            }
        }
    }
    Ok(())
}

/// Bound on `|f^A − f^B|` from an exact `L₀`-isomorphism between `ε`-dense subsets:
/// twice the matrix's value change when each variable moves by at most `ε`.
pub fn eq_evidence(
    a: &FiniteStructure,
    b: &FiniteStructure,
    l0: &Sublanguage,
    eps: Q,
    w: &IsoWitness,
    f: &Formula,
) -> Result<EqEvidence> {
    verify_iso(a, b, l0, w).map_err(|e| Error::Invalid(format!("witness fails exactness: {e}")))?;
    for s in symbols(f) {
        if !l0.contains_symbol(&s) {
            return Err(Error::Invalid(format!("{s} is outside the sublanguage")));
        }
    }
    if !f.is_sentence() {
        return Err(Error::Invalid("eq_evidence needs a sentence".into()));
    }
    if !is_prenex(f) {
        return Err(Error::Unsupported("eq_evidence needs a prenex formula".into()));
    }
    dense_in(a, w, eps, false)?;
    dense_in(b, w, eps, true)?;
    let mut matrix = f;
    while let Formula::Quant(_, _, body) = matrix {
        matrix = body;
    }
    let nvars = matrix.free_vars().len();
    let md = formula_modulus(matrix, &a.signature())?;
    let disp = eps * int(nvars as i64);
    let change = if disp.is_zero() {
        Q::zero()
    } else {
        match md.lipschitz_const() {
            Some(l) => l * disp,
            // Δ(e) ≥ 2·disp > disp, so a displacement of `disp` changes the value by at most e
            None => md.eps_for_radius(disp * int(2)).unwrap_or_else(Q::one),
        }
    };
    let delta = (change * int(2)).min(Q::one());
    Ok(EqEvidence { delta, change: change.min(Q::one()), nvars })
}

fn named(m: &FiniteStructure, c: &Compiled, asg: &Assignment) -> Vec<(u32, String)> {
    asg.iter().map(|(v, p)| (*v, m.sorts[c.sorts[v]].names[*p].clone())).collect()
}

fn assignments(m: &FiniteStructure, c: &Compiled) -> Vec<Assignment> {
    let sorts: Vec<usize> = c.free.iter().map(|v| c.sorts[v]).collect();
    m.tuples(&sorts).into_iter().map(|t| c.free.iter().copied().zip(t).collect()).collect()
}

/// Largest value of `f` over the bank and all assignments: a lower bound of `‖f‖_∞`.
pub fn sup_norm_lower(f: &Formula, bank: &[FiniteStructure]) -> Result<(Q, Option<(usize, Vec<(u32, String)>)>)> {
    if bank.is_empty() {
        return Err(Error::Invalid("empty bank".into()));
    }
    let mut best = Q::zero();
    let mut wit = None;
    let mut usable = 0;
    let mut last_err = None;
    for (mi, m) in bank.iter().enumerate() {
        let c = match Compiled::new(f, m) {
            Ok(c) => c,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        usable += 1;
        for asg in assignments(m, &c) {
            let v = c.eval(&asg)?;
            if v > best || wit.is_none() {
                best = best.max(v);
                wit = Some((mi, named(m, &c, &asg)));
            }
        }
    }
    if usable == 0 {
        return Err(last_err.unwrap_or_else(|| Error::Invalid("no bank structure interprets the formula".into())));
    }
    Ok((best, wit))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoryRow {
    pub sentence: Formula,
    pub value: Q,
    pub bounds: EvalResult,
}

/// Exact values in the truncation and bounds for the intended model.
pub fn theory_fragment(m: &FiniteStructure, sentences: &[Formula]) -> Result<Vec<TheoryRow>> {
    sentences
        .iter()
        .map(|s| {
            if !s.is_sentence() {
                return Err(Error::Invalid(format!("open formula supplied: {s}")));
            }
            let value = super::eval(s, m, &Assignment::new())?;
            let bounds = eval_bounds(&prenex(s)?, m, &Assignment::new(), false)?;
            Ok(TheoryRow { sentence: s.clone(), value, bounds })
        })
        .collect()
}

/// Smallest `max_i d(a_i, b_i)` over bank models and realizing pairs: an upper
/// bound of the type distance, and no more.
pub fn type_distance_lower(
    t: &PartialType,
    s: &PartialType,
    bank: &[FiniteStructure],
    n: usize,
) -> Result<(Q, Option<(usize, Vec<String>, Vec<String>)>)> {
    if t.arity() != s.arity() {
        return Err(Error::Invalid(format!("arity {} vs {}", t.arity(), s.arity())));
    }
    let mut best: Option<(Q, (usize, Vec<String>, Vec<String>))> = None;
    for (mi, m) in bank.iter().enumerate() {
        let Ok((_, sorts)) = annotate(m, &t.vars, &t.fragment(n)) else { continue };
        let (Ok(rt), Ok(rs)) = (realizes(m, t, n, Q::zero()), realizes(m, s, n, Q::zero())) else { continue };
        for a in &rt {
            for b in &rs {
                let d = a.iter().zip(b).zip(&sorts).map(|((x, y), si)| m.dist(*si, *x, *y)).max().unwrap_or_else(Q::zero);
                if best.as_ref().map_or(true, |(v, _)| d < *v) {
                    let nm = |u: &[usize]| u.iter().zip(&sorts).map(|(p, si)| m.sorts[*si].names[*p].clone()).collect();
                    best = Some((d, (mi, nm(a), nm(b))));
                }
            }
        }
    }
    match best {
        Some((d, w)) => Ok((d, Some(w))),
        None => Err(Error::NotFound("no bank model realizes both fragments".into())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TupleVerdict {
    Realized,
    Omitted,
    Unknown,
}

impl fmt::Display for TupleVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TupleVerdict::Realized => "realized",
            TupleVerdict::Omitted => "omitted",
            TupleVerdict::Unknown => "unknown",
        };
        write!(f, "{s}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OmissionReport {
    /// Per tuple: names, `min_{i ≤ I} φ_i`, verdict for `t_n`.
    pub rows: Vec<(Vec<String>, Q, TupleVerdict)>,
    /// `{ā : inf_i φ_i(ā) = 0}` when computable.
    pub zero_set: Option<Vec<Vec<String>>>,
    pub threshold: Q,
}

impl OmissionReport {
    pub fn realized(&self) -> Vec<&Vec<String>> {
        self.rows.iter().filter(|r| r.2 == TupleVerdict::Realized).map(|r| &r.0).collect()
    }

    pub fn omits(&self) -> bool {
        self.rows.iter().all(|r| r.2 == TupleVerdict::Omitted)
    }
}

/// Which tuples realize `t_n = {φ_i ≥ 2^{-n}}`, using members `0..=cutoff` and the tail bound.
pub fn uniform_omission_check(m: &FiniteStructure, u: &UniformSequence, cutoff: usize, n: u32) -> Result<OmissionReport> {
    let used = (cutoff + 1).min(u.formulas.len());
    let remainder = used < u.formulas.len() || u.infinite;
    let tail = if remainder {
        Some(u.tail_lower.ok_or_else(|| Error::Invalid("no tail bound for the members beyond the cutoff".into()))?)
    } else {
        None
    };
    let thr = pow2_neg(n);
    let (conds, sorts) = annotate(m, &u.vars, &u.formulas[..used])?;
    let comp = conds.iter().map(|c| Compiled::new(c, m)).collect::<Result<Vec<_>>>()?;
    let slots = conds.iter().flat_map(|c| c.all_vars()).chain(u.vars.iter().map(|v| v.idx)).max().map(|x| x as usize + 1).unwrap_or(0);
    let mut rows = Vec::new();
    let mut zero = Vec::new();
    for t in m.tuples(&sorts) {
        let mut env = vec![0usize; slots];
        for (v, p) in u.vars.iter().zip(&t) {
            env[v.idx as usize] = *p;
        }
        let mut value = Q::one();
        for c in &comp {
            value = value.min(c.eval_slots(&mut env));
        }
        let names: Vec<String> = t.iter().zip(&sorts).map(|(p, s)| m.sorts[*s].names[*p].clone()).collect();
        let verdict = if value < thr {
            TupleVerdict::Omitted
        } else if tail.map_or(true, |b| b >= thr) {
            TupleVerdict::Realized
        } else {
            TupleVerdict::Unknown
        };
        if value.is_zero() {
            zero.push(names.clone());
        }
        rows.push((names, value, verdict));
    }
    let zero_set = match tail {
        None => Some(zero),
        Some(b) if b > Q::zero() => Some(zero),
        Some(_) => None,
    };
    Ok(OmissionReport { rows, zero_set, threshold: thr })
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProbeVerdict {
    Refuted { model: usize, tuple: Vec<String>, index: usize, value: Q },
    ConsistentWithViolation,
}

/// Search for `ā` satisfying the open condition with some `φ_j(ā) < δ`.
pub fn uniform_principality_probe(bank: &[FiniteStructure], u: &UniformSequence, cond: &Condition, delta: Q) -> Result<ProbeVerdict> {
    let Condition::Open(phi, q) = cond else {
        return Err(Error::Invalid("the probe needs an open condition".into()));
    };
    if delta <= Q::zero() {
        return Ok(ProbeVerdict::ConsistentWithViolation);
    }
    for (mi, m) in bank.iter().enumerate() {
        let mut all = u.formulas.clone();
        all.push(phi.clone());
        let Ok((conds, sorts)) = annotate(m, &u.vars, &all) else { continue };
        let comp = conds.iter().map(|c| Compiled::new(c, m)).collect::<Result<Vec<_>>>()?;
        let (members, guard) = comp.split_at(comp.len() - 1);
        let slots = conds.iter().flat_map(|c| c.all_vars()).chain(u.vars.iter().map(|v| v.idx)).max().map(|x| x as usize + 1).unwrap_or(0);
        for t in m.tuples(&sorts) {
            let mut env = vec![0usize; slots];
            for (v, p) in u.vars.iter().zip(&t) {
                env[v.idx as usize] = *p;
            }
            if guard[0].eval_slots(&mut env) >= *q {
                continue;
            }
            for (j, c) in members.iter().enumerate() {
                let v = c.eval_slots(&mut env);
                if v < delta {
                    let tuple = t.iter().zip(&sorts).map(|(p, s)| m.sorts[*s].names[*p].clone()).collect();
                    return Ok(ProbeVerdict::Refuted { model: mi, tuple, index: j, value: v });
                }
            }
        }
    }
    Ok(ProbeVerdict::ConsistentWithViolation)
}
