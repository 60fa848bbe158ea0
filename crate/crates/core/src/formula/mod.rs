//! Continuous-logic formulas: syntax tree, printing, variable bookkeeping.

mod build;
mod parse;
mod prenex;
mod sig;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::q::{fmt_q, Q};

pub use build::*;
pub use parse::{parse_formula, parse_term};
pub use prenex::{is_prenex, prenex};
pub use sig::{formula_modulus, FnSig, PredSig, Signature};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub idx: u32,
    pub sort: Option<String>,
}

impl Var {
    pub fn new(idx: u32) -> Var {
        Var { idx, sort: None }
    }

    pub fn sorted(idx: u32, sort: &str) -> Var {
        Var { idx, sort: Some(sort.to_string()) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Var),
    Const(String),
    App(String, Vec<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quant {
    Sup,
    Inf,
}

impl Quant {
    pub fn flip(self) -> Quant {
        match self {
            Quant::Sup => Quant::Inf,
            Quant::Inf => Quant::Sup,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Const(Q),
    Dist(Term, Term),
    Pred(String, Vec<Term>),
    Max(Vec<Formula>),
    Min(Vec<Formula>),
    Neg(Box<Formula>),
    Monus(Box<Formula>, Box<Formula>),
    /// `u ↦ max(u - 1/m, 0)`
    Cut(u32, Box<Formula>),
    /// `u ↦ clamp(a·u + b, 0, 1)`
    Clamp(Q, Q, Box<Formula>),
    Quant(Quant, Var, Box<Formula>),
}

impl Term {
    pub fn var(idx: u32) -> Term {
        Term::Var(Var::new(idx))
    }

    pub fn konst(name: &str) -> Term {
        Term::Const(name.to_string())
    }

    pub fn app(f: &str, args: Vec<Term>) -> Term {
        Term::App(f.to_string(), args)
    }

    fn collect_vars(&self, out: &mut BTreeSet<u32>) {
        match self {
            Term::Var(v) => {
                out.insert(v.idx);
            }
            Term::Const(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn vars(&self) -> BTreeSet<u32> {
        let mut s = BTreeSet::new();
        self.collect_vars(&mut s);
        s
    }

    pub fn rename(&self, map: &BTreeMap<u32, u32>) -> Term {
        match self {
            Term::Var(v) => Term::Var(Var { idx: *map.get(&v.idx).unwrap_or(&v.idx), sort: v.sort.clone() }),
            Term::Const(c) => Term::Const(c.clone()),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.rename(map)).collect()),
        }
    }

    pub fn substitute(&self, map: &BTreeMap<u32, Term>) -> Term {
        match self {
            Term::Var(v) => map.get(&v.idx).cloned().unwrap_or_else(|| self.clone()),
            Term::Const(_) => self.clone(),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.substitute(map)).collect()),
        }
    }

    fn collect_sorts(&self, out: &mut Vec<(u32, String)>) {
        match self {
            Term::Var(Var { idx, sort: Some(s) }) => out.push((*idx, s.clone())),
            Term::Var(_) | Term::Const(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.collect_sorts(out)),
        }
    }

    /// Strip sort annotations from variables.
    pub fn unsorted(&self) -> Term {
        match self {
            Term::Var(v) => Term::var(v.idx),
            Term::Const(_) => self.clone(),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.unsorted()).collect()),
        }
    }
}

impl Formula {
    pub fn konst(x: Q) -> Formula {
        Formula::Const(x)
    }

    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::Const(_) | Formula::Dist(..) | Formula::Pred(..) => vec![],
            Formula::Max(xs) | Formula::Min(xs) => xs.iter().collect(),
            Formula::Neg(a) | Formula::Cut(_, a) | Formula::Clamp(_, _, a) | Formula::Quant(_, _, a) => vec![a],
            Formula::Monus(a, b) => vec![a, b],
        }
    }

    fn collect_free(&self, bound: &mut Vec<u32>, out: &mut BTreeSet<u32>) {
        match self {
            Formula::Const(_) => {}
            Formula::Dist(a, b) => {
                for v in a.vars().into_iter().chain(b.vars()) {
                    if !bound.contains(&v) {
                        out.insert(v);
                    }
                }
            }
            Formula::Pred(_, args) => {
                for t in args {
                    for v in t.vars() {
                        if !bound.contains(&v) {
                            out.insert(v);
                        }
                    }
                }
            }
            Formula::Quant(_, v, body) => {
                bound.push(v.idx);
                body.collect_free(bound, out);
                bound.pop();
            }
            _ => self.children().into_iter().for_each(|c| c.collect_free(bound, out)),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    pub fn is_sentence(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Every variable index occurring anywhere, bound or free.
    pub fn all_vars(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::Dist(a, b) => {
                a.collect_vars(&mut out);
                b.collect_vars(&mut out);
            }
            Formula::Pred(_, args) => args.iter().for_each(|t| t.collect_vars(&mut out)),
            Formula::Quant(_, v, _) => {
                out.insert(v.idx);
            }
            _ => {}
        });
        out
    }

    pub fn visit<F: FnMut(&Formula)>(&self, f: &mut F) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        let mut qf = true;
        self.visit(&mut |f| {
            if matches!(f, Formula::Quant(..)) {
                qf = false
            }
        });
        qf
    }

    /// Annotated variable sorts as written in the source, in occurrence order.
    pub fn written_sorts(&self) -> Vec<(u32, String)> {
        let mut out = Vec::new();
        self.visit(&mut |f| match f {
            Formula::Dist(a, b) => {
                a.collect_sorts(&mut out);
                b.collect_sorts(&mut out);
            }
            Formula::Pred(_, args) => args.iter().for_each(|t| t.collect_sorts(&mut out)),
            Formula::Quant(_, Var { idx, sort: Some(s) }, _) => out.push((*idx, s.clone())),
            _ => {}
        });
        out
    }

    pub fn predicates(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::Pred(p, _) = f {
                out.insert(p.clone());
            }
        });
        out
    }

    pub fn map_terms(&self, g: &dyn Fn(&Term) -> Term) -> Formula {
        match self {
            Formula::Const(x) => Formula::Const(*x),
            Formula::Dist(a, b) => Formula::Dist(g(a), g(b)),
            Formula::Pred(p, args) => Formula::Pred(p.clone(), args.iter().map(g).collect()),
            Formula::Max(xs) => Formula::Max(xs.iter().map(|x| x.map_terms(g)).collect()),
            Formula::Min(xs) => Formula::Min(xs.iter().map(|x| x.map_terms(g)).collect()),
            Formula::Neg(a) => Formula::Neg(Box::new(a.map_terms(g))),
            Formula::Monus(a, b) => Formula::Monus(Box::new(a.map_terms(g)), Box::new(b.map_terms(g))),
            Formula::Cut(m, a) => Formula::Cut(*m, Box::new(a.map_terms(g))),
            Formula::Clamp(a, b, x) => Formula::Clamp(*a, *b, Box::new(x.map_terms(g))),
            Formula::Quant(k, v, body) => Formula::Quant(*k, v.clone(), Box::new(body.map_terms(g))),
        }
    }

    /// Rename variable indices everywhere (bound and free).
    pub fn rename(&self, map: &BTreeMap<u32, u32>) -> Formula {
        match self {
            Formula::Quant(k, v, body) => Formula::Quant(
                *k,
                Var { idx: *map.get(&v.idx).unwrap_or(&v.idx), sort: v.sort.clone() },
                Box::new(body.rename(map)),
            ),
            Formula::Max(xs) => Formula::Max(xs.iter().map(|x| x.rename(map)).collect()),
            Formula::Min(xs) => Formula::Min(xs.iter().map(|x| x.rename(map)).collect()),
            Formula::Neg(a) => Formula::Neg(Box::new(a.rename(map))),
            Formula::Monus(a, b) => Formula::Monus(Box::new(a.rename(map)), Box::new(b.rename(map))),
            Formula::Cut(m, a) => Formula::Cut(*m, Box::new(a.rename(map))),
            Formula::Clamp(a, b, x) => Formula::Clamp(*a, *b, Box::new(x.rename(map))),
            _ => self.map_terms(&|t| t.rename(map)),
        }
    }

    /// Capture-free substitution of terms for free variables.
    pub fn substitute(&self, map: &BTreeMap<u32, Term>) -> Formula {
        if map.is_empty() {
            return self.clone();
        }
        match self {
            Formula::Quant(k, v, body) => {
                let mut inner = map.clone();
                inner.remove(&v.idx);
                let captured = inner.values().any(|t| t.vars().contains(&v.idx));
                if captured {
                    let fresh = self.all_vars().into_iter().chain(inner.values().flat_map(|t| t.vars())).max().unwrap_or(0) + 1;
                    let body = body.rename(&BTreeMap::from([(v.idx, fresh)]));
                    let nv = Var { idx: fresh, sort: v.sort.clone() };
                    return Formula::Quant(*k, nv, Box::new(body.substitute(&inner)));
                }
                Formula::Quant(*k, v.clone(), Box::new(body.substitute(&inner)))
            }
            Formula::Max(xs) => Formula::Max(xs.iter().map(|x| x.substitute(map)).collect()),
            Formula::Min(xs) => Formula::Min(xs.iter().map(|x| x.substitute(map)).collect()),
            Formula::Neg(a) => Formula::Neg(Box::new(a.substitute(map))),
            Formula::Monus(a, b) => Formula::Monus(Box::new(a.substitute(map)), Box::new(b.substitute(map))),
            Formula::Cut(m, a) => Formula::Cut(*m, Box::new(a.substitute(map))),
            Formula::Clamp(a, b, x) => Formula::Clamp(*a, *b, Box::new(x.substitute(map))),
            _ => self.map_terms(&|t| t.substitute(map)),
        }
    }

    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.sort {
            Some(s) => write!(f, "x{}:{}", self.idx, s),
            None => write!(f, "x{}", self.idx),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "{c}"),
            Term::App(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, head: &str, xs: &[&Formula]) -> fmt::Result {
    write!(f, "{head}(")?;
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{x}")?;
    }
    write!(f, ")")
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Const(x) => write!(f, "{}", fmt_q(x)),
            Formula::Dist(a, b) => write!(f, "d({a},{b})"),
            Formula::Pred(p, args) => {
                write!(f, "{p}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Formula::Max(xs) => write_list(f, "max", &xs.iter().collect::<Vec<_>>()),
            Formula::Min(xs) => write_list(f, "min", &xs.iter().collect::<Vec<_>>()),
            Formula::Neg(a) => write!(f, "neg({a})"),
            Formula::Monus(a, b) => write!(f, "monus({a}, {b})"),
            Formula::Cut(m, a) => write!(f, "cut{m}({a})"),
            Formula::Clamp(a, b, x) => write!(f, "clamp<{},{}>({x})", fmt_q(a), fmt_q(b)),
            Formula::Quant(k, v, body) => {
                let kw = match k {
                    Quant::Sup => "sup",
                    Quant::Inf => "inf",
                };
                write!(f, "{kw} {v} . {body}")
            }
        }
    }
}
