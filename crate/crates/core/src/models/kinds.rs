//! Concrete types over the models of this module, and the height gap predicates.
//!
//! Infinite types are presented by generators; batch `j` holds the conditions
//! with index `j`, so `fragment(n)` keeps the indices below `n`. For `tS` and
//! `tR` the distance condition of index `j` sits in batch `j + 1`, which makes
//! `fragment(k + 1)` the depth-`k` fragment: prefixes up to `f_k` and height at
//! least `k`.

use std::collections::BTreeMap;

use num_traits::Zero;

use super::baire::canonical_trees;
use crate::error::{Error, Result};
use crate::formula::{dist, fabsdiff, fadd, fclamp, fconst, fmax, fmin, fmonus, fneg, inf, pred, sup, Formula, Term, Var};
use crate::q::{inv_succ, Q};
use crate::trees::{ell, fmt_node, kappa, nat_node, FiniteTree, Node, TreeTerm};
use crate::types::{Generator, PartialType};

#[derive(Clone, Debug)]
pub struct TypeParams {
    /// Level of `s_m`; must be positive.
    pub m: usize,
    /// Colours `n < colours` in the uncoloured-successor conditions.
    pub colours: usize,
    /// Largest colour level `i` in the `t_T2` successor conditions.
    pub levels: usize,
    /// The tree `S` for `tS`, already finite and over plain naturals.
    pub tree: Option<FiniteTree>,
    /// Box of the canonical tree constants `S_n`.
    pub treedepth: usize,
    pub treebranch: usize,
    /// Only constants `S_n` inside `c0^{≤c0}` are named.
    pub c0: usize,
    /// Name of the pair-tree point for `tR`.
    pub pair_point: String,
}

impl Default for TypeParams {
    fn default() -> TypeParams {
        TypeParams {
            m: 1,
            colours: 5,
            levels: 4,
            tree: None,
            treedepth: 2,
            treebranch: 2,
            c0: 2,
            pair_point: "R0".into(),
        }
    }
}

fn x(i: u32) -> Term {
    Term::var(i)
}

fn xs(i: u32, sort: &str) -> Term {
    Term::Var(Var::sorted(i, sort))
}

fn f(k: usize, t: Term) -> Term {
    Term::app(&format!("f{k}"), vec![t])
}

fn node(s: &[crate::trees::Sym]) -> Term {
    Term::konst(&fmt_node(s))
}

fn c(v: Q) -> Formula {
    fconst(v)
}

/// `|d(f_k(x), x) − 1/(k+1)|`: the node `x` lies strictly above level `k`.
fn above(k: usize, t: Term) -> Formula {
    fabsdiff(dist(f(k, t.clone()), t), c(inv_succ(k)))
}

/// `s_m`: sits on level `m`, has successors on every level below the fragment
/// bound, and no immediate successor carries colour `n < colours`.
fn s_m(p: &TypeParams) -> Result<PartialType> {
    let m = p.m;
    if m == 0 {
        return Err(Error::Invalid("s_m needs m ≥ 1".into()));
    }
    let mut conds = vec![dist(f(m, x(0)), x(0)), above(m - 1, x(0))];
    for n in 0..p.colours {
        let y = x(1);
        let body = fmonus(
            fneg(pred(&format!("P_{}_{n}", m + 1), vec![y.clone()])),
            fclamp(Q::from_integer(m as i64), Q::zero(), dist(f(m, y), x(0))),
        );
        conds.push(sup(Var::new(1), body));
    }
    let g = Generator::new(format!("phi_k for {m} < k"), move |k| {
        if k <= m {
            return Vec::new();
        }
        let z = x(1);
        vec![inf(Var::new(1), fadd(dist(f(m, z.clone()), x(0)), above(k, z)))]
    });
    Ok(PartialType::new(&format!("s_{m}"), vec![Var::new(0)], conds).with_generator(g))
}

fn s0_branch() -> PartialType {
    let g = Generator::new("d(x, f_n x) = 1/(n+1)", |n| vec![fabsdiff(dist(x(0), f(n, x(0))), c(inv_succ(n)))]);
    PartialType::empty("s0_branch", vec![Var::new(0)]).with_generator(g)
}

fn s0_escape() -> PartialType {
    let g = Generator::new("d(f1 x, <n>) = 1", |n| vec![fneg(dist(f(1, x(0)), node(&nat_node(&[n as u32]))))]);
    PartialType::empty("s0_escape", vec![Var::new(0)]).with_generator(g)
}

/// Nodes `t` with `κ(t) = k`.
fn kappa_layer(k: usize) -> Vec<Node> {
    if k == 0 {
        return vec![Vec::new()];
    }
    TreeTerm::Full.truncate(k, k as u32).nodes().iter().filter(|s| kappa(s) as usize == k).cloned().collect()
}

/// Least `κ` on the symmetric difference, looking only at nodes with `κ ≤ k`.
fn diff_kappa(a: &FiniteTree, b: &FiniteTree, k: usize) -> Option<usize> {
    a.nodes()
        .symmetric_difference(b.nodes())
        .map(|s| kappa(s) as usize)
        .filter(|&d| d <= k)
        .min()
}

fn t_s(p: &TypeParams) -> Result<PartialType> {
    let s = p.tree.clone().ok_or_else(|| Error::Invalid("tS needs a tree".into()))?;
    let canon = canonical_trees(p.treedepth, p.treebranch, super::DEFAULT_CAP)?;
    let c0 = p.c0;
    let label = format!("tS[{}]", s.nodes().iter().map(|n| fmt_node(n)).collect::<Vec<_>>().join(";"));
    let y = || xs(1, "D2");
    let g = Generator::new("membership and tree distances by level", move |k| {
        let mut out = Vec::new();
        out.push(pred("ee", vec![f(k, xs(0, "D1")), y()]));
        for t in kappa_layer(k) {
            let e = pred("ee", vec![node(&t), y()]);
            out.push(if s.contains(&t) { e } else { fabsdiff(e, c(Q::new(1, ell(&t).max(1) as i64))) });
        }
        for (n, sn) in canon.iter().enumerate() {
            let kn = sn.nodes().iter().map(|t| kappa(t) as usize).max().unwrap_or(0);
            if kn > k.min(c0) {
                continue;
            }
            let d = dist(Term::konst(&format!("S{n}")), y());
            out.push(match diff_kappa(sn, &s, k) {
                Some(dk) => fabsdiff(d, c(inv_succ(dk))),
                None => fmonus(d, c(inv_succ(k + 1))),
            });
        }
        if k > 0 {
            out.push(above(k - 1, xs(0, "D1")));
        }
        out
    });
    Ok(PartialType::empty(&label, vec![Var::sorted(0, "D1"), Var::sorted(1, "D2")]).with_generator(g))
}

fn t_r(p: &TypeParams) -> PartialType {
    let r = p.pair_point.clone();
    let g = Generator::new(format!("ee3(f_k x, f_k c, {r}) and heights"), move |k| {
        let mut out = vec![pred("ee3", vec![f(k, x(0)), f(k, Term::konst("c")), Term::konst(&r)])];
        if k > 0 {
            out.push(above(k - 1, x(0)));
        }
        out
    });
    PartialType::empty(&format!("tR[{}]", p.pair_point), vec![Var::sorted(0, "D1")]).with_generator(g)
}

/// The `g`-power distance in batch `k ≥ 1`; colour avoidance explicit for levels `i ≤ levels`, `n < colours`.
fn t_t2(p: &TypeParams) -> PartialType {
    let mut conds = Vec::new();
    for i in 0..=p.levels {
        for n in 0..p.colours {
            let y = xs(1, "X");
            let body = fmax(vec![
                dist(xs(0, "X"), Term::app("g", vec![y.clone()])),
                pred(&format!("P_{i}_{n}"), vec![Term::app("h", vec![y])]),
            ]);
            conds.push(fneg(inf(Var::sorted(1, "X"), body)));
        }
    }
    let g = Generator::new("inf_y d(x, g^k y)", |k| {
        if k == 0 {
            return Vec::new();
        }
        let mut t = xs(1, "X");
        for _ in 0..k {
            t = Term::app("g", vec![t]);
        }
        vec![inf(Var::sorted(1, "X"), dist(xs(0, "X"), t))]
    });
    PartialType::new("t_T2", vec![Var::sorted(0, "X")], conds).with_generator(g)
}

/// Kinds: `s_m`, `s0_branch`, `s0_escape`, `tS`, `tR`, `t_T2`.
pub fn build_type(kind: &str, p: &TypeParams) -> Result<PartialType> {
    match kind {
        "s_m" | "sm" => s_m(p),
        "s0_branch" => Ok(s0_branch()),
        "s0_escape" => Ok(s0_escape()),
        "tS" => t_s(p),
        "tR" => Ok(t_r(p)),
        "t_T2" | "tT2" => Ok(t_t2(p)),
        _ => Err(Error::Invalid(format!("unknown type kind '{kind}'"))),
    }
}

/// `(Plm, Pgm)` on `x0`: `Plm = sup_y min(1/m ∸ d(x,y), d(x,y))`, `Pgm = 1/(m(m+1)) ∸ Plm`.
pub fn pred_gap(m: usize) -> Result<(Formula, Formula)> {
    if m == 0 {
        return Err(Error::Invalid("gap predicates need m ≥ 1".into()));
    }
    let m = m as i64;
    let d = dist(x(0), x(1));
    let plm = sup(Var::new(1), fmin(vec![fmonus(c(Q::new(1, m)), d.clone()), d]));
    let pgm = fmonus(c(Q::new(1, m * (m + 1))), plm.clone());
    Ok((plm, pgm))
}

/// Condition texts keyed for syntactic comparison.
pub fn fragment_texts(t: &PartialType, n: usize) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for c in t.fragment(n) {
        *out.entry(c.to_string()).or_insert(0) += 1;
    }
    out
}
