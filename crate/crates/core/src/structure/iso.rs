//! Isomorphism search between finite structures restricted to a sublanguage.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::FiniteStructure;
use crate::q::{fmt_q, Q};

/// Symbols kept in the restricted language. The metric is always kept.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sublanguage {
    pub functions: Vec<String>,
    pub predicates: Vec<String>,
    pub constants: Vec<String>,
}

impl Sublanguage {
    pub fn all(m: &FiniteStructure) -> Sublanguage {
        Sublanguage {
            functions: m.functions.iter().map(|f| f.name.clone()).collect(),
            predicates: m.predicates.iter().map(|p| p.name.clone()).collect(),
            constants: m.constants.keys().cloned().collect(),
        }
    }

    pub fn metric_only() -> Sublanguage {
        Sublanguage::default()
    }

    pub fn contains_symbol(&self, s: &str) -> bool {
        self.functions.iter().any(|x| x == s) || self.predicates.iter().any(|x| x == s) || self.constants.iter().any(|x| x == s)
    }
}

/// A partial map from points of `A` to points of `B`, per sort (by sort position).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsoWitness {
    pub maps: Vec<BTreeMap<usize, usize>>,
}

impl IsoWitness {
    pub fn identity(m: &FiniteStructure) -> IsoWitness {
        IsoWitness { maps: m.sorts.iter().map(|s| (0..s.len()).map(|i| (i, i)).collect()).collect() }
    }

    pub fn size(&self) -> usize {
        self.maps.iter().map(|m| m.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum IsoOutcome {
    Found(IsoWitness),
    /// A named invariant on which the structures differ.
    Refused(String),
    /// The search budget ran out.
    Undecided(String),
}

impl fmt::Display for IsoOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IsoOutcome::Found(w) => write!(f, "isomorphic ({} points matched)", w.size()),
            IsoOutcome::Refused(c) => write!(f, "not isomorphic: {c}"),
            IsoOutcome::Undecided(c) => write!(f, "undecided: {c}"),
        }
    }
}

fn sorts_match(a: &FiniteStructure, b: &FiniteStructure) -> Result<(), String> {
    if a.sorts.len() != b.sorts.len() {
        return Err(format!("sort count {} vs {}", a.sorts.len(), b.sorts.len()));
    }
    for (x, y) in a.sorts.iter().zip(&b.sorts) {
        if x.name != y.name {
            return Err(format!("sort {} vs {}", x.name, y.name));
        }
    }
    Ok(())
}

/// Check that `w` preserves the metric and every symbol of `l0` on its domain.
pub fn verify_iso(a: &FiniteStructure, b: &FiniteStructure, l0: &Sublanguage, w: &IsoWitness) -> Result<(), String> {
    sorts_match(a, b)?;
    for (si, map) in w.maps.iter().enumerate() {
        let mut seen = HashMap::new();
        for (&p, &q) in map {
            if p >= a.sorts[si].len() || q >= b.sorts[si].len() {
                return Err(format!("sort {}: point index out of range", a.sorts[si].name));
            }
            if let Some(prev) = seen.insert(q, p) {
                return Err(format!("sort {}: {} and {} both map to {}", a.sorts[si].name, a.sorts[si].names[prev], a.sorts[si].names[p], b.sorts[si].names[q]));
            }
        }
        let pairs: Vec<(usize, usize)> = map.iter().map(|(&p, &q)| (p, q)).collect();
        for (i, &(p, q)) in pairs.iter().enumerate() {
            for &(p2, q2) in &pairs[i + 1..] {
                if a.dist(si, p, p2) != b.dist(si, q, q2) {
                    return Err(format!(
                        "metric: d({},{}) = {} but image distance {}",
                        a.sorts[si].names[p],
                        a.sorts[si].names[p2],
                        fmt_q(&a.dist(si, p, p2)),
                        fmt_q(&b.dist(si, q, q2))
                    ));
                }
            }
        }
    }
    let dom_tuples = |sorts: &[usize]| -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for &s in sorts {
            let mut next = Vec::new();
            for t in &out {
                for &p in w.maps[s].keys() {
                    let mut u = t.clone();
                    u.push(p);
                    next.push(u);
                }
            }
            out = next;
        }
        out
    };
    for name in &l0.functions {
        let (Some(fa), Some(fb)) = (a.function_index(name), b.function_index(name)) else {
            return Err(format!("function {name} missing"));
        };
        let f = &a.functions[fa];
        for t in dom_tuples(&f.args) {
            let img = a.apply(fa, &t);
            let Some(&mapped) = w.maps[f.result].get(&img) else {
                return Err(format!("{name} leaves the matched domain"));
            };
            let tb: Vec<usize> = t.iter().zip(&f.args).map(|(p, s)| w.maps[*s][p]).collect();
            if b.apply(fb, &tb) != mapped {
                return Err(format!("{name} not preserved"));
            }
        }
    }
    for name in &l0.predicates {
        let (Some(pa), Some(pb)) = (a.predicate_index(name), b.predicate_index(name)) else {
            return Err(format!("predicate {name} missing"));
        };
        let p = &a.predicates[pa];
        for t in dom_tuples(&p.args) {
            let tb: Vec<usize> = t.iter().zip(&p.args).map(|(x, s)| w.maps[*s][x]).collect();
            if a.pred_value(pa, &t) != b.pred_value(pb, &tb) {
                return Err(format!("{name} not preserved"));
            }
        }
    }
    for c in &l0.constants {
        let (Some(&(sa, ca)), Some(&(_, cb))) = (a.constants.get(c), b.constants.get(c)) else {
            return Err(format!("constant {c} missing"));
        };
        if w.maps[sa].get(&ca) != Some(&cb) {
            return Err(format!("constant {c} not preserved"));
        }
    }
    Ok(())
}

struct View<'a> {
    m: &'a FiniteStructure,
    /// global index -> (sort, point)
    pts: Vec<(usize, usize)>,
    base: Vec<usize>,
    unary_fns: Vec<usize>,
    unary_preds: Vec<usize>,
}

impl<'a> View<'a> {
    fn new(m: &'a FiniteStructure, l0: &Sublanguage) -> View<'a> {
        let mut pts = Vec::new();
        let mut base = Vec::new();
        for (si, s) in m.sorts.iter().enumerate() {
            base.push(pts.len());
            pts.extend((0..s.len()).map(|p| (si, p)));
        }
        let unary_fns = l0
            .functions
            .iter()
            .filter_map(|n| m.function_index(n))
            .filter(|&i| m.functions[i].args.len() == 1)
            .collect();
        let mut unary_preds: Vec<usize> = l0
            .predicates
            .iter()
            .filter_map(|n| m.predicate_index(n))
            .filter(|&i| m.predicates[i].args.len() == 1)
            .collect();
        unary_preds.sort_by(|x, y| m.predicates[*x].name.cmp(&m.predicates[*y].name));
        View { m, pts, base, unary_fns, unary_preds }
    }

    fn global(&self, s: usize, p: usize) -> usize {
        self.base[s] + p
    }

    fn label(&self, g: usize, l0: &Sublanguage) -> String {
        let (s, p) = self.pts[g];
        let mut parts = vec![format!("sort {}", self.m.sorts[s].name)];
        for &pi in &self.unary_preds {
            if self.m.predicates[pi].args[0] == s {
                parts.push(format!("{}={}", self.m.predicates[pi].name, fmt_q(&self.m.pred_value(pi, &[p]))));
            }
        }
        let mut cs: Vec<&String> = l0.constants.iter().filter(|c| self.m.constants.get(*c) == Some(&(s, p))).collect();
        cs.sort();
        for c in cs {
            parts.push(format!("const {c}"));
        }
        parts.join(", ")
    }
}

type Key = (usize, Vec<(Q, usize)>, Vec<usize>);

/// Joint colour refinement; returns colours for both views, or a certificate.
fn refine(va: &View, vb: &View, l0: &Sublanguage) -> Result<(Vec<usize>, Vec<usize>), String> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut col = |v: &View| -> Vec<usize> {
        (0..v.pts.len())
            .map(|g| {
                let k = v.label(g, l0);
                let n = ids.len();
                *ids.entry(k).or_insert(n)
            })
            .collect()
    };
    let mut ca = col(va);
    let mut cb = col(vb);
    let hist = |c: &[usize]| {
        let mut h: BTreeMap<usize, usize> = BTreeMap::new();
        for &x in c {
            *h.entry(x).or_default() += 1;
        }
        h
    };
    let names: HashMap<usize, String> = ids.iter().map(|(k, v)| (*v, k.clone())).collect();
    let (ha, hb) = (hist(&ca), hist(&cb));
    if ha != hb {
        for id in ha.keys().chain(hb.keys()) {
            let (x, y) = (ha.get(id).copied().unwrap_or(0), hb.get(id).copied().unwrap_or(0));
            if x != y {
                return Err(format!("label-count invariant: [{}] occurs {x} times vs {y}", names[id]));
            }
        }
    }
    for round in 1.. {
        let mut table: HashMap<Key, usize> = HashMap::new();
        let step = |v: &View, c: &[usize], table: &mut HashMap<Key, usize>| -> Vec<usize> {
            (0..v.pts.len())
                .map(|g| {
                    let (s, p) = v.pts[g];
                    let mut prof: Vec<(Q, usize)> =
                        (0..v.m.sorts[s].len()).filter(|&q| q != p).map(|q| (v.m.dist(s, p, q), c[v.global(s, q)])).collect();
                    prof.sort();
                    let fimg: Vec<usize> = v
                        .unary_fns
                        .iter()
                        .filter(|&&fi| v.m.functions[fi].args[0] == s)
                        .map(|&fi| c[v.global(v.m.functions[fi].result, v.m.apply(fi, &[p]))])
                        .collect();
                    let key = (c[g], prof, fimg);
                    let n = table.len();
                    *table.entry(key).or_insert(n)
                })
                .collect()
        };
        let na = step(va, &ca, &mut table);
        let nb = step(vb, &cb, &mut table);
        let (ha, hb) = (hist(&na), hist(&nb));
        if ha != hb {
            let bad = ha.keys().chain(hb.keys()).find(|id| ha.get(id) != hb.get(id)).copied().unwrap();
            let old = table.iter().find(|(_, v)| **v == bad).map(|(k, _)| k.0).unwrap_or(0);
            return Err(format!(
                "distance-profile invariant (refinement round {round}) within class [{}]: {} vs {} points",
                if round == 1 { names.get(&old).cloned().unwrap_or_default() } else { format!("refined class {old}") },
                ha.get(&bad).copied().unwrap_or(0),
                hb.get(&bad).copied().unwrap_or(0)
            ));
        }
        let stable = ha.len() == hist(&ca).len();
        ca = na;
        cb = nb;
        if stable {
            break;
        }
    }
    Ok((ca, cb))
}

struct Search<'a> {
    va: &'a View<'a>,
    vb: &'a View<'a>,
    ca: Vec<usize>,
    cb: Vec<usize>,
    order: Vec<usize>,
    fwd: Vec<usize>,
    back: Vec<usize>,
    budget: u64,
}

const NONE: usize = usize::MAX;

impl Search<'_> {
    fn consistent(&self, g: usize, h: usize) -> bool {
        let (s, p) = self.va.pts[g];
        let (_, q) = self.vb.pts[h];
        let (ma, mb) = (self.va.m, self.vb.m);
        for p2 in 0..ma.sorts[s].len() {
            let g2 = self.va.global(s, p2);
            let h2 = self.fwd[g2];
            if h2 != NONE && ma.dist(s, p, p2) != mb.dist(s, q, self.vb.pts[h2].1) {
                return false;
            }
        }
        for (k, &fa) in self.va.unary_fns.iter().enumerate() {
            let fb = self.vb.unary_fns[k];
            if ma.functions[fa].args[0] != s {
                continue;
            }
            let r = ma.functions[fa].result;
            let ia = self.va.global(r, ma.apply(fa, &[p]));
            let ib = self.vb.global(r, mb.apply(fb, &[q]));
            let self_map = ia == g;
            if self_map != (ib == h) {
                return false;
            }
            if !self_map {
                if self.fwd[ia] != NONE && self.fwd[ia] != ib {
                    return false;
                }
                if self.back[ib] != NONE && self.back[ib] != ia {
                    return false;
                }
            }
        }
        true
    }

    fn go(&mut self, i: usize) -> Option<bool> {
        if i == self.order.len() {
            return Some(true);
        }
        let g = self.order[i];
        let (s, _) = self.va.pts[g];
        let lo = self.vb.base[s];
        let hi = lo + self.vb.m.sorts[s].len();
        for h in lo..hi {
            if self.back[h] != NONE || self.cb[h] != self.ca[g] {
                continue;
            }
            if self.budget == 0 {
                return None;
            }
            self.budget -= 1;
            if !self.consistent(g, h) {
                continue;
            }
            self.fwd[g] = h;
            self.back[h] = g;
            match self.go(i + 1) {
                Some(true) => return Some(true),
                None => return None,
                Some(false) => {}
            }
            self.fwd[g] = NONE;
            self.back[h] = NONE;
        }
        Some(false)
    }
}

/// Backtracking search guided by colour refinement.
pub fn find_iso(a: &FiniteStructure, b: &FiniteStructure, l0: &Sublanguage) -> IsoOutcome {
    if let Err(e) = sorts_match(a, b) {
        return IsoOutcome::Refused(e);
    }
    for (x, y) in a.sorts.iter().zip(&b.sorts) {
        if x.len() != y.len() {
            return IsoOutcome::Refused(format!("sort {} has {} vs {} points", x.name, x.len(), y.len()));
        }
    }
    let va = View::new(a, l0);
    let vb = View::new(b, l0);
    let (ca, cb) = match refine(&va, &vb, l0) {
        Ok(c) => c,
        Err(cert) => return IsoOutcome::Refused(cert),
    };
    let mut size: HashMap<usize, usize> = HashMap::new();
    for &c in &ca {
        *size.entry(c).or_default() += 1;
    }
    let mut order: Vec<usize> = (0..va.pts.len()).collect();
    order.sort_by_key(|&g| (size[&ca[g]], g));
    let n = va.pts.len();
    let mut s = Search { va: &va, vb: &vb, ca, cb, order, fwd: vec![NONE; n], back: vec![NONE; n], budget: 5_000_000 };
    match s.go(0) {
        None => IsoOutcome::Undecided("search budget exhausted".into()),
        Some(false) => IsoOutcome::Refused("exhaustive backtracking found no matching bijection".into()),
        Some(true) => {
            let mut maps: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); a.sorts.len()];
            for g in 0..n {
                let (si, p) = va.pts[g];
                maps[si].insert(p, vb.pts[s.fwd[g]].1);
            }
            let w = IsoWitness { maps };
            match verify_iso(a, b, l0, &w) {
                Ok(()) => IsoOutcome::Found(w),
                // symbols of higher arity are only checked here; fall back to refusal text
                Err(e) => IsoOutcome::Undecided(format!("first candidate failed verification: {e}")),
            }
        }
    }
}

/// Try every sort-preserving bijection. For cross-checking on tiny structures.
pub fn perm_iso_exhaustive(a: &FiniteStructure, b: &FiniteStructure, l0: &Sublanguage) -> bool {
    if sorts_match(a, b).is_err() || a.sorts.iter().zip(&b.sorts).any(|(x, y)| x.len() != y.len()) {
        return false;
    }
    fn perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }
    let per_sort: Vec<Vec<Vec<usize>>> = a.sorts.iter().map(|s| perms(s.len())).collect();
    let mut idx = vec![0usize; per_sort.len()];
    loop {
        let maps = idx
            .iter()
            .enumerate()
            .map(|(si, &k)| per_sort[si][k].iter().enumerate().map(|(p, &q)| (p, q)).collect())
            .collect();
        if verify_iso(a, b, l0, &IsoWitness { maps }).is_ok() {
            return true;
        }
        let mut i = 0;
        loop {
            if i == idx.len() {
                return false;
            }
            idx[i] += 1;
            if idx[i] < per_sort[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}
