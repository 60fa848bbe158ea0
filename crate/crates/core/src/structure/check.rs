//! Validation of metric axioms and declared moduli.
//!
//! Ultrametric sorts (tree, discrete, and any table passing the minimax
//! certificate) get a cluster hierarchy. For an `L`-Lipschitz claim over an
//! ultrametric domain it suffices that the image of every cluster has
//! diameter at most `L` times the cluster height, which turns the pair scan
//! into a single bottom-up pass.

use std::fmt;

use num_traits::{One, Signed, Zero};

use super::{FiniteStructure, FnTable, Metric, Sort};
use crate::q::{fmt_q, Q};

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.detail)
    }
}

fn violation(kind: &str, detail: String) -> Violation {
    Violation { kind: kind.to_string(), detail }
}

/// Cluster tree of an ultrametric. Leaves `0..n` are the points.
pub(crate) struct Hier {
    pub n: usize,
    pub parent: Vec<usize>,
    pub children: Vec<Vec<usize>>,
    pub height: Vec<Q>,
    pub depth: Vec<usize>,
    /// Internal nodes, children before parents.
    pub order: Vec<usize>,
}

impl Hier {
    fn finish(n: usize, children: Vec<Vec<usize>>, height: Vec<Q>, root: usize) -> Hier {
        let total = children.len();
        let mut parent = vec![usize::MAX; total];
        let mut depth = vec![0usize; total];
        let mut order = Vec::new();
        let mut stack = vec![(root, false)];
        while let Some((v, done)) = stack.pop() {
            if v < n {
                continue;
            }
            if done {
                order.push(v);
                continue;
            }
            stack.push((v, true));
            for &c in &children[v] {
                parent[c] = v;
                depth[c] = depth[v] + 1;
                stack.push((c, false));
            }
        }
        Hier { n, parent, children, height, depth, order }
    }

    pub fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b];
        }
        while a != b {
            a = self.parent[a];
            b = self.parent[b];
        }
        a
    }

    pub fn dist(&self, a: usize, b: usize) -> Q {
        if a == b {
            Q::zero()
        } else {
            self.height[self.lca(a, b)]
        }
    }

    /// Leaves below a node.
    pub fn leaves(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            if x < self.n {
                out.push(x);
            } else {
                stack.extend(self.children[x].iter().copied());
            }
        }
        out
    }

    fn from_tree(parent: &[Option<usize>], depth: &[usize]) -> Hier {
        let n = parent.len();
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut roots = Vec::new();
        for (i, p) in parent.iter().enumerate() {
            match p {
                Some(p) => kids[*p].push(i),
                None => roots.push(i),
            }
        }
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut height = vec![Q::zero(); n];
        let mut cluster: Vec<usize> = (0..n).collect();
        for w in (0..n).rev() {
            if kids[w].is_empty() {
                continue;
            }
            let mut ch = vec![w];
            ch.extend(kids[w].iter().map(|&c| cluster[c]));
            children.push(ch);
            height.push(Q::new(1, depth[w] as i64 + 1));
            cluster[w] = children.len() - 1;
        }
        let root = if roots.len() == 1 {
            cluster[roots[0]]
        } else {
            children.push(roots.iter().map(|&r| cluster[r]).collect());
            height.push(Q::one());
            children.len() - 1
        };
        Hier::finish(n, children, height, root)
    }

    /// Single-linkage dendrogram from a minimum spanning tree, merging equal heights.
    fn from_distances(n: usize, d: &dyn Fn(usize, usize) -> Q) -> Hier {
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut height = vec![Q::zero(); n];
        if n <= 1 {
            children.push((0..n).collect());
            height.push(Q::zero());
            return Hier::finish(n, children, height, n);
        }
        // Prim
        let mut in_tree = vec![false; n];
        let mut best: Vec<(Q, usize)> = (0..n).map(|i| (d(0, i), 0)).collect();
        in_tree[0] = true;
        let mut edges = Vec::with_capacity(n - 1);
        for _ in 1..n {
            let mut pick = usize::MAX;
            for v in 0..n {
                if !in_tree[v] && (pick == usize::MAX || best[v].0 < best[pick].0) {
                    pick = v;
                }
            }
            in_tree[pick] = true;
            edges.push((best[pick].0, best[pick].1, pick));
            for v in 0..n {
                if !in_tree[v] {
                    let dv = d(pick, v);
                    if dv < best[v].0 {
                        best[v] = (dv, pick);
                    }
                }
            }
        }
        edges.sort_by(|a, b| a.0.cmp(&b.0));
        let mut uf: Vec<usize> = (0..n).collect();
        let mut top: Vec<usize> = (0..n).collect();
        fn find(uf: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while uf[r] != r {
                r = uf[r];
            }
            let mut y = x;
            while uf[y] != r {
                let nx = uf[y];
                uf[y] = r;
                y = nx;
            }
            r
        }
        for (h, a, b) in edges {
            let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
            let (ta, tb) = (top[ra], top[rb]);
            let mut ch = Vec::new();
            for t in [ta, tb] {
                if t >= n && height[t] == h {
                    ch.extend(children[t].iter().copied());
                } else {
                    ch.push(t);
                }
            }
            children.push(ch);
            height.push(h);
            uf[ra] = rb;
            top[rb] = children.len() - 1;
        }
        let root = children.len() - 1;
        Hier::finish(n, children, height, root)
    }
}

/// The cluster hierarchy of a sort, when its metric is an ultrametric.
pub(crate) fn hierarchy(s: &Sort) -> Option<Hier> {
    let n = s.len();
    match &s.metric {
        Metric::Tree { parent, depth } => Some(Hier::from_tree(parent, depth)),
        Metric::Discrete => {
            let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut height = vec![Q::zero(); n];
            children.push((0..n).collect());
            height.push(if n > 1 { Q::one() } else { Q::zero() });
            Some(Hier::finish(n, children, height, n))
        }
        _ => {
            let h = Hier::from_distances(n, &|a, b| s.dist(a, b));
            for a in 0..n {
                for b in a + 1..n {
                    if h.dist(a, b) != s.dist(a, b) {
                        return None;
                    }
                }
            }
            Some(h)
        }
    }
}

fn check_metric(s: &Sort, out: &mut Vec<Violation>) {
    let n = s.len();
    let name = |i: usize| s.names[i].as_str();
    if let Metric::Tree { parent, depth } = &s.metric {
        for (i, p) in parent.iter().enumerate() {
            match p {
                Some(p) if *p >= i || depth[i] != depth[*p] + 1 => out.push(violation(
                    "tree order",
                    format!("sort {}: node {} has inconsistent parent/depth", s.name, name(i)),
                )),
                None if depth[i] != 0 => {
                    out.push(violation("tree order", format!("sort {}: root {} has nonzero depth", s.name, name(i))))
                }
                _ => {}
            }
        }
        return;
    }
    if let Metric::Dense(t) = &s.metric {
        if t.len() != n * n {
            out.push(violation("metric table", format!("sort {}: {} entries for {n} points", s.name, t.len())));
            return;
        }
        for a in 0..n {
            if !t[a * n + a].is_zero() {
                out.push(violation("zero diagonal", format!("sort {}: d({},{}) = {}", s.name, name(a), name(a), fmt_q(&t[a * n + a]))));
            }
        }
    }
    let before = out.len();
    for a in 0..n {
        for b in a + 1..n {
            let (x, y) = (s.dist(a, b), s.dist(b, a));
            if x != y {
                out.push(violation("symmetry", format!("sort {}: d({},{}) = {} but d({},{}) = {}", s.name, name(a), name(b), fmt_q(&x), name(b), name(a), fmt_q(&y))));
            }
            if x.is_zero() {
                out.push(violation("identity of indiscernibles", format!("sort {}: d({},{}) = 0", s.name, name(a), name(b))));
            }
            if x.is_negative() || x > Q::one() {
                out.push(violation("diameter", format!("sort {}: d({},{}) = {} outside [0,1]", s.name, name(a), name(b), fmt_q(&x))));
            }
        }
    }
    if out.len() > before || hierarchy(s).is_some() {
        return;
    }
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if s.dist(a, c) > s.dist(a, b) + s.dist(b, c) {
                    out.push(violation(
                        "triangle inequality",
                        format!("sort {}: d({},{}) > d({},{}) + d({},{})", s.name, name(a), name(c), name(a), name(b), name(b), name(c)),
                    ));
                    return;
                }
            }
        }
    }
}

/// A symbol column: one argument varies, the others are fixed.
enum Column<'a> {
    Values(Vec<Q>),
    Points(Vec<usize>, &'a Sort, Option<&'a Hier>),
}

fn column_ok(col: &Column, dom: &Sort, hd: Option<&Hier>, l: Q) -> Option<(usize, usize, Q, Q)> {
    let n = dom.len();
    let change = |a: usize, b: usize| -> Q {
        match col {
            Column::Values(v) => (v[a] - v[b]).abs(),
            Column::Points(p, s, _) => s.dist(p[a], p[b]),
        }
    };
    let pair_scan = |leaves: &[usize]| {
        for (i, &a) in leaves.iter().enumerate() {
            for &b in &leaves[i + 1..] {
                let (c, d) = (change(a, b), dom.dist(a, b));
                if c > l * d {
                    return Some((a, b, c, d));
                }
            }
        }
        None
    };
    let Some(h) = hd else {
        let all: Vec<usize> = (0..n).collect();
        return pair_scan(&all);
    };
    match col {
        Column::Values(v) => {
            let total = h.children.len();
            let mut lo = vec![Q::zero(); total];
            let mut hi = vec![Q::zero(); total];
            for i in 0..n {
                lo[i] = v[i];
                hi[i] = v[i];
            }
            for &u in &h.order {
                let (mut a, mut b) = (Q::one(), Q::zero());
                for &c in &h.children[u] {
                    a = a.min(lo[c]);
                    b = b.max(hi[c]);
                }
                lo[u] = a;
                hi[u] = b;
                if b - a > l * h.height[u] {
                    return pair_scan(&h.leaves(u));
                }
            }
            None
        }
        Column::Points(p, _, Some(hc)) => {
            let total = h.children.len();
            let mut agg: Vec<(usize, bool)> = vec![(0, false); total];
            for i in 0..n {
                agg[i] = (p[i], false);
            }
            for &u in &h.order {
                let mut acc: Option<(usize, bool)> = None;
                for &c in &h.children[u] {
                    let x = agg[c];
                    acc = Some(match acc {
                        None => x,
                        Some((l0, m0)) => {
                            let lc = hc.lca(l0, x.0);
                            (lc, m0 || x.1 || l0 != x.0)
                        }
                    });
                }
                let a = acc.unwrap_or((0, false));
                agg[u] = a;
                let diam = if a.1 { hc.height[a.0] } else { Q::zero() };
                if diam > l * h.height[u] {
                    return pair_scan(&h.leaves(u));
                }
            }
            None
        }
        Column::Points(..) => {
            let all: Vec<usize> = (0..n).collect();
            pair_scan(&all)
        }
    }
}

struct Hiers(Vec<Option<Hier>>);

fn check_lipschitz(
    m: &FiniteStructure,
    hs: &Hiers,
    name: &str,
    args: &[usize],
    l: Q,
    value: &dyn Fn(&[usize]) -> Result<Q, usize>,
    result: Option<usize>,
    out: &mut Vec<Violation>,
) {
    for pos in 0..args.len() {
        let dom = &m.sorts[args[pos]];
        let others: Vec<usize> = args.iter().enumerate().filter(|(i, _)| *i != pos).map(|(_, s)| *s).collect();
        for fix in m.tuples(&others) {
            let mut tuple: Vec<usize> = Vec::with_capacity(args.len());
            let build = |x: usize, t: &mut Vec<usize>| {
                t.clear();
                t.extend_from_slice(&fix[..pos]);
                t.push(x);
                t.extend_from_slice(&fix[pos..]);
            };
            let col = match result {
                None => Column::Values(
                    (0..dom.len())
                        .map(|x| {
                            build(x, &mut tuple);
                            value(&tuple).unwrap_or_else(|_| Q::zero())
                        })
                        .collect(),
                ),
                Some(r) => Column::Points(
                    (0..dom.len())
                        .map(|x| {
                            build(x, &mut tuple);
                            value(&tuple).err().unwrap_or(0)
                        })
                        .collect(),
                    &m.sorts[r],
                    hs.0[r].as_ref(),
                ),
            };
            let constant = match &col {
                Column::Values(v) => v.windows(2).all(|w| w[0] == w[1]),
                Column::Points(p, ..) => p.windows(2).all(|w| w[0] == w[1]),
            };
            if constant {
                continue;
            }
            if let Some((a, b, c, d)) = column_ok(&col, dom, hs.0[args[pos]].as_ref(), l) {
                let mut ta = Vec::new();
                build(a, &mut ta);
                let mut tb = Vec::new();
                build(b, &mut tb);
                let show = |t: &[usize]| t.iter().zip(args).map(|(p, s)| m.sorts[*s].names[*p].clone()).collect::<Vec<_>>().join(",");
                out.push(violation(
                    "modulus violation",
                    format!(
                        "{name}: ({}) vs ({}) change {} > {}·{}",
                        show(&ta),
                        show(&tb),
                        fmt_q(&c),
                        fmt_q(&l),
                        fmt_q(&d)
                    ),
                ));
                return;
            }
        }
    }
}

fn check_general_modulus(
    m: &FiniteStructure,
    name: &str,
    args: &[usize],
    md: &crate::modulus::Modulus,
    value: &dyn Fn(&[usize]) -> Q,
    out: &mut Vec<Violation>,
) {
    let tuples = m.tuples(args);
    for (i, a) in tuples.iter().enumerate() {
        for b in &tuples[i + 1..] {
            let d: Q = a.iter().zip(b).zip(args).map(|((x, y), s)| m.dist(*s, *x, *y)).sum();
            let c = value(a) - value(b);
            let c = c.abs();
            // largest ε whose radius does not exceed d; the change must stay below it
            if c > md.tolerance_at(d) {
                out.push(violation("modulus violation", format!("{name}: change {} at distance {} exceeds modulus {md}", fmt_q(&c), fmt_q(&d))));
                return;
            }
        }
    }
}

/// Every metric-axiom and modulus violation. Empty means valid.
pub fn check_structure(m: &FiniteStructure) -> Vec<Violation> {
    let mut out = Vec::new();
    for s in &m.sorts {
        check_metric(s, &mut out);
    }
    if !out.is_empty() {
        return out;
    }
    let hs = Hiers(m.sorts.iter().map(hierarchy).collect());
    for (name, (s, p)) in &m.constants {
        if *s >= m.sorts.len() || *p >= m.sorts[*s].len() {
            out.push(violation("constant", format!("{name} does not resolve to a point")));
        }
    }
    for (fi, f) in m.functions.iter().enumerate() {
        let rs = m.sorts[f.result].len();
        let mut bad = false;
        if let FnTable::Dense(t) = &f.table {
            if let Some(x) = t.iter().find(|&&x| x >= rs) {
                out.push(violation("function table", format!("{} has value {x} outside sort {}", f.name, m.sorts[f.result].name)));
                bad = true;
            }
        }
        if bad {
            continue;
        }
        let Some(md) = &f.modulus else { continue };
        let value = |t: &[usize]| -> Result<Q, usize> { Err(m.apply(fi, t)) };
        match md.lipschitz_const() {
            Some(l) => check_lipschitz(m, &hs, &f.name, &f.args, l, &value, Some(f.result), &mut out),
            None => {
                // treat the result point's distance to a fixed reference as the value change proxy
                let tuples = m.tuples(&f.args);
                'outer: for (i, a) in tuples.iter().enumerate() {
                    for b in &tuples[i + 1..] {
                        let d: Q = a.iter().zip(b).zip(&f.args).map(|((x, y), s)| m.dist(*s, *x, *y)).sum();
                        let c = m.dist(f.result, m.apply(fi, a), m.apply(fi, b));
                        if c > md.tolerance_at(d) {
                            out.push(violation("modulus violation", format!("{}: change {} at distance {} exceeds modulus {md}", f.name, fmt_q(&c), fmt_q(&d))));
                            break 'outer;
                        }
                    }
                }
            }
        }
    }
    for (pi, p) in m.predicates.iter().enumerate() {
        let tuples = m.tuples(&p.args);
        if let Some(t) = tuples.iter().find(|t| {
            let v = m.pred_value(pi, t);
            v.is_negative() || v > Q::one()
        }) {
            out.push(violation("predicate range", format!("{} has value {} outside [0,1]", p.name, fmt_q(&m.pred_value(pi, t)))));
            continue;
        }
        let Some(md) = &p.modulus else { continue };
        match md.lipschitz_const() {
            Some(l) => {
                let value = |t: &[usize]| -> Result<Q, usize> { Ok(m.pred_value(pi, t)) };
                check_lipschitz(m, &hs, &p.name, &p.args, l, &value, None, &mut out)
            }
            None => check_general_modulus(m, &p.name, &p.args, md, &|t| m.pred_value(pi, t), &mut out),
        }
    }
    out
}

#[cfg(test)]
/// Exhaustive Lipschitz check without any hierarchy shortcut; used to cross-check.
pub(crate) fn lipschitz_exhaustive(m: &FiniteStructure, symbol: &str, l: Q) -> bool {
    if let Some(fi) = m.function_index(symbol) {
        let f = &m.functions[fi];
        let tuples = m.tuples(&f.args);
        return tuples.iter().enumerate().all(|(i, a)| {
            tuples[i + 1..].iter().all(|b| {
                let d: Q = a.iter().zip(b).zip(&f.args).map(|((x, y), s)| m.dist(*s, *x, *y)).sum();
                m.dist(f.result, m.apply(fi, a), m.apply(fi, b)) <= l * d
            })
        });
    }
    if let Some(pi) = m.predicate_index(symbol) {
        let p = &m.predicates[pi];
        let tuples = m.tuples(&p.args);
        return tuples.iter().enumerate().all(|(i, a)| {
            tuples[i + 1..].iter().all(|b| {
                let d: Q = a.iter().zip(b).zip(&p.args).map(|((x, y), s)| m.dist(*s, *x, *y)).sum();
                (m.pred_value(pi, a) - m.pred_value(pi, b)).abs() <= l * d
            })
        });
    }
    false
}

/// Smallest Lipschitz constant of a symbol's table, by exhaustive pairs.
pub fn best_lipschitz(m: &FiniteStructure, symbol: &str) -> Option<Q> {
    let mut best = Q::zero();
    let mut ratio = |c: Q, d: Q| {
        if !d.is_zero() && c / d > best {
            best = c / d;
        }
    };
    if let Some(fi) = m.function_index(symbol) {
        let f = &m.functions[fi];
        let tuples = m.tuples(&f.args);
        for (i, a) in tuples.iter().enumerate() {
            for b in &tuples[i + 1..] {
                let d: Q = a.iter().zip(b).zip(&f.args).map(|((x, y), s)| m.dist(*s, *x, *y)).sum();
                ratio(m.dist(f.result, m.apply(fi, a), m.apply(fi, b)), d);
            }
        }
        return Some(best);
    }
    let pi = m.predicate_index(symbol)?;
    let p = &m.predicates[pi];
    let tuples = m.tuples(&p.args);
    for (i, a) in tuples.iter().enumerate() {
        for b in &tuples[i + 1..] {
            let d: Q = a.iter().zip(b).zip(&p.args).map(|((x, y), s)| m.dist(*s, *x, *y)).sum();
            ratio((m.pred_value(pi, a) - m.pred_value(pi, b)).abs(), d);
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulus::Modulus;
    use crate::q::q;
    use crate::structure::{FnTable, PredTable};

    fn chain() -> FiniteStructure {
        // <> - <0> - <0,0>, plus <1>
        let mut m = FiniteStructure::new("chain");
        m.add_sort(
            "D",
            vec!["<>".into(), "<0>".into(), "<1>".into(), "<0,0>".into()],
            Metric::tree(vec![None, Some(0), Some(0), Some(1)]).unwrap(),
        );
        m
    }

    #[test]
    fn one_point_is_valid() {
        let mut m = FiniteStructure::new("one");
        m.add_sort("D", vec!["a".into()], Metric::Discrete);
        assert!(check_structure(&m).is_empty());
    }

    #[test]
    fn zero_distance_between_distinct_points() {
        let mut m = FiniteStructure::new("bad");
        m.add_sort("D", vec!["a".into(), "b".into()], Metric::Dense(vec![q(0, 1); 4]));
        let r = check_structure(&m);
        assert_eq!(r[0].kind, "identity of indiscernibles");
    }

    #[test]
    fn triangle_violation_found() {
        let mut m = FiniteStructure::new("bad");
        let t = vec![q(0, 1), q(1, 4), q(1, 1), q(1, 4), q(0, 1), q(1, 4), q(1, 1), q(1, 4), q(0, 1)];
        m.add_sort("D", vec!["a".into(), "b".into(), "c".into()], Metric::Dense(t));
        assert_eq!(check_structure(&m)[0].kind, "triangle inequality");
    }

    #[test]
    fn hierarchy_matches_exhaustive_lipschitz() {
        let mut m = chain();
        // P jumps by 1 between <0> and <0,0>, which are at distance 1/2
        m.add_predicate("P", &["D"], PredTable::Dense(vec![q(0, 1), q(0, 1), q(1, 1), q(1, 1)]), Some(Modulus::lipschitz(q(2, 1)))).unwrap();
        m.add_function("f", &["D"], "D", FnTable::Dense(vec![0, 1, 0, 1]), Some(Modulus::lipschitz(q(1, 1)))).unwrap();
        assert_eq!(check_structure(&m), vec![]);
        assert!(lipschitz_exhaustive(&m, "P", q(2, 1)));
        assert!(!lipschitz_exhaustive(&m, "P", q(3, 2)));
        m.predicates[0].modulus = Some(Modulus::lipschitz(q(3, 2)));
        let r = check_structure(&m);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].kind, "modulus violation");
        assert_eq!(best_lipschitz(&m, "P"), Some(q(2, 1)));
    }

    #[test]
    fn dense_ultrametric_gets_hierarchy() {
        let mut m = FiniteStructure::new("u");
        let t = vec![q(0, 1), q(1, 2), q(1, 1), q(1, 2), q(0, 1), q(1, 1), q(1, 1), q(1, 1), q(0, 1)];
        m.add_sort("D", vec!["a".into(), "b".into(), "c".into()], Metric::Dense(t));
        let h = hierarchy(&m.sorts[0]).unwrap();
        assert_eq!(h.dist(0, 1), q(1, 2));
        assert_eq!(h.dist(0, 2), q(1, 1));
    }
}
