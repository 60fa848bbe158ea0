//! Windows: the first `m` levels of a coloured wide-tree model, in the reduct to
//! colours `P_{i,j}` and projections `f_i` with `i, j < λ`.
//!
//! The true window is countably infinite. Nodes are summarised by canonical
//! isomorphism types (label plus a multiset of child types, counts in ℕ ∪ {ω});
//! two windows are isomorphic iff their root types agree. For a search with
//! `find_iso` each type is then materialised with `ω` replaced by a count larger
//! than every finite count on either side, which preserves (non-)isomorphism.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use super::family::{KFunction, Mult};
use super::{add_tree_sort, cap_check, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::q::Q;
use crate::structure::{FiniteStructure, PredTable};
use crate::trees::{Node, Sym};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Plain,
    Colour(u32, u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct TypeNode {
    label: Label,
    children: Vec<(usize, Mult)>,
}

#[derive(Clone, Debug)]
pub struct Window {
    types: Vec<TypeNode>,
    intern: HashMap<(Label, Vec<(usize, Mult)>), usize>,
    root: usize,
    pub m: usize,
    pub lambda: usize,
}

type Bag = BTreeMap<usize, Mult>;

fn bag_add(b: &mut Bag, t: usize, k: Mult) {
    let e = b.entry(t).or_insert(Mult::Fin(0));
    *e = e.add(k);
}

struct Builder<'a> {
    w: &'a mut Window,
    prune: Option<usize>,
    top_memo: HashMap<(usize, usize), usize>,
    generic_memo: HashMap<(Label, u32, usize, u32), usize>,
}

impl Builder<'_> {
    fn intern(&mut self, label: Label, bag: Bag) -> usize {
        let key: Vec<(usize, Mult)> = bag.into_iter().filter(|(_, k)| *k != Mult::Fin(0)).collect();
        if let Some(&i) = self.w.intern.get(&(label, key.clone())) {
            return i;
        }
        let i = self.w.types.len();
        self.w.types.push(TypeNode { label, children: key.clone() });
        self.w.intern.insert((label, key), i);
        i
    }

    /// Uncoloured top node with `r` levels left and children bounded by `p ≤ r`.
    fn top(&mut self, p: usize, r: usize) -> usize {
        if let Some(&t) = self.top_memo.get(&(p, r)) {
            return t;
        }
        let mut bag = Bag::new();
        if r > 0 {
            for q in 0..p {
                let c = self.top(q, r - 1);
                bag_add(&mut bag, c, Mult::Omega);
            }
        }
        let t = self.intern(Label::Plain, bag);
        self.top_memo.insert((p, r), t);
        t
    }

    fn colour(&self, i: usize, j: u32) -> Label {
        if i < self.w.lambda && (j as usize) < self.w.lambda {
            Label::Colour(i as u32, j)
        } else {
            Label::Plain
        }
    }

    fn has_support_below(k: &KFunction, s: &[Sym]) -> bool {
        k.values.keys().any(|t| t.starts_with(s))
    }

    /// Child contributions of bottom node `s` coming from its bottom successors `(a', ·)`.
    fn bottom_children_at(&mut self, k: &KFunction, s: &Node, a: u32, bag: &mut Bag) {
        let h = s.len();
        let ks = k.k(s);
        let visible = if h + 1 < self.w.lambda { (self.w.lambda as u32).saturating_sub(ks) } else { 0 };
        let mut explicit: Vec<u32> = (0..visible).collect();
        for t in k.values.keys() {
            if t.len() > h && t.starts_with(s) {
                if let Sym::P(a2, c2) = t[h] {
                    if a2 == a {
                        explicit.push(c2);
                    }
                }
            }
        }
        explicit.sort();
        explicit.dedup();
        for &c in &explicit {
            let mut child = s.clone();
            child.push(Sym::P(a, c));
            let lab = self.colour(h + 1, ks + c);
            let t = self.bottom(k, &child, lab);
            bag_add(bag, t, Mult::Fin(1));
        }
        let generic_c = (visible..).find(|c| !explicit.contains(c)).unwrap();
        let mut child = s.clone();
        child.push(Sym::P(a, generic_c));
        let lab = self.colour(h + 1, ks + generic_c);
        let t = self.bottom(k, &child, lab);
        bag_add(bag, t, Mult::Omega);
    }

    fn kept(&self, a: u32, height: usize) -> bool {
        match self.prune {
            Some(l) => (a as i64) >= l as i64 - height as i64,
            None => true,
        }
    }

    fn bottom(&mut self, k: &KFunction, s: &Node, label: Label) -> usize {
        let h = s.len();
        let last = match s.last() {
            Some(Sym::P(a, _)) => Some(*a),
            _ => None,
        };
        let generic = last.is_some() && !Self::has_support_below(k, s);
        if generic {
            if let Some(&t) = self.generic_memo.get(&(label, last.unwrap(), h, k.base)) {
                return t;
            }
        }
        let r = self.w.m - 1 - h;
        let mut bag = Bag::new();
        if r > 0 {
            for q in 0..r {
                let t = self.top(q, r - 1);
                bag_add(&mut bag, t, Mult::Omega);
            }
            if let Some(a) = last {
                for a2 in 0..a {
                    if self.kept(a2, h + 1) {
                        self.bottom_children_at(k, s, a2, &mut bag);
                    }
                }
            }
        }
        let t = self.intern(label, bag);
        if generic {
            self.generic_memo.insert((label, last.unwrap(), h, k.base), t);
        }
        t
    }

    /// Root children of one member, the unbounded first letters collapsed once they stabilise.
    fn root_children(&mut self, k: &KFunction, bag: &mut Bag) -> Result<()> {
        let root: Node = Vec::new();
        if self.w.m < 2 {
            return Ok(());
        }
        for q in 0..self.w.m - 1 {
            let t = self.top(q, self.w.m - 2);
            bag_add(bag, t, Mult::Omega);
        }
        let reach = k.values.keys().filter_map(|t| match t.first() {
            Some(Sym::P(a, _)) => Some(*a),
            _ => None,
        });
        let tail = reach.max().map_or(0, |a| a + 1) + (self.w.m + self.prune.unwrap_or(0) + 2) as u32;
        for a in 0..tail {
            if self.kept(a, 1) {
                self.bottom_children_at(k, &root, a, bag);
            }
        }
        let mut samples = Vec::new();
        for a in tail..tail + 3 {
            let mut b = Bag::new();
            self.bottom_children_at(k, &root, a, &mut b);
            samples.push(b);
        }
        if samples.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Unsupported(
                "root successors do not settle into finitely many types; raise the base value to at least λ".into(),
            ));
        }
        for (t, _) in samples.pop().unwrap() {
            bag_add(bag, t, Mult::Omega);
        }
        Ok(())
    }
}

impl Window {
    /// Window of `⊕ M(kⁿ[, l])⌢T₂` with the summands sharing one root; each member is
    /// repeated as often as its count says.
    pub fn build(members: &[(&KFunction, Mult)], prune: Option<usize>, m: usize, lambda: usize) -> Result<Window> {
        if m == 0 {
            return Err(Error::Invalid("a window needs at least one level".into()));
        }
        let mut w = Window { types: Vec::new(), intern: HashMap::new(), root: 0, m, lambda };
        let mut b = Builder { w: &mut w, prune, top_memo: HashMap::new(), generic_memo: HashMap::new() };
        let mut bag = Bag::new();
        for (k, mult) in members {
            let mut one = Bag::new();
            b.root_children(k, &mut one)?;
            for (t, c) in one {
                bag_add(&mut bag, t, c.scale(*mult));
            }
        }
        let label = if lambda > 0 { Label::Colour(0, 0) } else { Label::Plain };
        let root = b.intern(label, bag);
        w.root = root;
        Ok(w)
    }

    /// Window of a whole family, each member at its own multiplicity.
    pub fn of_family(fam: &super::KFamily, prune: Option<usize>, m: usize, lambda: usize) -> Result<Window> {
        let ms: Vec<(&KFunction, Mult)> = fam.members.iter().map(|k| (k, k.mult)).collect();
        Window::build(&ms, prune, m, lambda)
    }

    pub fn type_count(&self) -> usize {
        self.types.len()
    }

    fn canon(&self, t: usize, memo: &mut HashMap<usize, String>) -> String {
        if let Some(s) = memo.get(&t) {
            return s.clone();
        }
        let node = &self.types[t];
        let mut parts: Vec<String> =
            node.children.iter().map(|(c, k)| format!("{}x{}", self.canon(*c, memo), k)).collect();
        parts.sort();
        let s = format!("{:?}[{}]", node.label, parts.join(","));
        memo.insert(t, s.clone());
        s
    }

    /// Equal root types, i.e. isomorphic windows.
    pub fn same_type(&self, other: &Window) -> bool {
        self.m == other.m
            && self.lambda == other.lambda
            && self.canon(self.root, &mut HashMap::new()) == other.canon(other.root, &mut HashMap::new())
    }

    fn max_finite(&self) -> usize {
        self.types.iter().flat_map(|t| t.children.iter().filter_map(|(_, k)| k.finite())).max().unwrap_or(0)
    }
}

/// Materialises a window with `ω` replaced by `omega` copies.
pub fn window_structure(w: &Window, omega: usize) -> Result<FiniteStructure> {
    let mut size: HashMap<usize, usize> = HashMap::new();
    fn count(w: &Window, t: usize, omega: usize, memo: &mut HashMap<usize, usize>) -> usize {
        if let Some(&n) = memo.get(&t) {
            return n;
        }
        let n = 1 + w.types[t]
            .children
            .iter()
            .map(|(c, k)| k.finite().unwrap_or(omega).saturating_mul(count(w, *c, omega, memo)))
            .fold(0usize, |a, b| a.saturating_add(b));
        memo.insert(t, n);
        n
    }
    cap_check("materialised window", count(w, w.root, omega, &mut size), DEFAULT_CAP)?;
    let mut nodes: Vec<Node> = Vec::new();
    let mut labels: Vec<Label> = Vec::new();
    let mut stack = vec![(Vec::new(), w.root)];
    while let Some((path, t)) = stack.pop() {
        let mut next = 0u32;
        for (c, k) in &w.types[t].children {
            for _ in 0..k.finite().unwrap_or(omega) {
                let mut p: Node = path.clone();
                p.push(Sym::N(next));
                next += 1;
                stack.push((p, *c));
            }
        }
        nodes.push(path);
        labels.push(w.types[t].label);
    }
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| nodes[a].len().cmp(&nodes[b].len()).then(nodes[a].cmp(&nodes[b])));
    let nodes: Vec<Node> = order.iter().map(|&i| nodes[i].clone()).collect();
    let labels: Vec<Label> = order.iter().map(|&i| labels[i]).collect();
    let mut m = FiniteStructure::new("window");
    if w.lambda > 0 {
        add_tree_sort(&mut m, "D", &nodes, w.lambda - 1)?;
    } else {
        let parent = super::tmodel::parents_of(&nodes);
        m.add_sort("D", nodes.iter().map(|s| crate::trees::fmt_node(s)).collect(), crate::structure::Metric::tree(parent)?);
    }
    for i in 0..w.lambda {
        for j in 0..w.lambda {
            let table = labels
                .iter()
                .map(|l| if *l == Label::Colour(i as u32, j as u32) { Q::zero() } else { Q::one() })
                .collect();
            m.add_predicate(&format!("P_{i}_{j}"), &["D"], PredTable::Dense(table), None)?;
        }
    }
    m.meta.depth = Some(w.m - 1);
    m.meta.notes.push(format!("window of {} levels, colours and projections below {}, omega as {omega}", w.m, w.lambda));
    Ok(m)
}

/// Both windows materialised with a common stand-in for `ω`.
pub fn window_pair(a: &Window, b: &Window) -> Result<(FiniteStructure, FiniteStructure)> {
    let omega = a.max_finite().max(b.max_finite()).max(1) + 1;
    Ok((window_structure(a, omega)?, window_structure(b, omega)?))
}

/// Moves one coloured point to a different visible colour of its level, or strips its
/// colour when the reduct shows no other; returns a description. Non-root points are
/// preferred.
pub fn perturb_colour(m: &mut FiniteStructure) -> Option<String> {
    let preds: Vec<usize> = (0..m.predicates.len()).filter(|&i| m.predicates[i].name.starts_with("P_")).collect();
    let coloured = |m: &FiniteStructure, pi: usize, root: bool| match &m.predicates[pi].table {
        PredTable::Dense(t) => t.iter().enumerate().position(|(x, v)| v.is_zero() && (root || x != 0)),
        PredTable::Rule(_) => None,
    };
    let pick = [false, true]
        .into_iter()
        .find_map(|root| preds.iter().find_map(|&pi| coloured(m, pi, root).map(|x| (pi, x))));
    let (pi, x) = pick?;
    let name = m.predicates[pi].name.clone();
    let (i, _) = name[2..].split_once('_')?;
    let other = preds
        .iter()
        .copied()
        .find(|&o| o != pi && m.predicates[o].name[2..].split_once('_').map(|p| p.0) == Some(i));
    if let PredTable::Dense(t) = &mut m.predicates[pi].table {
        t[x] = Q::one();
    }
    let point = m.point_name(0, x).to_string();
    match other {
        Some(o) => {
            if let PredTable::Dense(t) = &mut m.predicates[o].table {
                t[x] = Q::zero();
            }
            Some(format!("{point} recoloured from {name} to {}", m.predicates[o].name))
        }
        None => Some(format!("{point} loses colour {name}")),
    }
}
