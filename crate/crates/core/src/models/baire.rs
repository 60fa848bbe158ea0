//! Truncations of Baire space with `h`, the tree-space extension with `ee`,
//! its pair-tree extension, and the projection model.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use num_traits::Zero;

use super::{add_tree_sort, bfs_sorted, cap_check, split_top, ModelCtor, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::modulus::Modulus;
use crate::q::{int, one, Q};
use crate::structure::{FiniteStructure, FnTable, Metric, PredTable};
use crate::trees::{
    baire_dist, ell, fmt_node, kappa, pair_tree_dist, parse_node, parse_tree, tree_space_dist, FiniteTree, Node,
    PairTree, Sym, TreeTerm,
};

fn box_size(depth: usize, branch: usize) -> usize {
    let mut total: usize = 0;
    let mut level: usize = 1;
    for _ in 0..=depth {
        total = total.saturating_add(level);
        level = level.saturating_mul(branch);
    }
    total
}

fn baire_box(depth: usize, branch: usize, cap: usize) -> Result<Vec<Node>> {
    cap_check("Baire box", box_size(depth, branch), cap)?;
    Ok(bfs_sorted(TreeTerm::Full.truncate(depth, branch as u32).nodes().iter().cloned()))
}

#[derive(Clone, Debug)]
pub struct NParams {
    pub depth: usize,
    pub branch: usize,
    /// Add `h` and widen level 1 so that `h(⟨n⟩) = s_n` covers the whole box.
    pub h: bool,
    pub cap: usize,
}

impl NParams {
    pub fn new(depth: usize, branch: usize, h: bool) -> NParams {
        NParams { depth, branch, h, cap: DEFAULT_CAP }
    }

    pub fn from_ctor(c: &ModelCtor) -> Result<NParams> {
        c.check_keys(&["depth", "branch", "h"])?;
        Ok(NParams { depth: c.usize("depth", 3)?, branch: c.usize("branch", 2)?, h: c.flag("h"), cap: c.cap })
    }
}

/// Index of `h(x)`: `s_n` at `⟨n⟩` for `n` below the enumeration length, `f_1(x)` elsewhere.
fn h_table(order: &[Node], index: &HashMap<Node, usize>, enumeration: &[Node]) -> Vec<usize> {
    order
        .iter()
        .map(|x| match x.as_slice() {
            [Sym::N(n)] if (*n as usize) < enumeration.len() => index[&enumeration[*n as usize]],
            [] => index[x],
            _ => index[&x[..1]],
        })
        .collect()
}

pub fn n_model(p: &NParams) -> Result<FiniteStructure> {
    let bx = baire_box(p.depth, p.branch, p.cap)?;
    let mut nodes = bx.clone();
    if p.h {
        cap_check("Baire box with witness layer", 2 * bx.len(), p.cap)?;
        nodes.extend((p.branch..bx.len()).map(|n| vec![Sym::N(n as u32)]));
    }
    let order = bfs_sorted(nodes);
    let mut m = FiniteStructure::new("N");
    let index = add_tree_sort(&mut m, "D", &order, p.depth)?;
    if p.h {
        let table = h_table(&order, &index, &bx);
        m.add_function("h", &["D"], "D", FnTable::Dense(table), Some(Modulus::lipschitz(int(3))))?;
        m.meta.notes.push(format!("h(<n>) = s_n over the {} box nodes in breadth-first order", bx.len()));
    }
    m.meta.depth = Some(p.depth);
    m.meta.branch = Some(p.branch);
    Ok(m)
}

/// Number of nonempty subtrees of the `(depth, branch)` box.
fn subtree_count(depth: usize, branch: usize) -> usize {
    let mut f: usize = 1;
    for _ in 0..depth {
        f = (1usize.saturating_add(f)).saturating_pow(branch as u32);
    }
    f
}

fn subtrees_below(s: &Node, left: usize, branch: u32) -> Vec<Vec<Node>> {
    let mut acc: Vec<Vec<Node>> = vec![vec![s.clone()]];
    if left == 0 {
        return acc;
    }
    for i in 0..branch {
        let mut c = s.clone();
        c.push(Sym::N(i));
        let opts = subtrees_below(&c, left - 1, branch);
        let mut next = Vec::with_capacity(acc.len() * (opts.len() + 1));
        for a in &acc {
            next.push(a.clone());
            for o in &opts {
                let mut v = a.clone();
                v.extend(o.iter().cloned());
                next.push(v);
            }
        }
        acc = next;
    }
    acc
}

fn tree_kappa(t: &FiniteTree) -> u32 {
    t.nodes().iter().map(|s| kappa(s)).max().unwrap_or(0)
}

/// Nonempty subtrees of the `(depth, branch)` box, ordered by the least `k` with the tree inside
/// `k^{≤k}`, then by size, then lexicographically. Trees fitting in `k^{≤k}` come first for every `k`.
pub fn canonical_trees(depth: usize, branch: usize, cap: usize) -> Result<Vec<FiniteTree>> {
    cap_check("canonical tree list", subtree_count(depth, branch), cap)?;
    let mut v: Vec<FiniteTree> = subtrees_below(&Vec::new(), depth, branch as u32)
        .into_iter()
        .map(|ns| FiniteTree::new(ns).expect("generated subtrees are prefix-closed"))
        .collect();
    v.sort_by(|a, b| {
        tree_kappa(a)
            .cmp(&tree_kappa(b))
            .then(a.len().cmp(&b.len()))
            .then_with(|| a.nodes().iter().cmp(b.nodes().iter()))
    });
    Ok(v)
}

/// Rewrites tagged letters as sibling positions so the tree lives over plain naturals.
pub fn naturalize(t: &FiniteTree) -> FiniteTree {
    if t.nodes().iter().all(|s| s.iter().all(|x| matches!(x, Sym::N(_)))) {
        return t.clone();
    }
    let mut code: HashMap<Node, Node> = HashMap::new();
    code.insert(Vec::new(), Vec::new());
    for s in bfs_sorted(t.nodes().iter().cloned()) {
        if s.is_empty() {
            continue;
        }
        let parent = &s[..s.len() - 1];
        let pos = t.children(parent).position(|c| *c == s).unwrap() as u32;
        let mut c = code[parent].clone();
        c.push(Sym::N(pos));
        code.insert(s, c);
    }
    FiniteTree::new(code.into_values()).expect("relabelling keeps prefix closure")
}

pub(crate) fn parse_tree_list(src: Option<&str>) -> Result<Vec<TreeTerm>> {
    match src {
        None => Ok(Vec::new()),
        Some(s) => split_top(s, ';').iter().filter(|x| !x.is_empty()).map(|x| parse_tree(x)).collect(),
    }
}

#[derive(Clone, Debug)]
pub struct N2Params {
    pub depth: usize,
    pub branch: usize,
    pub treedepth: usize,
    pub treebranch: usize,
    /// Extra trees, truncated to the node box and added to the tree sort after the canonical list.
    pub trees: Vec<TreeTerm>,
    pub cap: usize,
}

impl N2Params {
    pub fn new(depth: usize, branch: usize) -> N2Params {
        N2Params { depth, branch, treedepth: 2, treebranch: 2, trees: Vec::new(), cap: DEFAULT_CAP }
    }

    pub fn from_ctor(c: &ModelCtor) -> Result<N2Params> {
        c.check_keys(&["depth", "branch", "treedepth", "treebranch", "trees"])?;
        Ok(N2Params {
            depth: c.usize("depth", 3)?,
            branch: c.usize("branch", 2)?,
            treedepth: c.usize("treedepth", 2)?,
            treebranch: c.usize("treebranch", 2)?,
            trees: parse_tree_list(c.get("trees"))?,
            cap: c.cap,
        })
    }
}

/// The points of the tree sort: canonical trees, then the extra trees, duplicates dropped.
pub fn n2_trees(p: &N2Params) -> Result<Vec<FiniteTree>> {
    let mut v = canonical_trees(p.treedepth, p.treebranch, p.cap)?;
    for t in &p.trees {
        let ft = naturalize(&t.truncate(p.depth, p.branch as u32));
        if !v.contains(&ft) {
            v.push(ft);
        }
    }
    Ok(v)
}

fn ee_value(t: &[Sym], inside: bool) -> Q {
    if inside {
        Q::zero()
    } else {
        Q::new(1, ell(t).max(1) as i64)
    }
}

fn add_tree_space_sort(m: &mut FiniteStructure, trees: &[FiniteTree]) {
    let n = trees.len();
    let mut d = vec![Q::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = tree_space_dist(&trees[i], &trees[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    m.add_sort("D2", (0..n).map(|i| format!("S{i}")).collect(), Metric::Dense(d));
}

fn add_ee(m: &mut FiniteStructure, d1: &[Node], trees: &[FiniteTree]) -> Result<()> {
    let mut table = Vec::with_capacity(d1.len() * trees.len());
    for t in d1 {
        for s in trees {
            table.push(ee_value(t, s.contains(t)));
        }
    }
    m.add_predicate("ee", &["D1", "D2"], PredTable::Dense(table), Some(Modulus::lipschitz(int(3))))
}

pub fn n2_model(p: &N2Params) -> Result<FiniteStructure> {
    let bx = baire_box(p.depth, p.branch, p.cap)?;
    let trees = n2_trees(p)?;
    cap_check("node-tree table", bx.len() * trees.len(), p.cap * 8)?;
    let mut m = FiniteStructure::new("N2");
    add_tree_sort(&mut m, "D1", &bx, p.depth)?;
    add_tree_space_sort(&mut m, &trees);
    add_ee(&mut m, &bx, &trees)?;
    m.meta.depth = Some(p.depth);
    m.meta.branch = Some(p.branch);
    m.meta.notes.push(format!(
        "D2: {} canonical subtrees of the ({},{}) box, then {} extra trees",
        canonical_trees(p.treedepth, p.treebranch, p.cap)?.len(),
        p.treedepth,
        p.treebranch,
        p.trees.len()
    ));
    Ok(m)
}

fn pair_kappa(s: &[Sym], t: &[Sym]) -> u32 {
    kappa(s).max(kappa(t))
}

/// Nonempty subtrees of the pair box (pairs of equal length ≤ `depth`, entries `< branch`),
/// ordered like [`canonical_trees`].
pub fn canonical_pair_trees(depth: usize, branch: usize, cap: usize) -> Result<Vec<PairTree>> {
    let mut f: usize = 1;
    for _ in 0..depth {
        f = (1usize.saturating_add(f)).saturating_pow((branch * branch) as u32);
    }
    cap_check("canonical pair-tree list", f, cap)?;
    fn below(s: &Node, t: &Node, left: usize, b: u32) -> Vec<Vec<(Node, Node)>> {
        let mut acc = vec![vec![(s.clone(), t.clone())]];
        if left == 0 {
            return acc;
        }
        for i in 0..b {
            for j in 0..b {
                let (mut s2, mut t2) = (s.clone(), t.clone());
                s2.push(Sym::N(i));
                t2.push(Sym::N(j));
                let opts = below(&s2, &t2, left - 1, b);
                let mut next = Vec::new();
                for a in &acc {
                    next.push(a.clone());
                    for o in &opts {
                        let mut v = a.clone();
                        v.extend(o.iter().cloned());
                        next.push(v);
                    }
                }
                acc = next;
            }
        }
        acc
    }
    let mut sets: Vec<BTreeSet<(Node, Node)>> =
        below(&Vec::new(), &Vec::new(), depth, branch as u32).into_iter().map(|v| v.into_iter().collect()).collect();
    let k = |s: &BTreeSet<(Node, Node)>| s.iter().map(|(a, b)| pair_kappa(a, b)).max().unwrap_or(0);
    sets.sort_by(|a, b| k(a).cmp(&k(b)).then(a.len().cmp(&b.len())).then_with(|| a.iter().cmp(b.iter())));
    Ok(sets.into_iter().map(PairTree::Finite).collect())
}

/// `diag`, `full`, or `{(<s>,<t>);...}`.
pub fn parse_pair_tree(src: &str) -> Result<PairTree> {
    let s = src.trim();
    match s {
        "diag" | "diagonal" => return Ok(PairTree::Diagonal),
        "full" => return Ok(PairTree::Full),
        _ => {}
    }
    let inner = s
        .strip_prefix('{')
        .and_then(|x| x.strip_suffix('}'))
        .ok_or_else(|| Error::Parse(format!("pair tree '{s}' is not diag, full or {{...}}")))?;
    let mut pairs = Vec::new();
    for part in split_top(inner, ';') {
        let p = part
            .strip_prefix('(')
            .and_then(|x| x.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("pair '{part}' is not (<s>,<t>)")))?;
        let sides = split_top(p, ',');
        if sides.len() != 2 {
            return Err(Error::Parse(format!("pair '{part}' needs two nodes")));
        }
        pairs.push((parse_node(&sides[0])?, parse_node(&sides[1])?));
    }
    PairTree::finite(pairs)
}

#[derive(Clone, Debug)]
pub struct N3Params {
    pub depth: usize,
    pub branch: usize,
    pub treedepth: usize,
    pub treebranch: usize,
    pub pairdepth: usize,
    pub pairbranch: usize,
    /// Extra pair trees, truncated to the node box.
    pub pairs: Vec<PairTree>,
    /// Interpretation of the constant `c`; `None` leaves it out.
    pub c: Option<Node>,
    pub cap: usize,
}

impl N3Params {
    pub fn new(depth: usize, branch: usize) -> N3Params {
        N3Params {
            depth,
            branch,
            treedepth: 1,
            treebranch: 2,
            pairdepth: 1,
            pairbranch: 2,
            pairs: Vec::new(),
            c: None,
            cap: DEFAULT_CAP,
        }
    }

    pub fn from_ctor(c: &ModelCtor) -> Result<N3Params> {
        c.check_keys(&["depth", "branch", "treedepth", "treebranch", "pairdepth", "pairbranch", "R", "c"])?;
        let pairs = match c.get("R") {
            None => Vec::new(),
            Some(s) => split_top(s, '|').iter().map(|x| parse_pair_tree(x)).collect::<Result<_>>()?,
        };
        let cnode = match c.get("c") {
            None | Some("none") => None,
            Some(s) => Some(parse_node(s)?),
        };
        Ok(N3Params {
            depth: c.usize("depth", 2)?,
            branch: c.usize("branch", 2)?,
            treedepth: c.usize("treedepth", 1)?,
            treebranch: c.usize("treebranch", 2)?,
            pairdepth: c.usize("pairdepth", 1)?,
            pairbranch: c.usize("pairbranch", 2)?,
            pairs,
            c: cnode,
            cap: c.cap,
        })
    }
}

pub fn n3_pair_trees(p: &N3Params) -> Result<Vec<PairTree>> {
    let mut v = canonical_pair_trees(p.pairdepth, p.pairbranch, p.cap)?;
    for r in &p.pairs {
        let t = r.truncate(p.depth, p.branch as u32);
        if !v.contains(&t) {
            v.push(t);
        }
    }
    Ok(v)
}

pub fn n3_model(p: &N3Params) -> Result<FiniteStructure> {
    let bx = baire_box(p.depth, p.branch, p.cap)?;
    let trees = canonical_trees(p.treedepth, p.treebranch, p.cap)?;
    let pts = n3_pair_trees(p)?;
    cap_check("ternary table", bx.len() * bx.len() * pts.len(), p.cap * 8)?;
    let mut m = FiniteStructure::new("N3");
    let index = add_tree_sort(&mut m, "D1", &bx, p.depth)?;
    let h = h_table(&bx, &index, &bx);
    m.add_function("h", &["D1"], "D1", FnTable::Dense(h), Some(Modulus::lipschitz(int(3))))?;
    add_tree_space_sort(&mut m, &trees);
    add_ee(&mut m, &bx, &trees)?;
    let n3 = pts.len();
    let mut d = vec![Q::zero(); n3 * n3];
    for i in 0..n3 {
        for j in i + 1..n3 {
            let v = pair_tree_dist(&pts[i], &pts[j])?;
            d[i * n3 + j] = v;
            d[j * n3 + i] = v;
        }
    }
    m.add_sort("D3", (0..n3).map(|i| format!("R{i}")).collect(), Metric::Dense(d));
    let mut table = Vec::with_capacity(bx.len() * bx.len() * n3);
    for s in &bx {
        for t in &bx {
            for r in &pts {
                table.push(if r.contains(s, t) { Q::zero() } else { Q::new(1, ell(s).max(ell(t)).max(1) as i64) });
            }
        }
    }
    m.add_predicate("ee3", &["D1", "D1", "D3"], PredTable::Dense(table), Some(Modulus::lipschitz(int(3))))?;
    if let Some(c) = &p.c {
        let i = *index.get(c).ok_or_else(|| Error::Invalid(format!("c = {} is outside the node box", fmt_node(c))))?;
        m.add_constant("c", 0, i);
    }
    m.meta.depth = Some(p.depth);
    m.meta.branch = Some(p.branch);
    m.meta.notes.push(match &p.c {
        Some(c) => format!("c = {}", fmt_node(c)),
        None => "c left uninterpreted".to_string(),
    });
    Ok(m)
}

/// `Σ_i v_i/(v_i+1) · 1/((i+1)(i+2))`: a 1-Lipschitz real code of a node.
pub fn code_value(s: &[Sym]) -> Q {
    s.iter().enumerate().fold(Q::zero(), |acc, (i, x)| {
        let v = x.max_entry() as i64;
        acc + Q::new(v, v + 1) * Q::new(1, (i as i64 + 1) * (i as i64 + 2))
    })
}

#[derive(Clone, Debug)]
pub struct ProjParams {
    pub depth: usize,
    pub branch: usize,
    pub set: PairTree,
    pub cap: usize,
}

impl ProjParams {
    pub fn from_ctor(c: &ModelCtor) -> Result<ProjParams> {
        c.check_keys(&["depth", "branch", "R"])?;
        Ok(ProjParams {
            depth: c.usize("depth", 2)?,
            branch: c.usize("branch", 2)?,
            set: parse_pair_tree(c.get("R").unwrap_or("diag"))?,
            cap: c.cap,
        })
    }
}

pub fn projection_model(p: &ProjParams) -> Result<FiniteStructure> {
    let bs = box_size(p.depth, p.branch);
    if matches!(p.set, PairTree::Full) {
        cap_check("pair box", bs.saturating_mul(bs), p.cap)?;
    }
    let pairs: Vec<(Node, Node)> = match p.set.truncate(p.depth, p.branch as u32) {
        PairTree::Finite(s) => {
            let mut v: Vec<(Node, Node)> = s.into_iter().collect();
            v.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then(a.cmp(b)));
            v
        }
        _ => unreachable!("truncation is finite"),
    };
    cap_check("projection model", pairs.len(), p.cap)?;
    let mut m = FiniteStructure::new("Projection");
    let names = pairs.iter().map(|(s, t)| format!("({},{})", fmt_node(s), fmt_node(t))).collect();
    let pts = Arc::new(pairs.clone());
    let rule = move |a: usize, b: usize| {
        let (s, t) = &pts[a];
        let (u, v) = &pts[b];
        baire_dist(s, u).max(baire_dist(t, v))
    };
    m.add_sort("X", names, Metric::Rule(Arc::new(rule)));
    let codes = pairs.iter().map(|(s, _)| code_value(s)).collect();
    m.add_predicate("f", &["X"], PredTable::Dense(codes), Some(Modulus::lipschitz(one())))?;
    m.meta.depth = Some(p.depth);
    m.meta.branch = Some(p.branch);
    Ok(m)
}
