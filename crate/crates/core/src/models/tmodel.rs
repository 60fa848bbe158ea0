//! The coloured wide-tree model `⊕ₙ M(kⁿ)⌢T₂`, its pruned version and the
//! extension by a discrete copy `X` with `g` (predecessor) and `h` (identity).

use std::collections::HashMap;

use num_traits::{One, Zero};

use super::family::{is_wide_node, KFamily, Mult};
use super::{add_tree_sort, bfs_sorted, cap_check, ModelCtor, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::modulus::Modulus;
use crate::q::{int, one, Q};
use crate::structure::{FiniteStructure, FnTable, Metric, PredTable};
use crate::trees::{fmt_node, Node, Sym};

#[derive(Clone, Debug)]
pub struct MParams {
    pub family: KFamily,
    /// Total height of the truncation.
    pub depth: usize,
    /// Bound on first coordinates of bottom letters.
    pub branch: usize,
    /// Bound on second coordinates of bottom letters.
    pub width: usize,
    /// Copies of the top tree glued at every bottom node.
    pub copies: usize,
    pub topdepth: usize,
    pub topbranch: usize,
    pub topwidth: usize,
    /// Summands per member, capped by the member's own multiplicity.
    pub reps: usize,
    /// Colours `j < colours`; `None` picks the largest family value plus `width`.
    pub colours: Option<usize>,
    /// Prune bottom nodes without an extension to level `l`.
    pub prune: Option<usize>,
    pub cap: usize,
}

impl MParams {
    pub fn new(family: KFamily, depth: usize, branch: usize) -> MParams {
        MParams {
            family,
            depth,
            branch,
            width: 1,
            copies: 1,
            topdepth: 2,
            topbranch: 2,
            topwidth: 1,
            reps: 1,
            colours: None,
            prune: None,
            cap: DEFAULT_CAP,
        }
    }

    pub fn from_ctor(c: &ModelCtor) -> Result<MParams> {
        c.check_keys(&[
            "k", "depth", "branch", "width", "copies", "topdepth", "topbranch", "topwidth", "reps", "colours", "l",
        ])?;
        let family = KFamily::from_spec(c.get("k").unwrap_or("standard"))?;
        let prune = match (c.selector.as_str(), c.get("l")) {
            ("M_l", None) => return Err(Error::Invalid("M_l needs l=<level>".into())),
            (_, Some(_)) => Some(c.usize("l", 0)?),
            _ => None,
        };
        Ok(MParams {
            family,
            depth: c.usize("depth", 4)?,
            branch: c.usize("branch", 4)?,
            width: c.usize("width", 1)?,
            copies: c.usize("copies", 1)?,
            topdepth: c.usize("topdepth", 2)?,
            topbranch: c.usize("topbranch", 2)?,
            topwidth: c.usize("topwidth", 1)?,
            reps: c.usize("reps", 1)?,
            colours: match c.get("colours") {
                Some(_) => Some(c.usize("colours", 0)?),
                None => None,
            },
            prune,
            cap: c.cap,
        })
    }

    pub fn colour_count(&self) -> usize {
        self.colours.unwrap_or(self.family.max_value() as usize + self.width)
    }
}

/// Where a point of `M` comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MNode {
    pub path: Node,
    /// In the bottom part (the root included).
    pub bottom: bool,
    /// Untagged wide-tree node of a bottom point.
    pub wide: Node,
    /// Summand and family member of a non-root bottom point.
    pub summand: Option<(usize, usize)>,
}

impl MNode {
    pub fn height(&self) -> usize {
        self.path.len()
    }

    /// Bottom node with no bottom successor anywhere in `T₂` (last first coordinate 0).
    pub fn terminal(&self) -> bool {
        self.bottom && matches!(self.wide.last(), Some(Sym::P(0, _)))
    }
}

pub struct MModel {
    pub structure: FiniteStructure,
    /// Indexed like the points of sort `D`.
    pub nodes: Vec<MNode>,
    pub colours: usize,
}

/// Nodes `(s₀,s₁)` of length `1..=depth` with `s₀` strictly decreasing below `branch` and `s₁ < width`.
fn wide_nodes(depth: usize, branch: usize, width: usize) -> Vec<Node> {
    let mut out = Vec::new();
    let mut frontier: Vec<Node> = vec![Vec::new()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for s in &frontier {
            let top = match s.last() {
                Some(Sym::P(a, _)) => *a as usize,
                _ => branch,
            };
            for a in 0..top {
                for c in 0..width {
                    let mut t = s.clone();
                    t.push(Sym::P(a as u32, c as u32));
                    next.push(t);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub(crate) fn parents_of(nodes: &[Node]) -> Vec<Option<usize>> {
    let index: HashMap<&Node, usize> = nodes.iter().enumerate().map(|(i, s)| (s, i)).collect();
    nodes.iter().map(|s| if s.is_empty() { None } else { Some(index[&s[..s.len() - 1].to_vec()]) }).collect()
}

fn kept(s: &[Sym], l: usize) -> bool {
    match s.last() {
        Some(Sym::P(a, _)) => (*a as i64) >= l as i64 - s.len() as i64,
        _ => true,
    }
}

fn untag(first: &Sym) -> Sym {
    match first {
        Sym::Sum(_, x) => (**x).clone(),
        x => x.clone(),
    }
}

pub fn m_model(p: &MParams) -> Result<MModel> {
    if p.family.members.is_empty() {
        return Err(Error::Invalid("empty family".into()));
    }
    let wide = wide_nodes(p.depth, p.branch, p.width);
    let mut summands = Vec::new();
    for (i, k) in p.family.members.iter().enumerate() {
        let n = match k.mult {
            Mult::Omega => p.reps,
            Mult::Fin(n) => n.min(p.reps),
        };
        summands.extend(std::iter::repeat(i).take(n));
    }
    let top = wide_nodes(p.topdepth.min(p.depth), p.topbranch, p.topwidth);
    let bottom_per = wide.iter().filter(|s| p.prune.map_or(true, |l| kept(s, l))).count();
    let bottom_total = 1 + summands.len() * bottom_per;
    cap_check("wide-tree model", bottom_total.saturating_mul(1 + p.copies * top.len()), p.cap)?;
    for k in &p.family.members {
        for s in k.values.keys() {
            if !is_wide_node(s) {
                return Err(Error::Invalid(format!("family value at {} is off the wide tree", fmt_node(s))));
            }
        }
    }

    let mut info: HashMap<Node, MNode> = HashMap::new();
    info.insert(Vec::new(), MNode { path: Vec::new(), bottom: true, wide: Vec::new(), summand: None });
    for (n, &member) in summands.iter().enumerate() {
        for s in &wide {
            if p.prune.is_some_and(|l| !kept(s, l)) {
                continue;
            }
            let mut path = s.clone();
            path[0] = Sym::Sum(n as u32, Box::new(s[0].clone()));
            info.insert(path.clone(), MNode { path, bottom: true, wide: s.clone(), summand: Some((n, member)) });
        }
    }
    let bottoms: Vec<Node> = info.keys().cloned().collect();
    for b in bottoms {
        for c in 0..p.copies {
            for u in &top {
                if b.len() + u.len() > p.depth {
                    continue;
                }
                let mut path = b.clone();
                path.push(Sym::Copy(0, c as u32, Box::new(u[0].clone())));
                path.extend(u[1..].iter().cloned());
                info.insert(path.clone(), MNode { path, bottom: false, wide: Vec::new(), summand: None });
            }
        }
    }
    let order = bfs_sorted(info.keys().cloned());
    let nodes: Vec<MNode> = order.iter().map(|s| info.remove(s).unwrap()).collect();

    let mut m = FiniteStructure::new(if p.prune.is_some() { "M_l" } else { "M" });
    add_tree_sort(&mut m, "D", &order, p.depth)?;
    let colours = p.colour_count();
    // colour (i, j) of each point, if any
    let colour: Vec<Option<(usize, usize)>> = nodes
        .iter()
        .map(|x| {
            if !x.bottom {
                return None;
            }
            if x.wide.is_empty() {
                return Some((0, 0));
            }
            let (_, member) = x.summand.unwrap();
            let parent = &x.wide[..x.wide.len() - 1];
            let t1 = match untag(x.wide.last().unwrap()) {
                Sym::P(_, c) => c,
                _ => unreachable!(),
            };
            Some((x.wide.len(), (p.family.members[member].k(parent) + t1) as usize))
        })
        .collect();
    for i in 0..=p.depth {
        for j in 0..colours {
            let table = colour.iter().map(|c| if *c == Some((i, j)) { Q::zero() } else { Q::one() }).collect();
            m.add_predicate(
                &format!("P_{i}_{j}"),
                &["D"],
                PredTable::Dense(table),
                Some(Modulus::lipschitz(int(i as i64 + 1))),
            )?;
        }
    }
    m.meta.depth = Some(p.depth);
    m.meta.branch = Some(p.branch);
    m.meta.notes.push(format!(
        "{} summands over {} family members; top copies {}x({},{},{}); colours j < {colours}",
        summands.len(),
        p.family.members.len(),
        p.copies,
        p.topdepth,
        p.topbranch,
        p.topwidth
    ));
    if let Some(l) = p.prune {
        m.meta.notes.push(format!("bottom nodes without an extension to level {l} pruned"));
    }
    Ok(MModel { structure: m, nodes, colours })
}

/// `M` plus a discretely metrised copy `X` of its universe, `g: X → X` the
/// predecessor map (root fixed) and `h: X → D` the identity.
pub fn m4_model(p: &MParams) -> Result<MModel> {
    let mut mm = m_model(p)?;
    let n = mm.nodes.len();
    let d = mm.structure.sort_index("D")?;
    let paths: Vec<Node> = mm.nodes.iter().map(|x| x.path.clone()).collect();
    let names = paths.iter().map(|s| format!("x{}", fmt_node(s))).collect();
    mm.structure.add_sort("X", names, Metric::Discrete);
    let parent: Vec<usize> = parents_of(&paths).into_iter().enumerate().map(|(i, p)| p.unwrap_or(i)).collect();
    let lip = Some(Modulus::lipschitz(one()));
    mm.structure.add_function("g", &["X"], "X", FnTable::Dense(parent), lip.clone())?;
    mm.structure.add_function("h", &["X"], "D", FnTable::Dense((0..n).collect()), lip)?;
    mm.structure.meta.kind = "M4".into();
    let _ = d;
    Ok(mm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::KFunction;
    use crate::structure::check_structure;

    fn colour_of(mm: &MModel, x: usize) -> Vec<String> {
        let m = &mm.structure;
        m.predicates.iter().filter(|p| m.pred_value(m.predicate_index(&p.name).unwrap(), &[x]).is_zero()).map(|p| p.name.clone()).collect()
    }

    #[test]
    fn colour_rule_example() {
        // k at the root is 0, so a child (5, 2) gets colour (1, 0 + 2)
        let fam = KFamily { members: vec![KFunction::constant(3).set(Vec::new(), 0)], variants_all: false };
        let mut p = MParams::new(fam, 2, 6);
        p.width = 3;
        let mm = m_model(&p).unwrap();
        let x = mm.nodes.iter().position(|n| n.wide == vec![Sym::P(5, 2)]).unwrap();
        assert_eq!(colour_of(&mm, x), vec!["P_1_2".to_string()]);
        assert_eq!(colour_of(&mm, 0), vec!["P_0_0".to_string()]);
    }

    #[test]
    fn every_bottom_node_has_one_colour_and_top_none() {
        let mm = m_model(&MParams::new(KFamily::standard(), 3, 3)).unwrap();
        for (x, n) in mm.nodes.iter().enumerate() {
            assert_eq!(colour_of(&mm, x).len(), usize::from(n.bottom), "{}", fmt_node(&n.path));
        }
        assert!(check_structure(&mm.structure).is_empty());
    }

    #[test]
    fn pruning_keeps_level_l_reachable() {
        let mut p = MParams::new(KFamily::standard(), 3, 4);
        p.prune = Some(3);
        let mm = m_model(&p).unwrap();
        for n in mm.nodes.iter().filter(|n| n.bottom && !n.wide.is_empty()) {
            let Sym::P(a, _) = n.wide.last().unwrap() else { panic!() };
            assert!(*a as usize + n.height() >= 3);
        }
        assert!(!mm.nodes.iter().any(|n| n.terminal() && n.height() < 3));
    }

    #[test]
    fn m4_maps_are_valid() {
        let mm = m4_model(&MParams::new(KFamily::standard(), 3, 3)).unwrap();
        assert!(check_structure(&mm.structure).is_empty());
        let x = mm.structure.sort_index("X").unwrap();
        assert_eq!(mm.structure.sorts[x].len(), mm.nodes.len());
    }
}
