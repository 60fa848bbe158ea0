//! Distances on nodes, trees and pair trees; `ℓ`; sections `R_x` of pair trees.

use std::collections::BTreeSet;

use num_traits::Zero;

use super::{fmt_node, FiniteTree, Node, Sym};
use crate::error::{Error, Result};
use crate::q::{inv_succ, one, Q};

/// Baire distance `1/(Δ+1)`, `Δ` the longest common prefix length.
pub fn baire_dist(s: &[Sym], t: &[Sym]) -> Q {
    if s == t {
        return Q::zero();
    }
    let lcp = s.iter().zip(t).take_while(|(a, b)| a == b).count();
    inv_succ(lcp)
}

/// `ℓ(t) = max({|t|} ∪ range(t))`.
pub fn ell(t: &[Sym]) -> u32 {
    t.iter().map(|x| x.max_entry()).max().unwrap_or(0).max(t.len() as u32)
}

/// Least `k` with `t ∈ k^{≤k}`.
pub fn kappa(t: &[Sym]) -> u32 {
    t.iter().map(|x| x.max_entry() + 1).max().unwrap_or(0).max(t.len() as u32)
}

/// `1/(δ+1)` with `δ` the least `k` at which the trees differ inside `k^{≤k}`.
pub fn tree_space_dist(a: &FiniteTree, b: &FiniteTree) -> Q {
    let delta = a.nodes().symmetric_difference(b.nodes()).map(|s| kappa(s)).min();
    match delta {
        None => Q::zero(),
        Some(d) => inv_succ(d as usize),
    }
}

/// A subtree of pairs of equal-length sequences.
#[derive(Clone, Debug, PartialEq)]
pub enum PairTree {
    Finite(BTreeSet<(Node, Node)>),
    Full,
    /// `{(s,s)}`.
    Diagonal,
}

impl PairTree {
    pub fn finite<I: IntoIterator<Item = (Node, Node)>>(pairs: I) -> Result<PairTree> {
        let set: BTreeSet<(Node, Node)> = pairs.into_iter().collect();
        for (s, t) in &set {
            if s.len() != t.len() {
                return Err(Error::Invalid(format!("pair ({},{}) has unequal lengths", fmt_node(s), fmt_node(t))));
            }
            if !s.is_empty() && !set.contains(&(s[..s.len() - 1].to_vec(), t[..t.len() - 1].to_vec())) {
                return Err(Error::Invalid(format!("not prefix-closed at ({},{})", fmt_node(s), fmt_node(t))));
            }
        }
        Ok(PairTree::Finite(set))
    }

    pub fn contains(&self, s: &[Sym], t: &[Sym]) -> bool {
        match self {
            PairTree::Finite(set) => set.contains(&(s.to_vec(), t.to_vec())),
            PairTree::Full => s.len() == t.len(),
            PairTree::Diagonal => s == t,
        }
    }

    /// Pairs with length ≤ `depth` and entries `< branch`.
    pub fn truncate(&self, depth: usize, branch: u32) -> PairTree {
        let ok = |s: &Node| s.len() <= depth && s.iter().all(|x| x.max_entry() < branch);
        match self {
            PairTree::Finite(set) => PairTree::Finite(set.iter().filter(|(s, t)| ok(s) && ok(t)).cloned().collect()),
            _ => {
                let all = super::TreeTerm::Full.truncate(depth, branch);
                let mut out = BTreeSet::new();
                for s in all.nodes() {
                    for t in all.nodes().iter().filter(|t| t.len() == s.len()) {
                        if self.contains(s, t) {
                            out.insert((s.clone(), t.clone()));
                        }
                    }
                }
                PairTree::Finite(out)
            }
        }
    }

    pub fn pairs(&self) -> Option<&BTreeSet<(Node, Node)>> {
        match self {
            PairTree::Finite(s) => Some(s),
            _ => None,
        }
    }
}

/// `inf{1/k : R ∩ (k^{≤k})² = S ∩ (k^{≤k})²}`, reading `1/0` as 1.
pub fn pair_tree_dist(r: &PairTree, s: &PairTree) -> Result<Q> {
    let (a, b) = match (r, s) {
        (PairTree::Finite(a), PairTree::Finite(b)) => (a, b),
        _ if r == s => return Ok(Q::zero()),
        _ => return Err(Error::Unsupported("pair tree distance needs finite representations".into())),
    };
    let kmin = a.symmetric_difference(b).map(|(x, y)| kappa(x).max(kappa(y))).min();
    Ok(match kmin {
        None => Q::zero(),
        Some(k) if k >= 2 => Q::new(1, k as i64 - 1),
        Some(_) => one(),
    })
}

/// Section `R_x = {s : (s, x↾|s|) ∈ R}`. For `Full` the section is truncated at `branch`.
pub fn project(r: &PairTree, x: &[Sym], branch: u32) -> Result<FiniteTree> {
    match r {
        PairTree::Finite(set) => {
            let need = set.iter().map(|(s, _)| s.len()).max().unwrap_or(0);
            if x.len() < need {
                return Err(Error::Invalid(format!("x has length {} but the pair tree reaches length {need}", x.len())));
            }
            let nodes = set.iter().filter(|(s, t)| t[..] == x[..s.len()]).map(|(s, _)| s.clone());
            FiniteTree::new(nodes)
        }
        PairTree::Full => Ok(super::TreeTerm::Full.truncate(x.len(), branch)),
        PairTree::Diagonal => FiniteTree::new((0..=x.len()).map(|k| x[..k].to_vec())),
    }
}
