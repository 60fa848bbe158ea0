//! Recovering the tree order `a ⊑ b ⟺ a = f_k(b)` from a structure's `f_k` tables.

use std::collections::BTreeMap;

use super::{FiniteTree, Sym};
use crate::error::{Error, Result};
use crate::structure::FiniteStructure;

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedTree {
    pub sort: usize,
    pub names: Vec<String>,
    pub parent: Vec<Option<usize>>,
    pub level: Vec<usize>,
}

impl ExtractedTree {
    /// `a ⊑ b`.
    pub fn leq(&self, a: usize, mut b: usize) -> bool {
        loop {
            if a == b {
                return true;
            }
            match self.parent[b] {
                Some(p) => b = p,
                None => return false,
            }
        }
    }

    /// Relabels points as sequences of sibling positions, siblings ordered by point index.
    pub fn as_finite_tree(&self) -> FiniteTree {
        let mut code: Vec<Vec<Sym>> = vec![Vec::new(); self.names.len()];
        let mut next: BTreeMap<usize, u32> = BTreeMap::new();
        let mut order: Vec<usize> = (0..self.names.len()).collect();
        order.sort_by_key(|&a| (self.level[a], a));
        for a in order {
            if let Some(p) = self.parent[a] {
                let k = next.entry(p).or_insert(0);
                let mut c = code[p].clone();
                c.push(Sym::N(*k));
                *k += 1;
                code[a] = c;
            }
        }
        FiniteTree::closure(code)
    }
}

/// Reads `f0, f1, …` (unary on one sort) and checks they code a rooted tree.
pub fn extract_tree(m: &FiniteStructure) -> Result<ExtractedTree> {
    let f0 = m.function("f0").ok_or_else(|| Error::NotFound("no f0 symbol".into()))?;
    if f0.args.len() != 1 || f0.result != f0.args[0] {
        return Err(Error::Invalid("f0 is not a unary map on one sort".into()));
    }
    let sort = f0.result;
    let mut fs = Vec::new();
    while let Some(i) = m.function_index(&format!("f{}", fs.len())) {
        let f = &m.functions[i];
        if f.args != [sort] || f.result != sort {
            break;
        }
        fs.push(i);
    }
    let n = m.sorts[sort].len();
    let app = |k: usize, a: usize| m.apply(fs[k], &[a]);
    let name = |a: usize| m.point_name(sort, a).to_string();
    let mut level = vec![0; n];
    for a in 0..n {
        level[a] = (0..fs.len())
            .find(|&k| app(k, a) == a)
            .ok_or_else(|| Error::Invalid(format!("point {} is fixed by no f_k", name(a))))?;
    }
    for a in 0..n {
        for j in 0..fs.len() {
            for k in 0..fs.len() {
                let lhs = app(j, app(k, a));
                let rhs = app(j.min(k), a);
                if lhs != rhs {
                    return Err(Error::Invalid(format!(
                        "f{j}(f{k}({})) = {} but f{}({}) = {}: not a tree order",
                        name(a),
                        name(lhs),
                        j.min(k),
                        name(a),
                        name(rhs)
                    )));
                }
            }
            if j < level[a] && level[app(j, a)] != j {
                return Err(Error::Invalid(format!(
                    "f{j}({}) = {} sits at level {} instead of {j}",
                    name(a),
                    name(app(j, a)),
                    level[app(j, a)]
                )));
            }
        }
    }
    let roots = level.iter().filter(|&&l| l == 0).count();
    if n > 0 && roots != 1 {
        return Err(Error::Invalid(format!("{roots} points at level 0; a tree has one root")));
    }
    let parent = (0..n).map(|a| if level[a] == 0 { None } else { Some(app(level[a] - 1, a)) }).collect();
    Ok(ExtractedTree { sort, names: (0..n).map(name).collect(), parent, level })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulus::Modulus;
    use crate::structure::{FnTable, Metric};

    fn chain3(f1: Vec<usize>) -> FiniteStructure {
        let mut m = FiniteStructure::new("test");
        m.add_sort("D", vec!["a".into(), "b".into(), "c".into()], Metric::Discrete);
        let lip = Some(Modulus::lipschitz(crate::q::one()));
        m.add_function("f0", &["D"], "D", FnTable::Dense(vec![0, 0, 0]), lip.clone()).unwrap();
        m.add_function("f1", &["D"], "D", FnTable::Dense(f1), lip.clone()).unwrap();
        m.add_function("f2", &["D"], "D", FnTable::Dense(vec![0, 1, 2]), lip).unwrap();
        m
    }

    #[test]
    fn chain_order_is_recovered() {
        let t = extract_tree(&chain3(vec![0, 1, 1])).unwrap();
        assert_eq!(t.parent, vec![None, Some(0), Some(1)]);
        assert!(t.leq(0, 2) && !t.leq(2, 1));
        assert_eq!(t.as_finite_tree().rank(), 2);
    }

    #[test]
    fn single_point() {
        let mut m = FiniteStructure::new("one");
        m.add_sort("D", vec!["p".into()], Metric::Discrete);
        m.add_function("f0", &["D"], "D", FnTable::Dense(vec![0]), None).unwrap();
        let t = extract_tree(&m).unwrap();
        assert_eq!(t.as_finite_tree().len(), 1);
    }

    #[test]
    fn inconsistent_tables_are_diagnosed() {
        // c sits at level 2 but its f1-image is the root
        let e = extract_tree(&chain3(vec![0, 1, 0])).unwrap_err();
        assert!(e.to_string().contains("level") || e.to_string().contains("tree order"), "{e}");
    }
}
