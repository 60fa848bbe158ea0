//! Realization search for partial types, and the tree `T_{D,t}`.

use std::collections::BTreeMap;

use super::eval::Compiled;
use super::FiniteStructure;
use crate::error::{Error, Result};
use crate::formula::{Formula, Term, Var};
use crate::q::Q;
use crate::types::{omega_type, PartialType};

/// Conditions with every variable annotated by its sort, and the variable sorts.
pub(crate) fn annotate(m: &FiniteStructure, vars: &[Var], conds: &[Formula]) -> Result<(Vec<Formula>, Vec<usize>)> {
    let sig = m.signature();
    let mut probe: Vec<Formula> = conds.to_vec();
    for v in vars {
        if let Some(s) = &v.sort {
            let t = Term::Var(Var::sorted(v.idx, s));
            probe.push(Formula::Dist(t.clone(), t));
        }
    }
    let all = Formula::Max(probe);
    let sorts = if all.all_vars().is_empty() { BTreeMap::new() } else { sig.infer_sorts(&all)? };
    let mut sort_ix = Vec::new();
    for v in vars {
        let name = match sorts.get(&v.idx) {
            Some(s) => s.clone(),
            None if m.sorts.len() == 1 => m.sorts[0].name.clone(),
            None => return Err(Error::Sort(format!("cannot infer the sort of x{}", v.idx))),
        };
        sort_ix.push(m.sort_index(&name)?);
    }
    let map: BTreeMap<u32, Term> = vars
        .iter()
        .zip(&sort_ix)
        .map(|(v, s)| (v.idx, Term::Var(Var::sorted(v.idx, &m.sorts[*s].name))))
        .collect();
    let annotated = conds.iter().map(|c| c.substitute(&map)).collect();
    Ok((annotated, sort_ix))
}

/// Condition groups by the position of their last variable in `vars` (`None` = closed).
fn stage<'a>(m: &'a FiniteStructure, vars: &[Var], conds: &[Formula]) -> Result<(Vec<Compiled<'a>>, Vec<Vec<Compiled<'a>>>)> {
    let pos: BTreeMap<u32, usize> = vars.iter().enumerate().map(|(i, v)| (v.idx, i)).collect();
    let mut closed = Vec::new();
    let mut levels: Vec<Vec<Compiled>> = (0..vars.len()).map(|_| Vec::new()).collect();
    for c in conds {
        let mut last: Option<usize> = None;
        for v in c.free_vars() {
            let p = *pos.get(&v).ok_or(Error::Unbound(v))?;
            last = Some(last.map_or(p, |l: usize| l.max(p)));
        }
        let comp = Compiled::new(c, m)?;
        match last {
            None => closed.push(comp),
            Some(l) => levels[l].push(comp),
        }
    }
    Ok((closed, levels))
}

/// Tuples (lexicographic in point indices) whose fragment-`n` conditions all
/// evaluate to at most `tol`, up to `limit` results.
pub fn realizes_limit(m: &FiniteStructure, t: &PartialType, n: usize, tol: Q, limit: usize) -> Result<Vec<Vec<usize>>> {
    let frag = t.fragment(n);
    let (conds, sorts) = annotate(m, &t.vars, &frag)?;
    let (closed, levels) = stage(m, &t.vars, &conds)?;
    let slots = conds
        .iter()
        .flat_map(|c| c.all_vars())
        .chain(t.vars.iter().map(|v| v.idx))
        .max()
        .map(|x| x as usize + 1)
        .unwrap_or(0);
    let mut env = vec![0usize; slots];
    for c in &closed {
        if c.eval_slots(&mut env) > tol {
            return Ok(vec![]);
        }
    }
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(
        i: usize,
        m: &FiniteStructure,
        t: &PartialType,
        sorts: &[usize],
        levels: &[Vec<Compiled>],
        tol: Q,
        env: &mut Vec<usize>,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        limit: usize,
    ) {
        if out.len() >= limit {
            return;
        }
        if i == sorts.len() {
            out.push(cur.clone());
            return;
        }
        let slot = t.vars[i].idx as usize;
        for p in 0..m.sorts[sorts[i]].len() {
            env[slot] = p;
            if levels[i].iter().all(|c| c.eval_slots(env) <= tol) {
                cur.push(p);
                go(i + 1, m, t, sorts, levels, tol, env, cur, out, limit);
                cur.pop();
                if out.len() >= limit {
                    return;
                }
            }
        }
    }
    go(0, m, t, &sorts, &levels, tol, &mut env, &mut cur, &mut out, limit);
    Ok(out)
}

/// All realizing tuples of the fragment-`n` conditions within `tol`.
pub fn realizes(m: &FiniteStructure, t: &PartialType, n: usize, tol: Q) -> Result<Vec<Vec<usize>>> {
    realizes_limit(m, t, n, tol, usize::MAX)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealizationTree {
    /// Node count at levels `1..=depth` (level `k` holds sequences of length `k`).
    pub counts: Vec<usize>,
    /// One sequence of maximal length, when one exists.
    pub full_path: Option<Vec<String>>,
    /// First empty level.
    pub died_at: Option<usize>,
    /// Expansion stopped because a level exceeded the node cap.
    pub capped: bool,
}

/// `T_{D,t}` up to `depth`: level `k` holds the sequences from the home sort
/// realizing the `t_ω` fragment on `k` variables.
pub fn realization_tree(m: &FiniteStructure, t: &PartialType, depth: usize, cap: usize) -> Result<RealizationTree> {
    let full = omega_type(t, depth.max(1))?;
    let home = match &t.vars[0].sort {
        Some(s) => Some(s.clone()),
        None if m.sorts.len() == 1 => Some(m.sorts[0].name.clone()),
        None => None,
    };
    let vars: Vec<Var> = full.vars.iter().map(|v| Var { idx: v.idx, sort: home.clone() }).collect();
    // conditions first appearing at level k+1, closed ones included
    let mut per_level: Vec<Vec<Formula>> = Vec::new();
    let mut seen: Vec<Formula> = Vec::new();
    for k in 1..=depth {
        let mut fresh = Vec::new();
        for c in omega_type(t, k)?.conditions {
            if let Some(i) = seen.iter().position(|x| *x == c) {
                seen.swap_remove(i);
            } else {
                fresh.push(c);
            }
        }
        seen = omega_type(t, k)?.conditions;
        per_level.push(fresh);
    }
    let (_, sorts) = annotate(m, &vars, &full.conditions)?;
    let mut levels: Vec<Vec<Compiled>> = Vec::new();
    for fresh in &per_level {
        let (ann, _) = annotate(m, &vars, fresh)?;
        levels.push(ann.iter().map(|c| Compiled::new(c, m)).collect::<Result<_>>()?);
    }
    let slots = full.conditions.iter().flat_map(|c| c.all_vars()).max().map(|x| x as usize + 1).unwrap_or(0);
    let mut env = vec![0usize; slots.max(depth)];
    let mut out = RealizationTree { counts: vec![], full_path: None, died_at: None, capped: false };
    let dom = sorts.first().copied().unwrap_or(0);
    let size = m.sorts[dom].len();
    // each node: (parent index in previous level, point)
    let mut layers: Vec<Vec<(usize, usize)>> = Vec::new();
    for k in 0..depth {
        let mut next = Vec::new();
        if k == 0 {
            for p in 0..size {
                env[0] = p;
                if levels[0].iter().all(|c| c.eval_slots(&mut env) == Q::from_integer(0)) {
                    next.push((usize::MAX, p));
                }
            }
        } else {
            let prev = &layers[k - 1];
            'nodes: for (ni, _) in prev.iter().enumerate() {
                // restore the path into env
                let mut idx = ni;
                for lvl in (0..k).rev() {
                    let (par, p) = layers[lvl][idx];
                    env[lvl] = p;
                    idx = par;
                }
                for p in 0..size {
                    env[k] = p;
                    if levels[k].iter().all(|c| c.eval_slots(&mut env) == Q::from_integer(0)) {
                        next.push((ni, p));
                        if next.len() > cap {
                            out.capped = true;
                            break 'nodes;
                        }
                    }
                }
            }
        }
        out.counts.push(next.len());
        let empty = next.is_empty();
        layers.push(next);
        if empty {
            out.died_at = Some(k + 1);
            out.counts.resize(depth, 0);
            return Ok(out);
        }
        if out.capped {
            break;
        }
    }
    if !out.capped && layers.len() == depth {
        let mut path = Vec::new();
        let mut idx = 0;
        for lvl in (0..depth).rev() {
            let (par, p) = layers[lvl][idx];
            path.push(m.sorts[dom].names[p].clone());
            idx = par;
        }
        path.reverse();
        out.full_path = Some(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::q::q;
    use crate::structure::Metric;

    fn three() -> FiniteStructure {
        let mut m = FiniteStructure::new("three");
        let t = vec![q(0, 1), q(1, 2), q(1, 1), q(1, 2), q(0, 1), q(1, 1), q(1, 1), q(1, 1), q(0, 1)];
        m.add_sort("D", vec!["a".into(), "b".into(), "c".into()], Metric::Dense(t));
        m
    }

    #[test]
    fn empty_type_gives_all_tuples() {
        let t = PartialType::empty("e", vec![Var::new(0), Var::new(1)]);
        assert_eq!(realizes(&three(), &t, 0, q(0, 1)).unwrap().len(), 9);
    }

    #[test]
    fn tolerance_widens_realizations() {
        let t = PartialType::new("t", vec![Var::new(0)], vec![parse_formula("d(x0,a)").unwrap()]);
        assert_eq!(realizes(&three(), &t, 0, q(0, 1)).unwrap(), vec![vec![0]]);
        assert_eq!(realizes(&three(), &t, 0, q(1, 2)).unwrap(), vec![vec![0], vec![1]]);
    }

    #[test]
    fn realized_point_gives_constant_path() {
        let t = PartialType::new("t", vec![Var::new(0)], vec![parse_formula("d(x0,a)").unwrap()]);
        let r = realization_tree(&three(), &t, 4, 1000).unwrap();
        assert!(r.full_path.is_some());
        assert_eq!(r.full_path.unwrap(), vec!["a"; 4]);
    }

    #[test]
    fn unsatisfiable_type_dies_once_thresholds_bite() {
        // φ_0 = 1 passes the level-2 threshold 1/1 and fails 1/2 at level 3
        let t = PartialType::new("t", vec![Var::new(0)], vec![parse_formula("1").unwrap()]);
        let r = realization_tree(&three(), &t, 4, 1000).unwrap();
        assert_eq!(r.died_at, Some(3));
        assert_eq!(r.counts, vec![3, 9, 0, 0]);
    }
}
