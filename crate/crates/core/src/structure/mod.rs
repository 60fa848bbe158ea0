//! Finite multi-sorted metric structures with exact rational tables.

mod bounds;
mod check;
mod eval;
mod evidence;
mod io;
mod iso;
mod realize;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::formula::{FnSig, PredSig, Signature};
use crate::modulus::Modulus;
use crate::q::{inv_succ, Q};

pub use bounds::{eval_bounds, BoundKind, EvalResult};
pub use check::{best_lipschitz, check_structure, Violation};
pub use eval::{eval, eval_named, Assignment, Compiled};
pub use evidence::{
    eq_evidence, sup_norm_lower, theory_fragment, type_distance_lower, uniform_omission_check,
    uniform_principality_probe, OmissionReport, ProbeVerdict, TheoryRow, TupleVerdict,
};
pub use io::{read_structure, write_structure};
pub use iso::{find_iso, perm_iso_exhaustive, verify_iso, IsoOutcome, IsoWitness, Sublanguage};
pub use realize::{realization_tree, realizes, RealizationTree};

pub type DistFn = Arc<dyn Fn(usize, usize) -> Q + Send + Sync>;
pub type FnRule = Arc<dyn Fn(&[usize]) -> usize + Send + Sync>;
pub type PredRule = Arc<dyn Fn(&[usize]) -> Q + Send + Sync>;

#[derive(Clone)]
pub enum Metric {
    /// Row-major `n × n` table.
    Dense(Vec<Q>),
    /// Baire metric on a rooted tree: `d(u,v) = 1/(depth(lca)+1)` for `u ≠ v`.
    Tree { parent: Vec<Option<usize>>, depth: Vec<usize> },
    /// Distance 1 between distinct points.
    Discrete,
    Rule(DistFn),
}

impl fmt::Debug for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Dense(v) => write!(f, "Dense({} entries)", v.len()),
            Metric::Tree { parent, .. } => write!(f, "Tree({} nodes)", parent.len()),
            Metric::Discrete => write!(f, "Discrete"),
            Metric::Rule(_) => write!(f, "Rule"),
        }
    }
}

impl Metric {
    /// Tree metric from a parent array listed so that parents precede children.
    pub fn tree(parent: Vec<Option<usize>>) -> Result<Metric> {
        let mut depth = vec![0usize; parent.len()];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                if *p >= i {
                    return Err(Error::Invalid(format!("tree parent {p} of node {i} is not listed before it")));
                }
                depth[i] = depth[*p] + 1;
            }
        }
        Ok(Metric::Tree { parent, depth })
    }
}

pub fn tree_lca(parent: &[Option<usize>], depth: &[usize], mut a: usize, mut b: usize) -> usize {
    while depth[a] > depth[b] {
        a = parent[a].unwrap();
    }
    while depth[b] > depth[a] {
        b = parent[b].unwrap();
    }
    while a != b {
        match (parent[a], parent[b]) {
            (Some(x), Some(y)) => {
                a = x;
                b = y;
            }
            // two roots: no common ancestor; callers treat this as depth -1
            _ => return usize::MAX,
        }
    }
    a
}

#[derive(Clone, Debug)]
pub struct Sort {
    pub name: String,
    pub names: Vec<String>,
    pub metric: Metric,
    /// Claimed radius `r`: every point of the intended model lies at distance `< r` from this sort.
    pub density: Option<Q>,
    index: HashMap<String, usize>,
}

impl Sort {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn dist(&self, a: usize, b: usize) -> Q {
        if a == b {
            return Q::zero();
        }
        match &self.metric {
            Metric::Dense(t) => t[a * self.names.len() + b],
            Metric::Tree { parent, depth } => {
                let l = tree_lca(parent, depth, a, b);
                if l == usize::MAX {
                    Q::one()
                } else {
                    inv_succ(depth[l])
                }
            }
            Metric::Discrete => Q::one(),
            Metric::Rule(f) => f(a, b),
        }
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

#[derive(Clone)]
pub enum FnTable {
    Dense(Vec<usize>),
    Rule(FnRule),
}

#[derive(Clone)]
pub enum PredTable {
    Dense(Vec<Q>),
    Rule(PredRule),
}

#[derive(Clone)]
pub struct Function {
    pub name: String,
    pub args: Vec<usize>,
    pub result: usize,
    pub table: FnTable,
    pub modulus: Option<Modulus>,
}

#[derive(Clone)]
pub struct Predicate {
    pub name: String,
    pub args: Vec<usize>,
    pub table: PredTable,
    pub modulus: Option<Modulus>,
}

#[derive(Clone, Debug, Default)]
pub struct Meta {
    pub kind: String,
    pub depth: Option<usize>,
    pub branch: Option<usize>,
    pub notes: Vec<String>,
}

#[derive(Clone, Default)]
pub struct FiniteStructure {
    pub sorts: Vec<Sort>,
    pub functions: Vec<Function>,
    pub predicates: Vec<Predicate>,
    pub constants: BTreeMap<String, (usize, usize)>,
    pub meta: Meta,
    fn_index: HashMap<String, usize>,
    pred_index: HashMap<String, usize>,
}

impl fmt::Debug for FiniteStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteStructure({}", self.meta.kind)?;
        for s in &self.sorts {
            write!(f, ", {}:{}", s.name, s.len())?;
        }
        write!(f, ")")
    }
}

impl FiniteStructure {
    pub fn new(kind: &str) -> FiniteStructure {
        FiniteStructure { meta: Meta { kind: kind.to_string(), ..Default::default() }, ..Default::default() }
    }

    pub fn add_sort(&mut self, name: &str, names: Vec<String>, metric: Metric) -> usize {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        self.sorts.push(Sort { name: name.to_string(), names, metric, density: None, index });
        self.sorts.len() - 1
    }

    pub fn sort_index(&self, name: &str) -> Result<usize> {
        self.sorts
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::Sort(format!("unknown sort {name}")))
    }

    pub fn sort(&self, name: &str) -> Result<&Sort> {
        Ok(&self.sorts[self.sort_index(name)?])
    }

    pub fn size(&self) -> usize {
        self.sorts.iter().map(|s| s.len()).sum()
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.fn_index.get(name).copied()
    }

    pub fn predicate_index(&self, name: &str) -> Option<usize> {
        self.pred_index.get(name).copied()
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.function_index(name).map(|i| &self.functions[i])
    }

    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicate_index(name).map(|i| &self.predicates[i])
    }

    fn arg_sorts(&self, args: &[&str]) -> Result<Vec<usize>> {
        args.iter().map(|a| self.sort_index(a)).collect()
    }

    pub fn add_function(
        &mut self,
        name: &str,
        args: &[&str],
        result: &str,
        table: FnTable,
        modulus: Option<Modulus>,
    ) -> Result<()> {
        let args = self.arg_sorts(args)?;
        let result = self.sort_index(result)?;
        if let FnTable::Dense(t) = &table {
            let want: usize = args.iter().map(|&s| self.sorts[s].len()).product();
            if t.len() != want {
                return Err(Error::Invalid(format!("table of {name} has {} entries, expected {want}", t.len())));
            }
        }
        self.fn_index.insert(name.to_string(), self.functions.len());
        self.functions.push(Function { name: name.to_string(), args, result, table, modulus });
        Ok(())
    }

    pub fn add_predicate(&mut self, name: &str, args: &[&str], table: PredTable, modulus: Option<Modulus>) -> Result<()> {
        let args = self.arg_sorts(args)?;
        if let PredTable::Dense(t) = &table {
            let want: usize = args.iter().map(|&s| self.sorts[s].len()).product();
            if t.len() != want {
                return Err(Error::Invalid(format!("table of {name} has {} entries, expected {want}", t.len())));
            }
        }
        self.pred_index.insert(name.to_string(), self.predicates.len());
        self.predicates.push(Predicate { name: name.to_string(), args, table, modulus });
        Ok(())
    }

    pub fn add_constant(&mut self, name: &str, sort: usize, idx: usize) {
        self.constants.insert(name.to_string(), (sort, idx));
    }

    /// Row-major offset of an argument tuple.
    pub fn offset(&self, sorts: &[usize], args: &[usize]) -> usize {
        let mut o = 0;
        for (s, a) in sorts.iter().zip(args) {
            o = o * self.sorts[*s].len() + a;
        }
        o
    }

    pub fn apply(&self, fi: usize, args: &[usize]) -> usize {
        let f = &self.functions[fi];
        match &f.table {
            FnTable::Dense(t) => t[self.offset(&f.args, args)],
            FnTable::Rule(r) => r(args),
        }
    }

    pub fn pred_value(&self, pi: usize, args: &[usize]) -> Q {
        let p = &self.predicates[pi];
        match &p.table {
            PredTable::Dense(t) => t[self.offset(&p.args, args)],
            PredTable::Rule(r) => r(args),
        }
    }

    pub fn dist(&self, sort: usize, a: usize, b: usize) -> Q {
        self.sorts[sort].dist(a, b)
    }

    /// A constant name or a point display name, resolved to `(sort, point)`.
    pub fn resolve(&self, name: &str) -> Result<(usize, usize)> {
        if let Some(&c) = self.constants.get(name) {
            return Ok(c);
        }
        let mut hits = self.sorts.iter().enumerate().filter_map(|(si, s)| s.lookup(name).map(|p| (si, p)));
        match (hits.next(), hits.next()) {
            (Some(h), None) => Ok(h),
            (Some(_), Some(_)) => Err(Error::Sort(format!("point name {name} is ambiguous across sorts"))),
            _ => Err(Error::UnknownSymbol(name.to_string())),
        }
    }

    pub fn point_name(&self, sort: usize, idx: usize) -> &str {
        &self.sorts[sort].names[idx]
    }

    /// Signature with every constant and every unambiguous point name.
    pub fn signature(&self) -> Signature {
        let mut sig = Signature { sorts: self.sorts.iter().map(|s| s.name.clone()).collect(), ..Default::default() };
        for f in &self.functions {
            sig.functions.insert(
                f.name.clone(),
                FnSig {
                    args: f.args.iter().map(|&s| self.sorts[s].name.clone()).collect(),
                    result: self.sorts[f.result].name.clone(),
                    modulus: f.modulus.clone(),
                },
            );
        }
        for p in &self.predicates {
            sig.predicates.insert(
                p.name.clone(),
                PredSig { args: p.args.iter().map(|&s| self.sorts[s].name.clone()).collect(), modulus: p.modulus.clone() },
            );
        }
        let mut seen: HashMap<&str, Option<usize>> = HashMap::new();
        for (si, s) in self.sorts.iter().enumerate() {
            for n in &s.names {
                seen.entry(n.as_str()).and_modify(|e| *e = None).or_insert(Some(si));
            }
        }
        for (n, s) in seen {
            if let Some(si) = s {
                sig.constants.insert(n.to_string(), self.sorts[si].name.clone());
            }
        }
        for (n, (si, _)) in &self.constants {
            sig.constants.insert(n.clone(), self.sorts[*si].name.clone());
        }
        sig
    }

    /// Set the density claim of one sort.
    pub fn with_density(mut self, sort: &str, r: Option<Q>) -> Result<FiniteStructure> {
        let si = self.sort_index(sort)?;
        self.sorts[si].density = r;
        Ok(self)
    }

    /// Materialize every rule-based table into an explicit one.
    pub fn densified(&self) -> FiniteStructure {
        let mut out = self.clone();
        for s in out.sorts.iter_mut() {
            if let Metric::Rule(_) = s.metric {
                let n = s.len();
                let mut t = vec![Q::zero(); n * n];
                for a in 0..n {
                    for b in 0..n {
                        t[a * n + b] = s.dist(a, b);
                    }
                }
                s.metric = Metric::Dense(t);
            }
        }
        for fi in 0..out.functions.len() {
            if let FnTable::Rule(_) = out.functions[fi].table {
                let tuples = self.tuples(&self.functions[fi].args);
                let t = tuples.iter().map(|a| self.apply(fi, a)).collect();
                out.functions[fi].table = FnTable::Dense(t);
            }
        }
        for pi in 0..out.predicates.len() {
            if let PredTable::Rule(_) = out.predicates[pi].table {
                let tuples = self.tuples(&self.predicates[pi].args);
                let t = tuples.iter().map(|a| self.pred_value(pi, a)).collect();
                out.predicates[pi].table = PredTable::Dense(t);
            }
        }
        out
    }

    /// All argument tuples over the given sorts, lexicographic.
    pub fn tuples(&self, sorts: &[usize]) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for &s in sorts {
            let n = self.sorts[s].len();
            let mut next = Vec::with_capacity(out.len() * n);
            for t in &out {
                for p in 0..n {
                    let mut u = t.clone();
                    u.push(p);
                    next.push(u);
                }
            }
            out = next;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::q::q;

    #[test]
    fn tree_metric_is_baire() {
        // <>, <0>, <1>, <0,0>
        let m = Metric::tree(vec![None, Some(0), Some(0), Some(1)]).unwrap();
        let mut s = FiniteStructure::new("t");
        s.add_sort("D", vec!["<>".into(), "<0>".into(), "<1>".into(), "<0,0>".into()], m);
        let d = &s.sorts[0];
        assert_eq!(d.dist(0, 1), q(1, 1));
        assert_eq!(d.dist(1, 3), q(1, 2));
        assert_eq!(d.dist(2, 3), q(1, 1));
        assert_eq!(d.dist(3, 3), q(0, 1));
    }

    #[test]
    fn point_names_resolve() {
        let mut s = FiniteStructure::new("t");
        s.add_sort("D", vec!["a".into(), "b".into()], Metric::Discrete);
        assert_eq!(s.resolve("b").unwrap(), (0, 1));
        assert!(s.resolve("c").is_err());
    }
}
