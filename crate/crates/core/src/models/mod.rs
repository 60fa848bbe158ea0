//! Finite truncations of the tree-based models, their types, the height gap
//! predicates and the colouring families used by the pruned models.

mod baire;
mod family;
mod kinds;
mod tmodel;
mod window;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::modulus::Modulus;
use crate::q::one;
use crate::structure::{FiniteStructure, FnTable, Metric};
use crate::trees::{fmt_node, Node};

pub use baire::{
    canonical_pair_trees, canonical_trees, code_value, n2_trees, n3_pair_trees, naturalize, n_model, n2_model, parse_pair_tree,
    n3_model, projection_model, NParams, N2Params, N3Params, ProjParams,
};
pub use family::{kfamily_check, ClauseResult, KFamily, KFunction, KReport, Mult};
pub use kinds::{build_type, fragment_texts, pred_gap, TypeParams};
pub use tmodel::{m4_model, m_model, MModel, MNode, MParams};
pub use window::{perturb_colour, window_pair, window_structure, Label, Window};

/// Default point budget for a single build.
pub const DEFAULT_CAP: usize = 200_000;

/// A constructor string such as `N(depth=3,branch=2)`, parsed into a selector and raw parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelCtor {
    pub selector: String,
    pub params: BTreeMap<String, String>,
    pub cap: usize,
}

impl fmt::Display for ModelCtor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{}({})", self.selector, parts.join(","))
    }
}

/// Splits on `sep` outside `()`, `[]`, `{}` and `<>`.
pub fn split_top(s: &str, sep: char) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' | '[' | '{' | '<' => depth += 1,
            ')' | ']' | '}' | '>' => depth -= 1,
            _ => {}
        }
        if c == sep && depth == 0 {
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push(c);
        }
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur);
    }
    out.into_iter().map(|x| x.trim().to_string()).collect()
}

impl ModelCtor {
    pub fn parse(src: &str) -> Result<ModelCtor> {
        let src = src.trim();
        let (sel, rest) = match src.find('(') {
            Some(i) => (&src[..i], &src[i..]),
            None => (src, "()"),
        };
        if !rest.ends_with(')') {
            return Err(Error::Parse(format!("constructor '{src}' lacks a closing parenthesis")));
        }
        let inner = &rest[1..rest.len() - 1];
        let mut params = BTreeMap::new();
        for part in split_top(inner, ',') {
            if part.is_empty() {
                continue;
            }
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("constructor parameter '{part}' is not key=value")))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        let selector = sel.trim().to_string();
        if !["N", "N2", "N3", "Projection", "M", "M_l", "M4"].contains(&selector.as_str()) {
            return Err(Error::Parse(format!("unknown model constructor '{selector}'")));
        }
        Ok(ModelCtor { selector, params, cap: DEFAULT_CAP })
    }

    pub fn with_cap(mut self, cap: usize) -> ModelCtor {
        self.cap = cap;
        self
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Parse(format!("parameter {key}={v} is not a natural number"))),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        matches!(self.params.get(key).map(|s| s.as_str()), Some("1" | "true" | "yes" | "on"))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(|s| s.as_str())
    }

    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.params.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Parse(format!("{} does not take parameter '{k}'", self.selector)));
            }
        }
        Ok(())
    }
}

pub fn build_model(c: &ModelCtor) -> Result<FiniteStructure> {
    match c.selector.as_str() {
        "N" => n_model(&NParams::from_ctor(c)?),
        "N2" => n2_model(&N2Params::from_ctor(c)?),
        "N3" => n3_model(&N3Params::from_ctor(c)?),
        "Projection" => projection_model(&ProjParams::from_ctor(c)?),
        "M" | "M_l" => Ok(m_model(&MParams::from_ctor(c)?)?.structure),
        "M4" => Ok(m4_model(&MParams::from_ctor(c)?)?.structure),
        other => Err(Error::Parse(format!("unknown model constructor '{other}'"))),
    }
}

pub(crate) fn cap_check(what: &str, n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::Cap(format!("{what} needs {n} points, cap is {cap}")));
    }
    Ok(())
}

/// Adds a sort of tree nodes with the Baire metric and `f_0..=f_fmax`.
/// Nodes must be prefix-closed; the returned map sends nodes to point indices.
pub(crate) fn add_tree_sort(m: &mut FiniteStructure, sort: &str, nodes: &[Node], fmax: usize) -> Result<HashMap<Node, usize>> {
    let mut order: Vec<&Node> = nodes.iter().collect();
    order.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    order.dedup();
    let index: HashMap<Node, usize> = order.iter().enumerate().map(|(i, s)| ((*s).clone(), i)).collect();
    let mut parent = Vec::with_capacity(order.len());
    for s in &order {
        if s.is_empty() {
            parent.push(None);
        } else {
            let p = index
                .get(&s[..s.len() - 1])
                .ok_or_else(|| Error::Invalid(format!("node {} lacks its parent", fmt_node(s))))?;
            parent.push(Some(*p));
        }
    }
    let names = order.iter().map(|s| fmt_node(s)).collect();
    m.add_sort(sort, names, Metric::tree(parent)?);
    let lip = Some(Modulus::lipschitz(one()));
    for k in 0..=fmax {
        let table = order.iter().map(|s| if k <= s.len() { index[&s[..k]] } else { index[*s] }).collect();
        let name = if sort == "D" || sort == "D1" { format!("f{k}") } else { format!("f{k}_{sort}") };
        m.add_function(&name, &[sort], sort, FnTable::Dense(table), lip.clone())?;
    }
    Ok(index)
}

/// Sort nodes level by level, then lexicographically.
pub(crate) fn bfs_sorted<I: IntoIterator<Item = Node>>(nodes: I) -> Vec<Node> {
    let mut v: Vec<Node> = nodes.into_iter().collect();
    v.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    v.dedup();
    v
}
