//! Colouring families: finitely supported functions on the wide tree, with
//! multiplicities, and the finite checks of the four family requirements.

use std::collections::BTreeMap;
use std::fmt;

use super::split_top;
use super::window::{window_pair, Window};
use crate::error::{Error, Result};
use crate::structure::{find_iso, IsoOutcome, Sublanguage};
use crate::trees::{fmt_node, parse_node, Node, Sym};

/// How many summands carry a member: a finite count or infinitely many.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mult {
    Fin(usize),
    Omega,
}

impl Mult {
    pub fn add(self, o: Mult) -> Mult {
        match (self, o) {
            (Mult::Fin(a), Mult::Fin(b)) => Mult::Fin(a + b),
            _ => Mult::Omega,
        }
    }

    pub fn scale(self, by: Mult) -> Mult {
        match (self, by) {
            (Mult::Fin(0), _) | (_, Mult::Fin(0)) => Mult::Fin(0),
            (Mult::Fin(a), Mult::Fin(b)) => Mult::Fin(a * b),
            _ => Mult::Omega,
        }
    }

    pub fn finite(self) -> Option<usize> {
        match self {
            Mult::Fin(n) => Some(n),
            Mult::Omega => None,
        }
    }
}

impl fmt::Display for Mult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mult::Fin(n) => write!(f, "{n}"),
            Mult::Omega => write!(f, "omega"),
        }
    }
}

/// A function from wide-tree nodes to naturals: `base` except on the listed nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KFunction {
    pub base: u32,
    pub mult: Mult,
    pub values: BTreeMap<Node, u32>,
}

/// Wide-tree nodes are pair sequences whose first coordinates strictly decrease.
pub(crate) fn is_wide_node(s: &[Sym]) -> bool {
    let mut prev: Option<u32> = None;
    for x in s {
        match x {
            Sym::P(a, _) => {
                if prev.is_some_and(|p| *a >= p) {
                    return false;
                }
                prev = Some(*a);
            }
            _ => return false,
        }
    }
    true
}

impl KFunction {
    pub fn constant(base: u32) -> KFunction {
        KFunction { base, mult: Mult::Omega, values: BTreeMap::new() }
    }

    pub fn k(&self, s: &[Sym]) -> u32 {
        self.values.get(s).copied().unwrap_or(self.base)
    }

    pub fn set(mut self, s: Node, v: u32) -> KFunction {
        if v == self.base {
            self.values.remove(&s);
        } else {
            self.values.insert(s, v);
        }
        self
    }

    /// Largest value taken anywhere.
    pub fn max_value(&self) -> u32 {
        self.values.values().copied().chain([self.base]).max().unwrap()
    }

    /// Equal as functions on the whole tree.
    pub fn same_function(&self, o: &KFunction) -> bool {
        let norm = |k: &KFunction| -> BTreeMap<Node, u32> {
            k.values.iter().filter(|(_, v)| **v != k.base).map(|(s, v)| (s.clone(), *v)).collect()
        };
        self.base == o.base && norm(self) == norm(o)
    }

    fn parse_line(line: &str) -> Result<KFunction> {
        let mut k = KFunction::constant(0);
        let mut pending = Vec::new();
        for tok in line.split_whitespace() {
            let (key, val) = tok
                .rsplit_once('=')
                .ok_or_else(|| Error::Parse(format!("family token '{tok}' is not key=value")))?;
            let num = |v: &str| v.parse::<u32>().map_err(|_| Error::Parse(format!("'{v}' is not a natural number")));
            match key {
                "base" => k.base = num(val)?,
                "mult" => {
                    k.mult = if val == "omega" || val == "w" { Mult::Omega } else { Mult::Fin(num(val)? as usize) }
                }
                _ => {
                    let s = parse_node(key)?;
                    if !is_wide_node(&s) {
                        return Err(Error::Invalid(format!("{key} is not a node of the wide tree")));
                    }
                    pending.push((s, num(val)?));
                }
            }
        }
        for (s, v) in pending {
            k = k.set(s, v);
        }
        Ok(k)
    }
}

impl fmt::Display for KFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "base={} mult={}", self.base, self.mult)?;
        for (s, v) in &self.values {
            write!(f, " {}={v}", fmt_node(s))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KFamily {
    pub members: Vec<KFunction>,
    /// Annotation asserting closure under finite variants.
    pub variants_all: bool,
}

impl KFamily {
    /// Two members differing at the root, both with base 4 everywhere else, closed under variants.
    pub fn standard() -> KFamily {
        KFamily {
            members: vec![
                KFunction::constant(4).set(Vec::new(), 0),
                KFunction::constant(4).set(Vec::new(), 1),
            ],
            variants_all: true,
        }
    }

    /// One member per line; `#` starts a comment; a line `variants=all` sets the closure annotation.
    pub fn parse(text: &str) -> Result<KFamily> {
        let mut members = Vec::new();
        let mut variants_all = false;
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if line == "variants=all" {
                variants_all = true;
                continue;
            }
            members.push(KFunction::parse_line(line)?);
        }
        if members.is_empty() {
            return Err(Error::Invalid("a family needs at least one member".into()));
        }
        Ok(KFamily { members, variants_all })
    }

    /// `standard`, an inline `{member; member; ...}`, or a file path.
    pub fn from_spec(spec: &str) -> Result<KFamily> {
        let s = spec.trim();
        if s == "standard" {
            return Ok(KFamily::standard());
        }
        if let Some(inner) = s.strip_prefix('{').and_then(|x| x.strip_suffix('}')) {
            return KFamily::parse(&split_top(inner, ';').join("\n"));
        }
        let text = std::fs::read_to_string(s).map_err(|e| Error::Io(format!("{s}: {e}")))?;
        KFamily::parse(&text)
    }

    pub fn max_value(&self) -> u32 {
        self.members.iter().map(|k| k.max_value()).max().unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let mut out: Vec<String> = self.members.iter().map(|k| k.to_string()).collect();
        if self.variants_all {
            out.push("variants=all".into());
        }
        out.join("\n") + "\n"
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClauseResult {
    pub clause: String,
    pub pass: bool,
    pub witness: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KReport {
    pub clauses: Vec<ClauseResult>,
}

impl KReport {
    pub fn all_pass(&self) -> bool {
        self.clauses.iter().all(|c| c.pass)
    }

    pub fn clause(&self, name: &str) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.clause == name)
    }
}

impl fmt::Display for KReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            writeln!(f, "{} {}: {}", c.clause, if c.pass { "pass" } else { "fail" }, c.witness)?;
        }
        Ok(())
    }
}

/// Nodes whose value a single-node variant might change: the support, the root and its
/// children `(a,c)` with `a, c < bound`.
fn variant_sites(k: &KFunction, bound: u32) -> Vec<Node> {
    let mut v: Vec<Node> = vec![Vec::new()];
    for a in 0..bound {
        for c in 0..bound {
            v.push(vec![Sym::P(a, c)]);
        }
    }
    v.extend(k.values.keys().cloned());
    v.sort();
    v.dedup();
    v
}

fn match_member(fam: &KFamily, n: usize, l_src: Option<usize>, l_dst: Option<usize>, m: usize, lambda: usize) -> Result<ClauseResult> {
    let src = Window::build(&[(&fam.members[n], Mult::Fin(1))], l_src, m, lambda)?;
    for (i, cand) in fam.members.iter().enumerate() {
        let dst = Window::build(&[(cand, Mult::Fin(1))], l_dst, m, lambda)?;
        if !src.same_type(&dst) {
            continue;
        }
        let (a, b) = window_pair(&src, &dst)?;
        match find_iso(&a, &b, &Sublanguage::all(&a)) {
            IsoOutcome::Found(w) => {
                return Ok(ClauseResult {
                    clause: String::new(),
                    pass: true,
                    witness: format!("member {n} matches member {i} ({} points matched)", w.size()),
                })
            }
            other => {
                return Ok(ClauseResult {
                    clause: String::new(),
                    pass: false,
                    witness: format!("member {n} vs member {i}: canonical types agree but search said {other}"),
                })
            }
        }
    }
    Ok(ClauseResult { clause: String::new(), pass: false, witness: format!("member {n} has no isomorphic partner") })
}

/// Checks the four family requirements on the window of the first `m` levels in the
/// reduct to colours and projections below `lambda`.
pub fn kfamily_check(fam: &KFamily, l: usize, m: usize, lambda: usize) -> Result<KReport> {
    if l >= m {
        return Err(Error::Invalid(format!("need l < m, got l={l}, m={m}")));
    }
    let mut clauses = Vec::new();
    let finite: Vec<usize> = (0..fam.members.len()).filter(|&i| fam.members[i].mult != Mult::Omega).collect();
    clauses.push(ClauseResult {
        clause: "(k1)".into(),
        pass: finite.is_empty(),
        witness: if finite.is_empty() {
            "every member has multiplicity omega".into()
        } else {
            format!("member {} has finite multiplicity {}", finite[0], fam.members[finite[0]].mult)
        },
    });
    let k2 = if fam.variants_all {
        ClauseResult { clause: "(k2)".into(), pass: true, witness: "closure under finite variants is annotated".into() }
    } else {
        let mut missing = None;
        'outer: for (n, k) in fam.members.iter().enumerate() {
            for s in variant_sites(k, lambda as u32) {
                for v in 0..=lambda as u32 {
                    if v == k.k(&s) {
                        continue;
                    }
                    let var = k.clone().set(s.clone(), v);
                    if !fam.members.iter().any(|o| o.same_function(&var)) {
                        missing = Some(format!("variant of member {n} with k({}) = {v} is absent", fmt_node(&s)));
                        break 'outer;
                    }
                }
            }
        }
        match missing {
            Some(w) => ClauseResult { clause: "(k2)".into(), pass: false, witness: w },
            None => ClauseResult { clause: "(k2)".into(), pass: true, witness: "all single-node variants present".into() },
        }
    };
    clauses.push(k2);
    for (name, ls, ld) in [("(k3)", Some(l), None), ("(k4)", None, Some(l))] {
        let mut res = ClauseResult { clause: name.into(), pass: true, witness: String::new() };
        let mut notes = Vec::new();
        for n in 0..fam.members.len() {
            let r = match_member(fam, n, ls, ld, m, lambda)?;
            notes.push(r.witness);
            if !r.pass {
                res.pass = false;
                res.witness = notes.pop().unwrap();
                break;
            }
        }
        if res.pass {
            res.witness = notes.join("; ");
        }
        clauses.push(res);
    }
    Ok(KReport { clauses })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let f = KFamily::parse("base=2 mult=omega <>=0 <(1,0)>=3\nbase=1 mult=2\nvariants=all\n").unwrap();
        assert_eq!(f.members.len(), 2);
        assert_eq!(f.members[0].k(&[Sym::P(1, 0)]), 3);
        assert_eq!(f.members[0].k(&[Sym::P(1, 1)]), 2);
        assert_eq!(f.members[1].mult, Mult::Fin(2));
        assert_eq!(KFamily::parse(&f.to_text()).unwrap(), f);
        assert!(KFamily::parse("base=1 <(0,0),(1,0)>=2").is_err());
        let inline = KFamily::from_spec("{base=4 <>=0; base=4 <>=1; variants=all}").unwrap();
        assert_eq!(inline, KFamily::standard());
    }

    #[test]
    fn omega_members_pass_k1() {
        let r = kfamily_check(&KFamily::standard(), 1, 3, 3).unwrap();
        assert!(r.clause("(k1)").unwrap().pass);
    }

    #[test]
    fn missing_variant_is_named() {
        let f = KFamily::parse("base=4 <>=0").unwrap();
        let r = kfamily_check(&f, 1, 3, 3).unwrap();
        let k2 = r.clause("(k2)").unwrap();
        assert!(!k2.pass);
        assert!(k2.witness.contains("k(<>) = 1"), "{}", k2.witness);
    }

    #[test]
    fn matched_family_passes_k3_k4() {
        let r = kfamily_check(&KFamily::standard(), 2, 4, 4).unwrap();
        assert!(r.all_pass(), "{r}");
    }
}
