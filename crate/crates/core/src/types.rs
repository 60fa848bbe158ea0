//! Partial types: presented sets of closed conditions, pairing, `t_ω`,
//! uniform sequences and a line-oriented text format.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::formula::{dist, fmax, fmin, fmonus, formula_modulus, parse_formula, Formula, Signature, Term, Var};
use crate::modulus::Modulus;
use crate::q::{pow2_neg, q, Q};

/// The `j`-th batch of conditions of an infinite presentation.
#[derive(Clone)]
pub struct Generator {
    pub desc: String,
    pub f: Option<Arc<dyn Fn(usize) -> Vec<Formula> + Send + Sync>>,
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Generator({})", self.desc)
    }
}

impl Generator {
    pub fn new(desc: impl Into<String>, f: impl Fn(usize) -> Vec<Formula> + Send + Sync + 'static) -> Generator {
        Generator { desc: desc.into(), f: Some(Arc::new(f)) }
    }
}

#[derive(Clone, Debug)]
pub struct PartialType {
    pub vars: Vec<Var>,
    /// Each formula `φ` stands for the closed condition `φ = 0`.
    pub conditions: Vec<Formula>,
    pub generator: Option<Generator>,
    pub label: String,
}

impl PartialType {
    pub fn new(label: &str, vars: Vec<Var>, conditions: Vec<Formula>) -> PartialType {
        PartialType { vars, conditions, generator: None, label: label.to_string() }
    }

    pub fn empty(label: &str, vars: Vec<Var>) -> PartialType {
        PartialType::new(label, vars, Vec::new())
    }

    pub fn with_generator(mut self, g: Generator) -> PartialType {
        self.generator = Some(g);
        self
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn is_finite(&self) -> bool {
        self.generator.is_none()
    }

    /// Explicit conditions plus generator batches `0..n`.
    pub fn fragment(&self, n: usize) -> Vec<Formula> {
        let mut out = self.conditions.clone();
        if let Some(Generator { f: Some(g), .. }) = &self.generator {
            for j in 0..n {
                out.extend(g(j));
            }
        }
        out
    }

    /// The first `k` conditions of the presentation, explicit ones first.
    pub fn enumerate(&self, k: usize) -> Vec<Formula> {
        let mut out: Vec<Formula> = self.conditions.iter().take(k).cloned().collect();
        if let Some(Generator { f: Some(g), .. }) = &self.generator {
            let mut j = 0;
            // stop after a run of empty batches
            let mut idle = 0;
            while out.len() < k && idle < 64 {
                let batch = g(j);
                if batch.is_empty() {
                    idle += 1;
                } else {
                    idle = 0;
                }
                out.extend(batch);
                j += 1;
            }
            out.truncate(k);
        }
        out
    }

    /// Check that every condition's free variables are declared.
    pub fn validate(&self, n: usize) -> Result<()> {
        let declared: Vec<u32> = self.vars.iter().map(|v| v.idx).collect();
        for f in self.fragment(n) {
            for v in f.free_vars() {
                if !declared.contains(&v) {
                    return Err(Error::Unbound(v));
                }
            }
        }
        Ok(())
    }

    /// Shift every variable index by `by`.
    pub fn shifted(&self, by: u32) -> PartialType {
        let map: BTreeMap<u32, u32> = self.vars.iter().map(|v| (v.idx, v.idx + by)).collect();
        let shift_all = move |f: &Formula| {
            let mut m = map.clone();
            for v in f.all_vars() {
                m.entry(v).or_insert(v + by);
            }
            f.rename(&m)
        };
        let generator = self.generator.clone().map(|g| match g.f {
            Some(inner) => {
                let s = shift_all.clone();
                Generator::new(g.desc.clone(), move |j| inner(j).iter().map(&s).collect())
            }
            None => g,
        });
        PartialType {
            vars: self.vars.iter().map(|v| Var { idx: v.idx + by, sort: v.sort.clone() }).collect(),
            conditions: self.conditions.iter().map(&shift_all).collect(),
            generator,
            label: self.label.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# type {}\n# vars", self.label);
        for v in &self.vars {
            s.push(' ');
            s.push_str(&v.to_string());
        }
        s.push('\n');
        if let Some(g) = &self.generator {
            s.push_str(&format!("# generator: {}\n", g.desc));
        }
        for c in &self.conditions {
            s.push_str(&c.to_string());
            s.push('\n');
        }
        s
    }

    /// Write explicit conditions together with generator batches `0..n`.
    pub fn fragment_text(&self, n: usize) -> String {
        let mut s = format!("# type {}\n# vars", self.label);
        for v in &self.vars {
            s.push(' ');
            s.push_str(&v.to_string());
        }
        s.push('\n');
        if let Some(g) = &self.generator {
            s.push_str(&format!("# fragment {n} of generator: {}\n", g.desc));
        }
        for c in self.fragment(n) {
            s.push_str(&c.to_string());
            s.push('\n');
        }
        s
    }

    /// Read the text format. A generator header is kept as an opaque description.
    pub fn from_text(text: &str) -> Result<PartialType> {
        let mut t = PartialType::empty("", Vec::new());
        let mut saw_vars = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(l) = rest.strip_prefix("type") {
                    t.label = l.trim().to_string();
                } else if let Some(vs) = rest.strip_prefix("vars") {
                    saw_vars = true;
                    for tok in vs.split_whitespace() {
                        match crate::formula::parse_term(tok)? {
                            Term::Var(v) => t.vars.push(v),
                            _ => return Err(Error::Parse(format!("line {}: '{tok}' is not a variable", lineno + 1))),
                        }
                    }
                } else if let Some(d) = rest.strip_prefix("generator:") {
                    t.generator = Some(Generator { desc: d.trim().to_string(), f: None });
                }
                continue;
            }
            let f = parse_formula(line).map_err(|e| match e {
                Error::Syntax { col, msg, .. } => Error::Syntax { line: lineno + 1, col, msg },
                other => other,
            })?;
            t.conditions.push(f);
        }
        if !saw_vars {
            let mut vs: Vec<u32> = t.conditions.iter().flat_map(|f| f.free_vars()).collect();
            vs.sort();
            vs.dedup();
            t.vars = vs.into_iter().map(Var::new).collect();
        }
        Ok(t)
    }
}

fn pair_vars(t: &PartialType, s: &PartialType) -> (PartialType, PartialType) {
    let t_top = t.vars.iter().map(|v| v.idx).chain(t.conditions.iter().flat_map(|f| f.all_vars())).max();
    let by = t_top.map(|m| m + 1).unwrap_or(0);
    (t.clone(), s.shifted(by))
}

fn or_step(phi: &[Formula], psi: &[Formula], n: usize) -> Formula {
    let mut parts = Vec::new();
    for xi in 0..n {
        if let Some(p) = phi.get(xi) {
            parts.push(p.clone());
        }
        if let Some(p) = psi.get(xi) {
            parts.push(p.clone());
        }
    }
    fmax(parts)
}

fn and_step(phi: &[Formula], psi: &[Formula], n: usize) -> Formula {
    let a: Vec<Formula> = phi.iter().take(n).cloned().collect();
    let b: Vec<Formula> = psi.iter().take(n).cloned().collect();
    fmin(vec![fmax(a), fmax(b)])
}

fn pairing(t: &PartialType, s: &PartialType, label: &str, or: bool) -> PartialType {
    let (t, s) = pair_vars(t, s);
    let vars: Vec<Var> = t.vars.iter().chain(s.vars.iter()).cloned().collect();
    let either_empty = t.is_finite() && t.conditions.is_empty() || s.is_finite() && s.conditions.is_empty();
    if !or && either_empty {
        return PartialType::empty(label, vars);
    }
    if t.is_finite() && s.is_finite() {
        let len = t.conditions.len().max(s.conditions.len());
        let conds = (1..=len)
            .map(|n| {
                if or {
                    or_step(&t.conditions, &s.conditions, n)
                } else {
                    and_step(&t.conditions, &s.conditions, n)
                }
            })
            .collect();
        return PartialType::new(label, vars, conds);
    }
    let desc = format!(
        "{}({}, {})",
        if or { "or" } else { "and" },
        t.generator.as_ref().map(|g| g.desc.clone()).unwrap_or_else(|| t.label.clone()),
        s.generator.as_ref().map(|g| g.desc.clone()).unwrap_or_else(|| s.label.clone())
    );
    let g = Generator::new(desc, move |j| {
        let phi = t.enumerate(j + 1);
        let psi = s.enumerate(j + 1);
        if phi.is_empty() && psi.is_empty() {
            return vec![];
        }
        vec![if or { or_step(&phi, &psi, j + 1) } else { and_step(&phi, &psi, j + 1) }]
    });
    PartialType::empty(label, vars).with_generator(g)
}

/// A tuple `(ā, b̄)` realizes the result iff `ā` realizes `t` and `b̄` realizes `s`.
pub fn type_or(t: &PartialType, s: &PartialType) -> PartialType {
    pairing(t, s, &format!("({})v({})", t.label, s.label), true)
}

/// A tuple `(ā, b̄)` realizes the result iff `ā` realizes `t` or `b̄` realizes `s`.
pub fn type_and(t: &PartialType, s: &PartialType) -> PartialType {
    pairing(t, s, &format!("({})^({})", t.label, s.label), false)
}

/// The fragment `t_n` of `t_ω` on `x_0..x_{n-1}`: `φ_j(x_k) ≤ 1/k` for
/// `j ≤ k < n`, `k ≥ 1`, and `d(x_j, x_{j+1}) ≤ 2^{-j}` for `j < n-1`.
pub fn omega_type(t: &PartialType, n: usize) -> Result<PartialType> {
    if t.arity() != 1 {
        return Err(Error::Invalid(format!("omega_type needs a 1-type, got arity {}", t.arity())));
    }
    let x = t.vars[0].idx;
    let sort = t.vars[0].sort.clone();
    let var = |k: usize| Var { idx: k as u32, sort: sort.clone() };
    let phis = t.enumerate(n);
    let mut conds = Vec::new();
    for k in 1..n {
        for phi in phis.iter().take(k + 1) {
            let sub = phi.substitute(&BTreeMap::from([(x, Term::Var(var(k)))]));
            conds.push(fmonus(sub, Formula::Const(q(1, k as i64))));
        }
    }
    for j in 0..n.saturating_sub(1) {
        conds.push(fmonus(dist(Term::Var(var(j)), Term::Var(var(j + 1))), Formula::Const(pow2_neg(j as u32))));
    }
    Ok(PartialType::new(&format!("{}_omega[{n}]", t.label), (0..n).map(var).collect(), conds))
}

/// A sequence of formulas sharing one modulus, with an optional lower bound
/// on every member beyond the listed ones.
#[derive(Clone, Debug)]
pub struct UniformSequence {
    pub modulus: Modulus,
    pub formulas: Vec<Formula>,
    pub vars: Vec<Var>,
    /// Further members exist beyond the listed ones.
    pub infinite: bool,
    /// Pointwise lower bound for every unlisted member.
    pub tail_lower: Option<Q>,
}

pub fn make_uniform(formulas: Vec<Formula>, modulus: Modulus, sig: &Signature) -> Result<UniformSequence> {
    let mut vars: Vec<u32> = Vec::new();
    for (i, f) in formulas.iter().enumerate() {
        let m = formula_modulus(f, sig)?;
        if !m.dominates(&modulus) {
            return Err(Error::ModulusViolation(format!("phi_{i} = {f} has modulus {m}, worse than {modulus}")));
        }
        vars.extend(f.free_vars());
    }
    vars.sort();
    vars.dedup();
    let sorts = formulas.first().map(|f| sig.infer_sorts(f)).transpose()?.unwrap_or_default();
    let vars = vars.into_iter().map(|v| Var { idx: v, sort: sorts.get(&v).cloned() }).collect();
    Ok(UniformSequence { modulus, formulas, vars, infinite: false, tail_lower: None })
}

impl UniformSequence {
    /// Declare further members, each bounded below by `b` pointwise.
    pub fn with_tail_lower(mut self, b: Q) -> UniformSequence {
        self.infinite = true;
        self.tail_lower = Some(b);
        self
    }

    /// Declare further members without any bound.
    pub fn unbounded_tail(mut self) -> UniformSequence {
        self.infinite = true;
        self.tail_lower = None;
        self
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    /// `t_n = {φ_i ≥ 2^{-n}}`, each written `2^{-n} ∸ φ_i = 0`.
    pub fn member(&self, n: u32) -> PartialType {
        let conds = self.formulas.iter().map(|f| fmonus(Formula::Const(pow2_neg(n)), f.clone())).collect();
        PartialType::new(&format!("t_{n}"), self.vars.clone(), conds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pf(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    #[test]
    fn or_of_singletons_is_max() {
        let t = PartialType::new("t", vec![Var::new(0)], vec![pf("P(x0)")]);
        let s = PartialType::new("s", vec![Var::new(0)], vec![pf("Q(x0)")]);
        let o = type_or(&t, &s);
        assert_eq!(o.conditions, vec![pf("max(P(x0), Q(x1))")]);
        assert_eq!(o.vars, vec![Var::new(0), Var::new(1)]);
    }

    #[test]
    fn and_of_singletons_is_min() {
        let t = PartialType::new("t", vec![Var::new(0)], vec![pf("P(x0)")]);
        let s = PartialType::new("s", vec![Var::new(0)], vec![pf("Q(x0)")]);
        assert_eq!(type_and(&t, &s).conditions, vec![pf("min(P(x0), Q(x1))")]);
    }

    #[test]
    fn empty_pairings_have_no_conditions() {
        let e = PartialType::empty("e", vec![Var::new(0)]);
        assert!(type_or(&e, &e).conditions.is_empty());
        let s = PartialType::new("s", vec![Var::new(0)], vec![pf("Q(x0)")]);
        assert!(type_and(&e, &s).conditions.is_empty());
    }

    #[test]
    fn omega_fragment_three() {
        let t = PartialType::new("t", vec![Var::new(0)], vec![pf("A(x0)"), pf("B(x0)"), pf("C(x0)")]);
        let f = omega_type(&t, 3).unwrap();
        let want = [
            "monus(A(x1), 1)",
            "monus(B(x1), 1)",
            "monus(A(x2), 1/2)",
            "monus(B(x2), 1/2)",
            "monus(C(x2), 1/2)",
            "monus(d(x0,x1), 1)",
            "monus(d(x1,x2), 1/2)",
        ];
        assert_eq!(f.conditions, want.iter().map(|s| pf(s)).collect::<Vec<_>>());
        assert!(omega_type(&t, 1).unwrap().conditions.is_empty());
    }

    #[test]
    fn text_round_trip() {
        let t = PartialType::new("demo", vec![Var::sorted(0, "D"), Var::sorted(1, "D")], vec![pf("d(x0,x1)"), pf("neg(P(x0))")]);
        let back = PartialType::from_text(&t.to_text()).unwrap();
        assert_eq!(back.vars, t.vars);
        assert_eq!(back.conditions, t.conditions);
        assert_eq!(back.label, "demo");
    }

    #[test]
    fn generator_fragments_grow() {
        let t = PartialType::empty("g", vec![Var::new(0)])
            .with_generator(Generator::new("cuts", |j| vec![Formula::Cut(j as u32 + 1, Box::new(pf("P(x0)")))]));
        assert_eq!(t.fragment(0).len(), 0);
        assert_eq!(t.fragment(3).len(), 3);
        assert_eq!(t.enumerate(2).len(), 2);
    }
}
