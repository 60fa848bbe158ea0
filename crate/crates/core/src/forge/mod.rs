//! Forcing with conditions `ψ(d̄_F) < ε` certified by a bank of finite structures.
//!
//! Constants `d_j` are written as the variables `x_j`. Every verdict here is
//! bank-relative: a refusal means no bank model certifies the condition, which
//! is weaker than inconsistency with a theory.

mod dense;
mod homogeneity;
mod run;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};

use crate::condition::{normalize_with, Condition};
use crate::error::{Error, Result};
use crate::formula::{fmax, Formula, Term, Var};
use crate::models::{build_model, ModelCtor};
use crate::q::{fmt_q, int, Q};
use crate::structure::{check_structure, Assignment, Compiled, FiniteStructure};

pub use dense::{meet_dense, MeetError, Met, meet_dense_with, parse_schedule, parse_spec, resolve_type_source, DenseSetSpec, MeetState};
pub use homogeneity::{
    cohen_shadow, compatible, homogeneity_experiment, permute, random_condition, refine_theory, relocate,
    Compatibility, HomogeneityReport, Permutation, Refinement,
};
pub use run::{build_generic, extract_premodel, replay, Budget, Failure, FailureKind, GenericRun, Premodel, ReplayReport, RunStep};

/// One conjunct `formula < eps`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Part {
    pub formula: Formula,
    pub eps: Q,
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} < {}", self.formula, fmt_q(&self.eps))
    }
}

/// A condition: a conjunction of parts over the constants `F`.
///
/// A single triple `(ψ, F, ε)` is the one-part case; [`ForcingCondition::single`]
/// folds the parts back into one triple with `ε = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ForcingCondition {
    pub parts: Vec<Part>,
    pub f: BTreeSet<u32>,
}

impl ForcingCondition {
    pub fn trivial() -> ForcingCondition {
        ForcingCondition::default()
    }

    /// `(ψ, F, ε)`. A non-positive `ε` is accepted and never certified.
    pub fn new(psi: Formula, f: impl IntoIterator<Item = u32>, eps: Q) -> Result<ForcingCondition> {
        let mut c = ForcingCondition { parts: Vec::new(), f: f.into_iter().collect() };
        c.conjoin(psi, eps)?;
        Ok(c)
    }

    /// Add a part; its free variables must already be in `F`.
    pub fn conjoin(&mut self, psi: Formula, eps: Q) -> Result<()> {
        let free = psi.free_vars();
        if let Some(v) = free.iter().find(|v| !self.f.contains(v)) {
            return Err(Error::Invalid(format!("x{v} in {psi} is not among the condition's constants")));
        }
        self.parts.push(Part { formula: psi, eps });
        Ok(())
    }

    /// Add a part, widening `F` by its free variables.
    pub fn conjoin_widen(&mut self, psi: Formula, eps: Q) {
        self.f.extend(psi.free_vars());
        self.parts.push(Part { formula: psi, eps });
    }

    pub fn and(&self, other: &ForcingCondition) -> ForcingCondition {
        let mut c = self.clone();
        c.f.extend(other.f.iter().copied());
        c.parts.extend(other.parts.iter().cloned());
        c
    }

    /// Smallest part threshold, 1 for the trivial condition.
    pub fn ambient_eps(&self) -> Q {
        self.parts.iter().map(|p| p.eps).min().unwrap_or_else(Q::one)
    }

    /// Lowest index outside `F`.
    pub fn fresh(&self) -> u32 {
        (0..).find(|j| !self.f.contains(j)).unwrap()
    }

    /// The equivalent triple `(max_i f_i(ψ_i), F, 1)` with `f_i` the normalizing clamp of each part.
    pub fn single(&self) -> (Formula, BTreeSet<u32>, Q) {
        let mut xs = Vec::new();
        for p in &self.parts {
            match normalize_with(&Condition::Open(p.formula.clone(), p.eps), p.eps / int(2)) {
                Condition::Open(g, _) => xs.push(g),
                _ => unreachable!("open conditions normalize to open conditions"),
            }
        }
        let psi = if xs.is_empty() { Formula::Const(Q::zero()) } else { fmax(xs) };
        (psi, self.f.clone(), Q::one())
    }

    /// Syntactic equality up to renaming of bound variables.
    pub fn same_as(&self, other: &ForcingCondition) -> bool {
        self.f == other.f
            && self.parts.len() == other.parts.len()
            && self
                .parts
                .iter()
                .zip(&other.parts)
                .all(|(a, b)| a.eps == b.eps && alpha_normal(&a.formula) == alpha_normal(&b.formula))
    }
}

impl fmt::Display for ForcingCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fs: Vec<String> = self.f.iter().map(|x| x.to_string()).collect();
        write!(f, "F={{{}}}", fs.join(","))?;
        if self.parts.is_empty() {
            return write!(f, " (trivial)");
        }
        for p in &self.parts {
            write!(f, "; {p}")?;
        }
        Ok(())
    }
}

/// Bound variables renamed in order of appearance, starting above every free index.
fn alpha_normal(f: &Formula) -> Formula {
    fn go(f: &Formula, next: &mut u32) -> Formula {
        match f {
            Formula::Quant(k, v, body) => {
                let n = *next;
                *next += 1;
                let body = body.substitute(&BTreeMap::from([(v.idx, Term::Var(Var { idx: n, sort: v.sort.clone() }))]));
                Formula::Quant(*k, Var { idx: n, sort: v.sort.clone() }, Box::new(go(&body, next)))
            }
            Formula::Max(xs) => Formula::Max(xs.iter().map(|x| go(x, next)).collect()),
            Formula::Min(xs) => Formula::Min(xs.iter().map(|x| go(x, next)).collect()),
            Formula::Neg(a) => Formula::Neg(Box::new(go(a, next))),
            Formula::Monus(a, b) => {
                let a = go(a, next);
                Formula::Monus(Box::new(a), Box::new(go(b, next)))
            }
            Formula::Cut(m, a) => Formula::Cut(*m, Box::new(go(a, next))),
            Formula::Clamp(a, b, x) => Formula::Clamp(*a, *b, Box::new(go(x, next))),
            _ => f.clone(),
        }
    }
    let mut next = f.free_vars().into_iter().max().map(|x| x + 1).unwrap_or(0);
    go(f, &mut next)
}

/// Capture-free renaming of free variables, keeping written sort annotations.
pub(crate) fn rename_free(f: &Formula, map: &BTreeMap<u32, u32>) -> Formula {
    let sorts: BTreeMap<u32, String> = f.written_sorts().into_iter().collect();
    let tmap: BTreeMap<u32, Term> = f
        .free_vars()
        .into_iter()
        .filter_map(|v| map.get(&v).map(|&w| (v, Term::Var(Var { idx: w, sort: sorts.get(&v).cloned() }))))
        .collect();
    f.substitute(&tmap)
}

/// One named structure of the bank, with the constructor that regenerates it when known.
#[derive(Clone, Debug)]
pub struct BankEntry {
    pub name: String,
    pub ctor: Option<ModelCtor>,
    pub structure: FiniteStructure,
}

/// The certifying structures, in declaration order.
#[derive(Clone, Debug)]
pub struct WitnessBank {
    pub entries: Vec<BankEntry>,
}

impl WitnessBank {
    /// Build from constructor strings such as `N(depth=3,branch=2,h=1)`.
    pub fn from_ctors(ctors: &[&str]) -> Result<WitnessBank> {
        let mut entries = Vec::new();
        for c in ctors {
            let ctor = ModelCtor::parse(c)?;
            let structure = build_model(&ctor)?;
            entries.push(BankEntry { name: ctor.to_string(), ctor: Some(ctor), structure });
        }
        WitnessBank::new(entries)
    }

    /// Parse `ctor; ctor; ...`.
    pub fn parse(src: &str) -> Result<WitnessBank> {
        let parts = crate::models::split_top(src, ';');
        let refs: Vec<&str> = parts.iter().map(|s| s.as_str()).filter(|s| !s.is_empty()).collect();
        WitnessBank::from_ctors(&refs)
    }

    pub fn from_structures(list: Vec<(String, FiniteStructure)>) -> Result<WitnessBank> {
        WitnessBank::new(list.into_iter().map(|(name, structure)| BankEntry { name, ctor: None, structure }).collect())
    }

    fn new(entries: Vec<BankEntry>) -> Result<WitnessBank> {
        if entries.is_empty() {
            return Err(Error::Invalid("a witness bank needs at least one structure".into()));
        }
        for e in &entries {
            let v = check_structure(&e.structure);
            if let Some(first) = v.first() {
                return Err(Error::Invalid(format!("bank structure {} fails its checks: {first:?}", e.name)));
            }
        }
        Ok(WitnessBank { entries })
    }

    /// The same bank with every constructor's `depth` raised by `extra`.
    pub fn deepened(&self, extra: usize) -> Result<WitnessBank> {
        let mut entries = Vec::new();
        for e in &self.entries {
            let Some(c) = &e.ctor else {
                entries.push(e.clone());
                continue;
            };
            let mut c = c.clone();
            let d = c.usize("depth", 0)?;
            c.params.insert("depth".into(), (d + extra).to_string());
            let structure = build_model(&c)?;
            entries.push(BankEntry { name: c.to_string(), ctor: Some(c), structure });
        }
        WitnessBank::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn model(&self, i: usize) -> &FiniteStructure {
        &self.entries[i].structure
    }
}

/// A certifying model and an assignment of the condition's constants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub model: usize,
    pub asg: Assignment,
}

impl Witness {
    /// `x_j=<point name>` for every assigned constant.
    pub fn describe(&self, bank: &WitnessBank, c: &ForcingCondition) -> Vec<(u32, String)> {
        let m = bank.model(self.model);
        let sorts = var_sorts(m, &c.parts.iter().map(|p| (p.formula.clone(), p.eps, true)).collect::<Vec<_>>())
            .unwrap_or_default();
        self.asg
            .iter()
            .map(|(v, p)| {
                let s = sorts.get(v).copied().unwrap_or(0);
                (*v, m.point_name(s, *p).to_string())
            })
            .collect()
    }
}

/// Result of a bounded search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Search<T> {
    Found(T),
    Refused,
    /// The node budget ran out before the search finished.
    Exhausted,
}

/// Default search budget in visited partial assignments.
pub const DEFAULT_NODES: u64 = 5_000_000;

/// A conjunct during search: formula, bound, and whether the bound is strict.
pub(crate) type Goal = (Formula, Q, bool);

fn var_sorts(m: &FiniteStructure, goals: &[Goal]) -> Result<BTreeMap<u32, usize>> {
    let mut out = BTreeMap::new();
    for (f, _, _) in goals {
        let c = Compiled::new(f, m)?;
        for v in &c.free {
            let s = c.sorts[v];
            if let Some(old) = out.insert(*v, s) {
                if old != s {
                    return Err(Error::Sort(format!("x{v} is used at two sorts")));
                }
            }
        }
    }
    Ok(out)
}

/// Conjunction of goals compiled against one model, ready for backtracking.
struct Prepared<'m> {
    goals: Vec<(Compiled<'m>, Q, bool)>,
    vars: Vec<u32>,
    sizes: Vec<usize>,
    /// Goals to test once `vars[..=k]` are assigned; index 0 holds closed goals.
    checks: Vec<Vec<usize>>,
    slots: usize,
}

impl<'m> Prepared<'m> {
    fn new(m: &'m FiniteStructure, goals: &[Goal]) -> Result<Prepared<'m>> {
        let sorts = var_sorts(m, goals)?;
        let vars: Vec<u32> = sorts.keys().copied().collect();
        let sizes = vars.iter().map(|v| m.sorts[sorts[v]].len()).collect();
        let mut compiled = Vec::new();
        let mut checks = vec![Vec::new(); vars.len() + 1];
        let mut slots = vars.iter().map(|&v| v as usize + 1).max().unwrap_or(0);
        for (i, (f, eps, strict)) in goals.iter().enumerate() {
            let c = Compiled::new(f, m)?;
            slots = slots.max(f.all_vars().into_iter().map(|v| v as usize + 1).max().unwrap_or(0));
            let at = c.free.iter().map(|v| vars.binary_search(v).unwrap() + 1).max().unwrap_or(0);
            checks[at].push(i);
            compiled.push((c, *eps, *strict));
        }
        Ok(Prepared { goals: compiled, vars, sizes, checks, slots })
    }

    fn ok_at(&self, level: usize, env: &mut Vec<usize>) -> bool {
        self.checks[level].iter().all(|&i| {
            let (c, eps, strict) = &self.goals[i];
            let v = c.eval_slots(env);
            if *strict {
                v < *eps
            } else {
                v <= *eps
            }
        })
    }

    /// Depth-first enumeration of satisfying assignments; `visit` returns `true` to stop.
    fn run(
        &self,
        hint: Option<&Assignment>,
        nodes: &mut u64,
        budget: u64,
        visit: &mut dyn FnMut(&Assignment) -> bool,
    ) -> Flow {
        let mut env = vec![0usize; self.slots];
        if !self.ok_at(0, &mut env) {
            return Flow::Done;
        }
        self.dfs(0, &mut env, hint, nodes, budget, visit)
    }

    fn dfs(
        &self,
        k: usize,
        env: &mut Vec<usize>,
        hint: Option<&Assignment>,
        nodes: &mut u64,
        budget: u64,
        visit: &mut dyn FnMut(&Assignment) -> bool,
    ) -> Flow {
        if k == self.vars.len() {
            let asg: Assignment = self.vars.iter().map(|&v| (v, env[v as usize])).collect();
            return if visit(&asg) { Flow::Stop } else { Flow::Done };
        }
        let v = self.vars[k];
        let n = self.sizes[k];
        let first = hint.and_then(|h| h.get(&v).copied()).filter(|&p| p < n);
        let order = first.into_iter().chain((0..n).filter(move |&p| Some(p) != first));
        for p in order {
            *nodes += 1;
            if *nodes > budget {
                return Flow::Budget;
            }
            env[v as usize] = p;
            if self.ok_at(k + 1, env) {
                match self.dfs(k + 1, env, hint, nodes, budget, visit) {
                    Flow::Done => {}
                    other => return other,
                }
            }
        }
        Flow::Done
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Flow {
    Done,
    Stop,
    Budget,
}

pub(crate) fn goals_of(c: &ForcingCondition) -> Vec<Goal> {
    c.parts.iter().map(|p| (p.formula.clone(), p.eps, true)).collect()
}

/// Search the bank for a witness of the goals. The hinted model is tried first
/// and the hinted values first within each variable; the rest follows declaration order.
pub(crate) fn search_goals(goals: &[Goal], bank: &WitnessBank, hint: Option<&Witness>, budget: u64) -> Search<Witness> {
    let mut order: Vec<usize> = (0..bank.len()).collect();
    if let Some(h) = hint {
        order.retain(|&i| i != h.model);
        order.insert(0, h.model);
    }
    let mut exhausted = false;
    for i in order {
        let h = hint.filter(|h| h.model == i).map(|h| &h.asg);
        match search_model(goals, bank, i, h, budget) {
            Search::Found(w) => return Search::Found(w),
            Search::Exhausted => exhausted = true,
            Search::Refused => {}
        }
    }
    if exhausted {
        Search::Exhausted
    } else {
        Search::Refused
    }
}

/// Search a single bank model.
pub(crate) fn search_model(goals: &[Goal], bank: &WitnessBank, i: usize, hint: Option<&Assignment>, budget: u64) -> Search<Witness> {
    let Ok(prep) = Prepared::new(bank.model(i), goals) else { return Search::Refused };
    let mut nodes = 0u64;
    let mut found = None;
    match prep.run(hint, &mut nodes, budget, &mut |a| {
        found = Some(a.clone());
        true
    }) {
        Flow::Stop => Search::Found(Witness { model: i, asg: found.unwrap() }),
        Flow::Budget => Search::Exhausted,
        Flow::Done => Search::Refused,
    }
}

/// Search for a model and an assignment with every part below its threshold.
pub fn cond_check(p: &ForcingCondition, bank: &WitnessBank) -> Search<Witness> {
    search_goals(&goals_of(p), bank, None, DEFAULT_NODES)
}

pub fn cond_check_hinted(p: &ForcingCondition, bank: &WitnessBank, hint: Option<&Witness>, budget: u64) -> Search<Witness> {
    search_goals(&goals_of(p), bank, hint, budget)
}

/// Exact re-verification of a recorded witness.
pub fn verify_witness(p: &ForcingCondition, bank: &WitnessBank, w: &Witness) -> Result<()> {
    if w.model >= bank.len() {
        return Err(Error::Invalid(format!("no bank model {}", w.model)));
    }
    let m = bank.model(w.model);
    for part in &p.parts {
        let v = Compiled::new(&part.formula, m)?.eval(&w.asg)?;
        if v >= part.eps {
            return Err(Error::Invalid(format!(
                "{} has value {} under the witness, not below {}",
                part.formula,
                fmt_q(&v),
                fmt_q(&part.eps)
            )));
        }
    }
    Ok(())
}

/// Outcome of a bank-relative entailment check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Entailment {
    Holds,
    /// `F^p` is not contained in `F^q`.
    Constants(u32),
    /// A bank model and an assignment satisfying `q` but not `p`.
    Counter(Witness),
    Undecided,
}

impl Entailment {
    pub fn holds(&self) -> bool {
        matches!(self, Entailment::Holds)
    }
}

/// Whether `q` extends `p` relative to the bank: `F^p ⊆ F^q` and every bank
/// assignment satisfying `q` satisfies `p`.
pub fn extends(p: &ForcingCondition, q: &ForcingCondition, bank: &WitnessBank) -> Entailment {
    extends_budget(p, q, bank, DEFAULT_NODES)
}

pub fn extends_budget(p: &ForcingCondition, q: &ForcingCondition, bank: &WitnessBank, budget: u64) -> Entailment {
    if let Some(v) = p.f.iter().find(|v| !q.f.contains(v)) {
        return Entailment::Constants(*v);
    }
    // Enumerate over the variables of both conditions so that p's free variables are bound.
    let mut goals = goals_of(q);
    for part in &p.parts {
        goals.push((part.formula.clone(), Q::one(), false));
    }
    for i in 0..bank.len() {
        let m = bank.model(i);
        let Ok(prep) = Prepared::new(m, &goals) else { continue };
        let Ok(pc) = p.parts.iter().map(|x| Compiled::new(&x.formula, m).map(|c| (c, x.eps))).collect::<Result<Vec<_>>>()
        else {
            continue;
        };
        let mut counter = None;
        let mut nodes = 0;
        let flow = prep.run(None, &mut nodes, budget, &mut |a| {
            let bad = pc.iter().any(|(c, eps)| c.eval(a).map(|v| v >= *eps).unwrap_or(true));
            if bad {
                counter = Some(a.clone());
            }
            bad
        });
        match flow {
            Flow::Stop => return Entailment::Counter(Witness { model: i, asg: counter.unwrap() }),
            Flow::Budget => return Entailment::Undecided,
            Flow::Done => {}
        }
    }
    Entailment::Holds
}
