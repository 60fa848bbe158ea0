//! Generic runs: folding dense sets over a schedule, transcripts, replay and pre-models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_traits::Zero;

pub use super::dense::FailureKind;
use super::dense::{meet_dense_with, parse_spec, DenseSetSpec, MeetState};
use super::{verify_witness, ForcingCondition, Part, Witness, WitnessBank, DEFAULT_NODES};
use crate::error::{Error, Result};
use crate::formula::parse_formula;
use crate::q::{fmt_q, parse_q, Q};
use crate::structure::{Compiled, FiniteStructure, Metric};
use crate::types::PartialType;

/// Limits on a run.
#[derive(Clone, Debug)]
pub struct Budget {
    pub max_steps: usize,
    /// Search nodes per bank query.
    pub nodes: u64,
    /// Smallest Henkin slack allowed.
    pub min_slack: Q,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_steps: 10_000, nodes: DEFAULT_NODES, min_slack: Q::new(1, 1 << 20) }
    }
}

#[derive(Clone, Debug)]
pub struct RunStep {
    pub spec: DenseSetSpec,
    pub added: Vec<Part>,
    pub model: usize,
    pub witness: Witness,
    /// `(x_j, point name)` for every assigned constant.
    pub names: Vec<(u32, String)>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    /// 1-based index of the failing step.
    pub step: usize,
    pub spec: String,
    pub kind: FailureKind,
    pub msg: String,
}

#[derive(Clone, Debug)]
pub struct GenericRun {
    pub bank_names: Vec<String>,
    pub steps: Vec<RunStep>,
    pub condition: ForcingCondition,
    pub failure: Option<Failure>,
}

impl GenericRun {
    pub fn complete(&self) -> bool {
        self.failure.is_none()
    }

    /// A text transcript that [`replay`] can re-verify.
    pub fn transcript(&self) -> String {
        let mut s = String::from("# forge transcript\n");
        for b in &self.bank_names {
            let _ = writeln!(s, "bank {b}");
        }
        for (i, st) in self.steps.iter().enumerate() {
            let _ = writeln!(s, "step {} {}", i + 1, st.spec);
            for p in &st.added {
                let _ = writeln!(s, "  part {} {}", fmt_q(&p.eps), p.formula);
            }
            let _ = writeln!(s, "  model {}", st.model);
            let asg: Vec<String> = st.names.iter().map(|(v, n)| format!("x{v}={n}")).collect();
            let _ = writeln!(s, "  assign {}", asg.join(" "));
            let _ = writeln!(s, "  note {}", st.note);
        }
        match &self.failure {
            None => {
                let _ = writeln!(s, "result complete {}", self.steps.len());
            }
            Some(f) => {
                let _ = writeln!(s, "result failed step {} ({}): {} :: {}", f.step, f.kind, f.spec, f.msg);
            }
        }
        s
    }
}

/// Fold `meet_dense` over the schedule from the trivial condition, re-verifying each step exactly.
pub fn build_generic(schedule: &[DenseSetSpec], bank: &WitnessBank, budget: &Budget) -> GenericRun {
    let mut run = GenericRun {
        bank_names: bank.entries.iter().map(|e| e.name.clone()).collect(),
        steps: Vec::new(),
        condition: ForcingCondition::trivial(),
        failure: None,
    };
    let mut st = MeetState { nodes: budget.nodes, min_slack: budget.min_slack, ..MeetState::default() };
    for (i, spec) in schedule.iter().enumerate() {
        let failure = |kind, msg: String| Failure { step: i + 1, spec: spec.to_string(), kind, msg };
        if i >= budget.max_steps {
            run.failure = Some(failure(FailureKind::Budget, format!("step limit {} reached", budget.max_steps)));
            return run;
        }
        match meet_dense_with(&run.condition, spec, bank, &mut st) {
            Ok(met) => {
                if let Err(e) = verify_witness(&met.q, bank, &met.witness) {
                    run.failure = Some(failure(FailureKind::Invalid, format!("re-verification failed: {e}")));
                    return run;
                }
                let names = met.witness.describe(bank, &met.q);
                run.steps.push(RunStep {
                    spec: spec.clone(),
                    added: met.added,
                    model: met.witness.model,
                    witness: met.witness,
                    names,
                    note: met.note,
                });
                run.condition = met.q;
            }
            Err(e) => {
                run.failure = Some(failure(e.kind, e.msg));
                return run;
            }
        }
    }
    run
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayReport {
    pub steps: usize,
    pub complete: bool,
}

/// Re-verify a transcript: rebuild the bank from its constructors (or use `bank`),
/// re-accumulate the parts and check every step's witness exactly.
pub fn replay(text: &str, bank: Option<&WitnessBank>, types: &dyn Fn(&str) -> Result<PartialType>) -> Result<ReplayReport> {
    let mut ctors = Vec::new();
    let mut cond = ForcingCondition::trivial();
    let mut built: Option<WitnessBank> = None;
    let mut steps = 0;
    let mut complete = false;
    let mut pending: Option<(usize, Vec<(u32, String)>)> = None;

    let mut lines = text.lines();
    let err = |n: usize, msg: String| Error::Parse(format!("transcript line {n}: {msg}"));
    let mut lineno = 0;
    let mut model: Option<usize> = None;
    let flush = |cond: &ForcingCondition, model: Option<usize>, pending: &mut Option<(usize, Vec<(u32, String)>)>, bank: &WitnessBank| -> Result<()> {
        if let Some((step, names)) = pending.take() {
            let mi = model.ok_or_else(|| Error::Parse(format!("step {step} has no model line")))?;
            if mi >= bank.len() {
                return Err(Error::Invalid(format!("step {step} names bank model {mi}, which does not exist")));
            }
            let m = bank.model(mi);
            let mut sorts = BTreeMap::new();
            for p in &cond.parts {
                let c = Compiled::new(&p.formula, m)?;
                sorts.extend(c.sorts.iter().filter(|(v, _)| c.free.contains(v)).map(|(v, s)| (*v, *s)));
            }
            let mut asg = BTreeMap::new();
            for (v, name) in names {
                let s = sorts.get(&v).copied().unwrap_or(0);
                let pt = m.sorts[s]
                    .lookup(&name)
                    .ok_or_else(|| Error::NotFound(format!("step {step}: point {name} in {}", m.sorts[s].name)))?;
                asg.insert(v, pt);
            }
            verify_witness(cond, bank, &Witness { model: mi, asg })
                .map_err(|e| Error::Invalid(format!("step {step} does not verify: {e}")))?;
        }
        Ok(())
    };
    while let Some(line) = lines.next() {
        lineno += 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (head, rest) = t.split_once(' ').unwrap_or((t, ""));
        match head {
            "bank" => ctors.push(rest.to_string()),
            "step" => {
                if built.is_none() {
                    built = Some(match bank {
                        Some(b) => b.clone(),
                        None => {
                            let refs: Vec<&str> = ctors.iter().map(|s| s.as_str()).collect();
                            WitnessBank::from_ctors(&refs)?
                        }
                    });
                }
                flush(&cond, model, &mut pending, built.as_ref().unwrap())?;
                let (n, spec) = rest.split_once(' ').ok_or_else(|| err(lineno, "step line lacks a spec".into()))?;
                let n: usize = n.parse().map_err(|_| err(lineno, "bad step number".into()))?;
                let spec = parse_spec(spec, types)?;
                if let DenseSetSpec::DecideValue { f, .. } | DenseSetSpec::HenkinWitness { f, .. } = &spec {
                    cond.f.extend(f.iter().copied());
                }
                match &spec {
                    DenseSetSpec::MetricDecide { i, j, .. } => cond.f.extend([*i, *j]),
                    DenseSetSpec::AxiomWitness { f, .. } | DenseSetSpec::OmitFragment { f, .. } => {
                        cond.f.extend(f.iter().copied())
                    }
                    _ => {}
                }
                steps = n;
                model = None;
                pending = Some((n, Vec::new()));
            }
            "part" => {
                let (eps, f) = rest.split_once(' ').ok_or_else(|| err(lineno, "part line lacks a formula".into()))?;
                let f = parse_formula(f)?;
                cond.conjoin_widen(f, parse_q(eps)?);
            }
            "model" => model = Some(rest.trim().parse().map_err(|_| err(lineno, "bad model index".into()))?),
            "assign" => {
                let names = &mut pending.as_mut().ok_or_else(|| err(lineno, "assign outside a step".into()))?.1;
                for tok in rest.split_whitespace() {
                    let (v, n) = tok.split_once('=').ok_or_else(|| err(lineno, format!("bad assignment '{tok}'")))?;
                    let v: u32 = v.trim_start_matches('x').parse().map_err(|_| err(lineno, format!("bad variable '{v}'")))?;
                    names.push((v, n.to_string()));
                }
            }
            "note" => {}
            "result" => complete = rest.starts_with("complete"),
            other => return Err(err(lineno, format!("unknown line kind '{other}'"))),
        }
    }
    if let Some(b) = &built {
        flush(&cond, model, &mut pending, b)?;
    }
    Ok(ReplayReport { steps, complete })
}

/// A finite table of decided distances with their radii.
#[derive(Clone, Debug)]
pub struct Premodel {
    /// Constant indices, in the order of the points of `structure`.
    pub points: Vec<u32>,
    /// Sort `D` with midpoint distances; the table need not be an exact metric.
    pub structure: FiniteStructure,
    /// Radius of each decided unordered pair `(i, j)`, `i < j`.
    pub radius: BTreeMap<(u32, u32), Q>,
    /// Largest `d(a,c) - d(a,b) - d(b,c) - (r_ab + r_bc + r_ac)` over all triples, floored at 0.
    pub triangle_excess: Q,
    /// Largest radius sum used above, for reporting `3·radius` bounds.
    pub max_radius: Q,
    /// Values decided by `decide` steps: `(formula, midpoint, radius)`.
    pub decided: Vec<(String, Q, Q)>,
}

impl Premodel {
    /// Whether the triangle inequality holds within the recorded radii.
    pub fn approx_metric(&self) -> bool {
        self.triangle_excess.is_zero()
    }
}

/// Read off the pre-model: points are the constants touched by metric steps,
/// each pair keeps its finest decision (the later one on ties).
pub fn extract_premodel(r: &GenericRun) -> Result<Premodel> {
    let mut scope = BTreeSet::new();
    let mut best: BTreeMap<(u32, u32), (Q, Q)> = BTreeMap::new();
    let mut decided = Vec::new();
    for st in &r.steps {
        match &st.spec {
            DenseSetSpec::MetricDecide { i, j, k } => {
                scope.insert(*i);
                scope.insert(*j);
                let key = (*i.min(j), *i.max(j));
                let rad = Q::new(1, *k as i64);
                let mid = midpoint(&st.note)?;
                if best.get(&key).map_or(true, |(_, r0)| rad <= *r0) {
                    best.insert(key, (mid, rad));
                }
            }
            DenseSetSpec::DecideValue { phi, eps, .. } => decided.push((phi.to_string(), midpoint(&st.note)?, *eps)),
            _ => {}
        }
    }
    let points: Vec<u32> = scope.into_iter().collect();
    let n = points.len();
    let mut table = vec![Q::zero(); n * n];
    let mut radius = BTreeMap::new();
    for a in 0..n {
        for b in a + 1..n {
            let key = (points[a], points[b]);
            let (mid, rad) = *best
                .get(&key)
                .ok_or_else(|| Error::NotFound(format!("distance d(d{}, d{}) was never decided", key.0, key.1)))?;
            table[a * n + b] = mid;
            table[b * n + a] = mid;
            radius.insert(key, rad);
        }
    }
    let rad = |a: usize, b: usize| -> Q {
        if a == b {
            Q::zero()
        } else {
            radius[&(points[a.min(b)], points[a.max(b)])]
        }
    };
    let mut excess = Q::zero();
    let mut max_radius = Q::zero();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let slack = rad(a, b) + rad(b, c) + rad(a, c);
                max_radius = max_radius.max(slack);
                let e = table[a * n + c] - table[a * n + b] - table[b * n + c] - slack;
                excess = excess.max(e);
            }
        }
    }
    let mut structure = FiniteStructure::new("premodel");
    structure.add_sort("D", points.iter().map(|p| format!("d{p}")).collect(), Metric::Dense(table));
    Ok(Premodel { points, structure, radius, triangle_excess: excess, max_radius, decided })
}

fn midpoint(note: &str) -> Result<Q> {
    let v = note
        .strip_prefix("r = ")
        .ok_or_else(|| Error::Invalid(format!("decision step lacks its value: {note}")))?;
    parse_q(v)
}
