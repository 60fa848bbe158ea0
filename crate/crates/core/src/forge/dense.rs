//! Dense sets of conditions and how to meet them inside a bank.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use num_integer::Integer;
use num_traits::{One, Zero};

use super::{goals_of, rename_free, search_goals, ForcingCondition, Goal, Part, Search, Witness, WitnessBank, DEFAULT_NODES};
use crate::error::{Error, Result};
use crate::formula::{dist, fabsdiff, fneg, parse_formula, Formula, Quant, Term, Var};
use crate::models::{build_type, TypeParams};
use crate::q::{fmt_q, int, parse_q, Q};
use crate::structure::Compiled;
use crate::types::PartialType;

/// A dense set to be met by one step of a generic run.
#[derive(Clone, Debug)]
pub enum DenseSetSpec {
    /// Decide `φ(d̄_F)` to within `ε`.
    DecideValue { phi: Formula, f: BTreeSet<u32>, eps: Q },
    /// Add a constant nearly attaining `inf_y φ(d̄_F, y)`.
    HenkinWitness { phi: Formula, f: BTreeSet<u32> },
    /// Decide `d(d_i, d_j)` to within `1/k`.
    MetricDecide { i: u32, j: u32, k: u32 },
    /// Instantiate the universal variables of a `sup…inf…` axiom at `d̄_F` and witness the rest within `1/k`.
    AxiomWitness { axiom: Formula, f: Vec<u32>, k: u32 },
    /// Push some fragment condition of a type to at least `ε` on `d̄_F`.
    OmitFragment { source: String, ty: PartialType, f: Vec<u32>, n: usize, eps: Q },
}

fn fmt_f<'a>(f: impl IntoIterator<Item = &'a u32>) -> String {
    f.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for DenseSetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenseSetSpec::DecideValue { phi, f: fs, eps } => write!(f, "decide {phi} F={} eps={}", fmt_f(fs), fmt_q(eps)),
            DenseSetSpec::HenkinWitness { phi, f: fs } => write!(f, "witness {phi} F={}", fmt_f(fs)),
            DenseSetSpec::MetricDecide { i, j, k } => write!(f, "metric {i} {j} {k}"),
            DenseSetSpec::AxiomWitness { axiom, f: fs, k } => write!(f, "axiom {axiom} F={} k={k}", fmt_f(fs)),
            DenseSetSpec::OmitFragment { source, f: fs, n, eps, .. } => {
                write!(f, "omit {source} F={} n={n} eps={}", fmt_f(fs), fmt_q(eps))
            }
        }
    }
}

/// Why a dense set could not be met.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureKind {
    /// No bank model certifies any extension of the required shape.
    BankTooSmall,
    /// The condition has bank witnesses but none pushes a fragment condition up.
    Blocked,
    /// Search or slack budget ran out.
    Budget,
    Invalid,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureKind::BankTooSmall => "bank too small",
            FailureKind::Blocked => "failed to block",
            FailureKind::Budget => "budget exhausted",
            FailureKind::Invalid => "invalid spec",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeetError {
    pub kind: FailureKind,
    pub msg: String,
}

fn fail<T>(kind: FailureKind, msg: impl Into<String>) -> std::result::Result<T, MeetError> {
    Err(MeetError { kind, msg: msg.into() })
}

/// Result of meeting one dense set.
#[derive(Clone, Debug)]
pub struct Met {
    pub q: ForcingCondition,
    pub added: Vec<Part>,
    pub witness: Witness,
    pub note: String,
}

/// State carried between steps of a run.
#[derive(Clone, Debug)]
pub struct MeetState {
    pub hint: Option<Witness>,
    /// Visits per Henkin formula, for the halving slack.
    pub revisits: BTreeMap<String, u32>,
    pub nodes: u64,
    /// Smallest slack a Henkin step may use.
    pub min_slack: Q,
}

impl Default for MeetState {
    fn default() -> Self {
        MeetState { hint: None, revisits: BTreeMap::new(), nodes: DEFAULT_NODES, min_slack: Q::new(1, 1 << 20) }
    }
}

/// Meet `s` from `p` with a fresh state.
pub fn meet_dense(p: &ForcingCondition, s: &DenseSetSpec, bank: &WitnessBank) -> std::result::Result<Met, MeetError> {
    meet_dense_with(p, s, bank, &mut MeetState::default())
}

pub fn meet_dense_with(
    p: &ForcingCondition,
    s: &DenseSetSpec,
    bank: &WitnessBank,
    st: &mut MeetState,
) -> std::result::Result<Met, MeetError> {
    let met = match s {
        DenseSetSpec::DecideValue { phi, f, eps } => decide(p, phi, f, *eps, bank, st)?,
        DenseSetSpec::MetricDecide { i, j, k } => {
            if *k == 0 {
                return fail(FailureKind::Invalid, "metric precision k must be positive");
            }
            let phi = dist(Term::var(*i), Term::var(*j));
            decide(p, &phi, &BTreeSet::from([*i, *j]), Q::new(1, *k as i64), bank, st)?
        }
        DenseSetSpec::HenkinWitness { phi, f } => henkin(p, phi, f, bank, st)?,
        DenseSetSpec::AxiomWitness { axiom, f, k } => axiom_witness(p, axiom, f, *k, bank, st)?,
        DenseSetSpec::OmitFragment { ty, f, n, eps, .. } => omit(p, ty, f, *n, *eps, bank, st)?,
    };
    st.hint = Some(met.witness.clone());
    Ok(met)
}

fn widened(p: &ForcingCondition, f: impl IntoIterator<Item = u32>, phi: &Formula) -> std::result::Result<ForcingCondition, MeetError> {
    let mut base = p.clone();
    let f: BTreeSet<u32> = f.into_iter().collect();
    if let Some(v) = phi.free_vars().iter().find(|v| !f.contains(v)) {
        return fail(FailureKind::Invalid, format!("x{v} in {phi} is not listed in F"));
    }
    base.f.extend(f);
    Ok(base)
}

fn search(goals: &[Goal], bank: &WitnessBank, st: &MeetState) -> std::result::Result<Option<Witness>, MeetError> {
    match search_goals(goals, bank, st.hint.as_ref(), st.nodes) {
        Search::Found(w) => Ok(Some(w)),
        Search::Refused => Ok(None),
        Search::Exhausted => fail(FailureKind::Budget, format!("search exceeded {} nodes", st.nodes)),
    }
}

/// Always-true goal that makes the search bind the formula's free variables.
fn binder(phi: &Formula) -> Goal {
    (phi.clone(), Q::one(), false)
}

fn require_witness(base: &ForcingCondition, extra: &[Goal], bank: &WitnessBank, st: &MeetState) -> std::result::Result<Witness, MeetError> {
    let mut goals = goals_of(base);
    goals.extend_from_slice(extra);
    match search(&goals, bank, st)? {
        Some(w) => Ok(w),
        None => fail(FailureKind::BankTooSmall, format!("no bank model certifies {base}")),
    }
}

/// Rationals of `[0,1]` by denominator, then numerator.
pub(crate) fn grid(max_den: i64) -> impl Iterator<Item = Q> {
    (1..=max_den).flat_map(|d| (0..=d).filter(move |n| n.gcd(&d) == 1).map(move |n| Q::new(n, d)))
}

fn decide(
    p: &ForcingCondition,
    phi: &Formula,
    f: &BTreeSet<u32>,
    eps: Q,
    bank: &WitnessBank,
    st: &MeetState,
) -> std::result::Result<Met, MeetError> {
    if eps <= Q::zero() {
        return fail(FailureKind::Invalid, "decision precision must be positive");
    }
    let base = widened(p, f.iter().copied(), phi)?;
    require_witness(&base, &[binder(phi)], bank, st)?;
    // Every value in [0,1] lies within ε of a grid point with denominator ≥ 1/ε.
    let max_den = (Q::one() / eps).ceil().to_integer() + 1;
    for r in grid(max_den) {
        let part = Part { formula: fabsdiff(phi.clone(), Formula::Const(r)), eps };
        let mut goals = goals_of(&base);
        goals.push((part.formula.clone(), eps, true));
        if let Some(w) = search(&goals, bank, st)? {
            let mut q = base.clone();
            q.parts.push(part.clone());
            return Ok(Met { q, added: vec![part], witness: w, note: format!("r = {}", fmt_q(&r)) });
        }
    }
    fail(FailureKind::BankTooSmall, format!("no grid value within {} of {phi} has a bank witness", fmt_q(&eps)))
}

fn henkin(
    p: &ForcingCondition,
    phi: &Formula,
    f: &BTreeSet<u32>,
    bank: &WitnessBank,
    st: &mut MeetState,
) -> std::result::Result<Met, MeetError> {
    let Formula::Quant(Quant::Inf, y, body) = phi else {
        return fail(FailureKind::Invalid, format!("a Henkin formula must start with inf: {phi}"));
    };
    let base = widened(p, f.iter().copied(), phi)?;
    let hint = require_witness(&base, &[binder(phi)], bank, st)?;
    let m = bank.model(hint.model);
    let c = Compiled::new(phi, m).map_err(|e| MeetError { kind: FailureKind::Invalid, msg: e.to_string() })?;
    let v0 = c.eval(&hint.asg).map_err(|e| MeetError { kind: FailureKind::Invalid, msg: e.to_string() })?;

    let key = format!("{phi} F={}", fmt_f(f));
    let visits = st.revisits.entry(key).or_insert(0);
    let slack = base.ambient_eps() / int(2) / int(1i64 << (*visits).min(60));
    *visits += 1;
    if slack < st.min_slack {
        return fail(FailureKind::Budget, format!("Henkin slack {} fell below the minimum", fmt_q(&slack)));
    }

    let j = base.fresh();
    let inst = body.substitute(&BTreeMap::from([(y.idx, Term::Var(Var { idx: j, sort: y.sort.clone() }))]));
    let bound = v0 + slack;
    let part = Part { formula: inst, eps: bound };

    // Seed the witness with a point attaining the infimum in the hinted model.
    let mut q = base.clone();
    q.f.insert(j);
    q.parts.push(part.clone());
    let ci = Compiled::new(&part.formula, m).map_err(|e| MeetError { kind: FailureKind::Invalid, msg: e.to_string() })?;
    let sort = ci.sort_of(j).unwrap_or(0);
    let mut seeded = hint.clone();
    let mut best = None;
    for pt in 0..m.sorts[sort].len() {
        let mut a = hint.asg.clone();
        a.insert(j, pt);
        if let Ok(v) = ci.eval(&a) {
            if best.map_or(true, |(bv, _)| v < bv) {
                best = Some((v, pt));
            }
        }
    }
    if let Some((_, pt)) = best {
        seeded.asg.insert(j, pt);
    }
    let saved = st.hint.replace(seeded);
    let found = search(&goals_of(&q), bank, st);
    st.hint = saved;
    match found? {
        Some(w) => Ok(Met {
            q,
            added: vec![part],
            witness: w,
            note: format!("d{j} witnesses value {} with slack {}", fmt_q(&v0), fmt_q(&slack)),
        }),
        None => fail(FailureKind::BankTooSmall, format!("no witness for {phi} below {}", fmt_q(&bound))),
    }
}

fn axiom_witness(
    p: &ForcingCondition,
    axiom: &Formula,
    f: &[u32],
    k: u32,
    bank: &WitnessBank,
    st: &MeetState,
) -> std::result::Result<Met, MeetError> {
    if k == 0 {
        return fail(FailureKind::Invalid, "axiom precision k must be positive");
    }
    let mut sups = Vec::new();
    let mut cur = axiom;
    while let Formula::Quant(Quant::Sup, v, b) = cur {
        sups.push(v.clone());
        cur = b;
    }
    let mut infs = Vec::new();
    while let Formula::Quant(Quant::Inf, v, b) = cur {
        infs.push(v.clone());
        cur = b;
    }
    if sups.len() != f.len() {
        return fail(
            FailureKind::Invalid,
            format!("axiom has {} universal variables but F lists {}", sups.len(), f.len()),
        );
    }
    if !axiom.is_sentence() {
        return fail(FailureKind::Invalid, format!("axiom {axiom} is not closed"));
    }
    let mut base = p.clone();
    base.f.extend(f.iter().copied());
    let mut map = BTreeMap::new();
    for (v, &c) in sups.iter().zip(f) {
        map.insert(v.idx, Term::Var(Var { idx: c, sort: v.sort.clone() }));
    }
    let mut q = base.clone();
    let mut fresh = Vec::new();
    for v in &infs {
        let j = q.fresh();
        q.f.insert(j);
        fresh.push(j);
        map.insert(v.idx, Term::Var(Var { idx: j, sort: v.sort.clone() }));
    }
    let inst = cur.substitute(&map);
    let part = Part { formula: inst, eps: Q::new(1, k as i64) };
    q.parts.push(part.clone());
    match search(&goals_of(&q), bank, st)? {
        Some(w) => Ok(Met {
            q,
            added: vec![part],
            witness: w,
            note: format!("instance witnessed by {}", fresh.iter().map(|j| format!("d{j}")).collect::<Vec<_>>().join(",")),
        }),
        None => fail(FailureKind::BankTooSmall, format!("no bank instance of {axiom} within 1/{k}")),
    }
}

fn strip_neg(f: Formula) -> Formula {
    match f {
        Formula::Neg(inner) => *inner,
        other => fneg(other),
    }
}

fn omit(
    p: &ForcingCondition,
    ty: &PartialType,
    f: &[u32],
    n: usize,
    eps: Q,
    bank: &WitnessBank,
    st: &MeetState,
) -> std::result::Result<Met, MeetError> {
    if eps <= Q::zero() {
        return fail(FailureKind::Invalid, "omission threshold must be positive");
    }
    if ty.arity() != f.len() {
        return fail(FailureKind::Invalid, format!("type has arity {} but F lists {}", ty.arity(), f.len()));
    }
    let map: BTreeMap<u32, u32> = ty.vars.iter().map(|v| v.idx).zip(f.iter().copied()).collect();
    let mut base = p.clone();
    base.f.extend(f.iter().copied());
    let conds: Vec<Formula> = ty.fragment(n).iter().map(|c| rename_free(c, &map)).collect();
    let binders: Vec<Goal> = conds.iter().map(binder).collect();
    require_witness(&base, &binders, bank, st)?;
    for (i, c) in conds.iter().enumerate() {
        // c ≥ ε, i.e. ¬c ≤ 1 - ε
        let mut goals = goals_of(&base);
        goals.push((fneg(c.clone()), Q::one() - eps, false));
        if let Some(w) = search(&goals, bank, st)? {
            let part = Part { formula: strip_neg(c.clone()), eps: Q::one() };
            let mut q = base.clone();
            q.parts.push(part.clone());
            return Ok(Met { q, added: vec![part], witness: w, note: format!("blocked fragment condition {i}: {c}") });
        }
    }
    fail(
        FailureKind::Blocked,
        format!("every bank witness keeps all {} fragment conditions below {}", conds.len(), fmt_q(&eps)),
    )
}

/// A type source: a file in the type text format, or a built-in kind written `kind` or `kind:m`.
pub fn resolve_type_source(src: &str, base: Option<&Path>) -> Result<PartialType> {
    let path = match base {
        Some(b) => b.join(src),
        None => Path::new(src).to_path_buf(),
    };
    if path.is_file() {
        return PartialType::from_text(&std::fs::read_to_string(&path)?);
    }
    let (kind, m) = match src.split_once(':') {
        Some((k, m)) => (k, m.parse().map_err(|_| Error::Parse(format!("bad level in type source '{src}'")))?),
        None => (src, 1),
    };
    build_type(kind, &TypeParams { m, ..TypeParams::default() })
}

fn parse_list(s: &str) -> Result<Vec<u32>> {
    let s = s.trim().trim_start_matches(['<', '{', '(']).trim_end_matches(['>', '}', ')']);
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.trim_start_matches(['d', 'x']).parse().map_err(|_| Error::Parse(format!("bad constant index '{x}'"))))
        .collect()
}

/// Parse one schedule line.
pub fn parse_spec(line: &str, types: &dyn Fn(&str) -> Result<PartialType>) -> Result<DenseSetSpec> {
    let line = line.trim();
    let (verb, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let mut words: Vec<&str> = rest.split_whitespace().collect();
    let mut keys: BTreeMap<&str, &str> = BTreeMap::new();
    while let Some(last) = words.last() {
        match last.split_once('=') {
            Some((k, v)) if ["F", "eps", "k", "n"].contains(&k) => {
                keys.insert(k, v);
                words.pop();
            }
            _ => break,
        }
    }
    let body = words.join(" ");
    let key = |k: &str| keys.get(k).copied().ok_or_else(|| Error::Parse(format!("'{verb}' line lacks {k}=: {line}")));
    let nat = |k: &str| -> Result<u32> { key(k)?.parse().map_err(|_| Error::Parse(format!("{k} must be a natural number"))) };
    Ok(match verb {
        "decide" => DenseSetSpec::DecideValue {
            phi: parse_formula(&body)?,
            f: parse_list(key("F")?)?.into_iter().collect(),
            eps: parse_q(key("eps")?)?,
        },
        "witness" => DenseSetSpec::HenkinWitness {
            phi: parse_formula(&body)?,
            f: parse_list(keys.get("F").copied().unwrap_or(""))?.into_iter().collect(),
        },
        "metric" => {
            let xs: Vec<u32> = body
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| Error::Parse(format!("metric expects three naturals: {line}"))))
                .collect::<Result<_>>()?;
            let [i, j, k] = xs[..] else {
                return Err(Error::Parse(format!("metric expects three naturals: {line}")));
            };
            DenseSetSpec::MetricDecide { i, j, k }
        }
        "axiom" => DenseSetSpec::AxiomWitness {
            axiom: parse_formula(&body)?,
            f: parse_list(keys.get("F").copied().unwrap_or(""))?,
            k: nat("k")?,
        },
        "omit" => DenseSetSpec::OmitFragment {
            ty: types(&body)?,
            source: body,
            f: parse_list(key("F")?)?,
            n: nat("n")? as usize,
            eps: parse_q(key("eps")?)?,
        },
        other => return Err(Error::Parse(format!("unknown schedule verb '{other}'"))),
    })
}

/// One spec per line; blank lines and `#` comments are skipped.
pub fn parse_schedule(text: &str, types: &dyn Fn(&str) -> Result<PartialType>) -> Result<Vec<DenseSetSpec>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| parse_spec(l, types))
        .collect()
}
