//! Renaming constants, compatibility of conditions, the homogeneity experiment,
//! interval refinement of sentence values and the discretized condition family.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use super::{
    cond_check, extends, goals_of, rename_free, search_model, ForcingCondition, Part, Search, Witness, WitnessBank,
    DEFAULT_NODES,
};
use crate::error::{Error, Result};
use crate::formula::{dist, fabsdiff, fcut, fneg, Formula, Term};
use crate::q::{fmt_q, int, Q};
use crate::structure::eval;

/// A bijection of the naturals moving finitely many points.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Permutation {
    map: BTreeMap<u32, u32>,
}

impl Permutation {
    pub fn identity() -> Permutation {
        Permutation::default()
    }

    /// From explicit `i ↦ h(i)` pairs; the moved points must be permuted among themselves.
    pub fn new(pairs: impl IntoIterator<Item = (u32, u32)>) -> Result<Permutation> {
        let map: BTreeMap<u32, u32> = pairs.into_iter().filter(|(a, b)| a != b).collect();
        let dom: BTreeSet<u32> = map.keys().copied().collect();
        let img: BTreeSet<u32> = map.values().copied().collect();
        if dom != img {
            return Err(Error::Invalid("pairs do not describe a bijection with finite support".into()));
        }
        Ok(Permutation { map })
    }

    pub fn swap(a: u32, b: u32) -> Permutation {
        Permutation::new([(a, b), (b, a)]).unwrap()
    }

    /// A uniformly random permutation of `0..n`.
    pub fn random<R: Rng>(rng: &mut R, n: u32) -> Permutation {
        let mut img: Vec<u32> = (0..n).collect();
        img.shuffle(rng);
        Permutation::new((0..n).zip(img)).unwrap()
    }

    pub fn apply(&self, i: u32) -> u32 {
        *self.map.get(&i).unwrap_or(&i)
    }

    pub fn inverse(&self) -> Permutation {
        Permutation { map: self.map.iter().map(|(a, b)| (*b, *a)).collect() }
    }

    pub fn support(&self) -> BTreeSet<u32> {
        self.map.keys().copied().collect()
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Permutation) -> Permutation {
        let pts: BTreeSet<u32> = self.support().union(&other.support()).copied().collect();
        Permutation::new(pts.into_iter().map(|i| (i, self.apply(other.apply(i))))).unwrap()
    }
}

/// `(ψ(x̄), F, ε) ↦ (ψ(h x̄), h(F), ε)`.
pub fn permute(h: &Permutation, p: &ForcingCondition) -> ForcingCondition {
    let map: BTreeMap<u32, u32> = p.f.iter().map(|&i| (i, h.apply(i))).collect();
    ForcingCondition {
        parts: p.parts.iter().map(|x| Part { formula: rename_free(&x.formula, &map), eps: x.eps }).collect(),
        f: p.f.iter().map(|&i| h.apply(i)).collect(),
    }
}

/// Swaps moving every constant shared by `fq` and `fp` to the lowest index outside both.
pub fn relocate(fp: &BTreeSet<u32>, fq: &BTreeSet<u32>) -> Permutation {
    let used: BTreeSet<u32> = fp.union(fq).copied().collect();
    let mut free = (0..).filter(|j| !used.contains(j));
    let mut pairs = Vec::new();
    for &i in fp.intersection(fq) {
        let t = free.next().unwrap();
        pairs.push((i, t));
        pairs.push((t, i));
    }
    Permutation::new(pairs).unwrap()
}

#[derive(Clone, Debug)]
pub struct Compatibility {
    /// The common extension and its witness, if found.
    pub common: Option<(ForcingCondition, Witness)>,
    pub evidence: String,
}

impl Compatibility {
    pub fn compatible(&self) -> bool {
        self.common.is_some()
    }
}

/// Look for a bank-certified common extension: the conjunction on the union of constants.
/// With disjoint constants, witnesses of each side found in one model are merged.
pub fn compatible(p: &ForcingCondition, q: &ForcingCondition, bank: &WitnessBank) -> Compatibility {
    let both = p.and(q);
    if p.f.is_disjoint(&q.f) {
        for i in 0..bank.len() {
            let (Search::Found(a), Search::Found(b)) =
                (search_model(&goals_of(p), bank, i, None, DEFAULT_NODES), search_model(&goals_of(q), bank, i, None, DEFAULT_NODES))
            else {
                continue;
            };
            let mut asg = a.asg;
            asg.extend(b.asg);
            let w = Witness { model: i, asg };
            return Compatibility {
                common: Some((both, w)),
                evidence: format!("both sides certified in {}; witnesses merged", bank.entries[i].name),
            };
        }
    }
    match super::search_goals(&goals_of(&both), bank, None, DEFAULT_NODES) {
        Search::Found(w) => {
            let name = bank.entries[w.model].name.clone();
            Compatibility { common: Some((both, w)), evidence: format!("joint witness in {name}") }
        }
        Search::Refused => Compatibility {
            common: None,
            evidence: format!("exhaustive scan of {} bank models found no joint witness", bank.len()),
        },
        Search::Exhausted => Compatibility { common: None, evidence: "search budget exhausted".into() },
    }
}

/// A random condition over the given constants, built from distance templates
/// (`f1` is used when `unary` is set).
pub fn random_condition<R: Rng>(rng: &mut R, consts: &[u32], unary: bool) -> ForcingCondition {
    let eps = [Q::new(1, 4), Q::new(1, 3), Q::new(1, 2), Q::new(3, 4), Q::one()];
    let vals = [Q::zero(), Q::new(1, 4), Q::new(1, 3), Q::new(1, 2), Q::one()];
    let mut c = ForcingCondition::trivial();
    for _ in 0..rng.gen_range(1..=2) {
        let i = *consts.choose(rng).unwrap();
        let j = *consts.choose(rng).unwrap();
        let d = dist(Term::var(i), Term::var(j));
        let templates = if unary { 4 } else { 3 };
        let f = match rng.gen_range(0..templates) {
            0 => d,
            1 => fneg(d),
            2 => fabsdiff(d, Formula::Const(*vals.choose(rng).unwrap())),
            _ => dist(Term::app("f1", vec![Term::var(i)]), Term::var(j)),
        };
        c.conjoin_widen(f, *eps.choose(rng).unwrap());
    }
    c
}

#[derive(Clone, Debug, Default)]
pub struct HomogeneityReport {
    pub pairs: usize,
    pub successes: usize,
    /// Pairs whose two sides were both certified in one bank model.
    pub common_model: usize,
    pub failures: Vec<String>,
}

/// Draw `pairs` bank-certified condition pairs, relocate the second off the
/// first and test compatibility.
pub fn homogeneity_experiment(bank: &WitnessBank, pairs: usize, seed: u64) -> HomogeneityReport {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let consts = [0, 1, 2, 3];
    let mut rep = HomogeneityReport::default();
    let certified = |rng: &mut rand::rngs::StdRng| loop {
        let c = random_condition(rng, &consts, true);
        if let Search::Found(w) = cond_check(&c, bank) {
            return (c, w);
        }
    };
    while rep.pairs < pairs {
        let (p, wp) = certified(&mut rng);
        let (q, wq) = certified(&mut rng);
        rep.pairs += 1;
        let h = relocate(&p.f, &q.f);
        let hq = permute(&h, &q);
        let shared = (0..bank.len()).any(|i| {
            matches!(search_model(&goals_of(&p), bank, i, None, DEFAULT_NODES), Search::Found(_))
                && matches!(search_model(&goals_of(&q), bank, i, None, DEFAULT_NODES), Search::Found(_))
        });
        if shared {
            rep.common_model += 1;
        }
        let c = compatible(&p, &hq, bank);
        if c.compatible() {
            rep.successes += 1;
        } else {
            rep.failures.push(format!(
                "p = {p} (model {}), h(q) = {hq} (model {}): {}",
                wp.model, wq.model, c.evidence
            ));
        }
    }
    rep
}

#[derive(Clone, Debug)]
pub struct Refinement {
    /// `table[n][k]`: closed interval for sentence `k` after `n` halvings.
    pub table: Vec<Vec<(Q, Q)>>,
    /// Bank models consistent with the last row.
    pub survivors: Vec<usize>,
    pub log: Vec<String>,
}

/// Halve an interval for each sentence in turn, keeping the lower half when some
/// surviving bank model's value lies in it, and the upper half otherwise.
pub fn refine_theory(
    thetas: &[Formula],
    bank: &WitnessBank,
    steps: usize,
    side: Option<&dyn Fn(usize, &crate::structure::FiniteStructure) -> bool>,
) -> Result<Refinement> {
    for t in thetas {
        if !t.is_sentence() {
            return Err(Error::Invalid(format!("{t} is not closed")));
        }
    }
    let mut survivors: Vec<usize> = (0..bank.len()).filter(|&i| side.map_or(true, |f| f(i, bank.model(i)))).collect();
    if survivors.is_empty() {
        return Err(Error::NotFound("no bank model passes the side condition".into()));
    }
    let mut values: BTreeMap<usize, Vec<Q>> = BTreeMap::new();
    for &i in &survivors {
        let v = thetas.iter().map(|t| eval(t, bank.model(i), &BTreeMap::new())).collect::<Result<Vec<_>>>()?;
        values.insert(i, v);
    }
    let mut table = vec![vec![(Q::zero(), Q::one()); thetas.len()]];
    let mut log = Vec::new();
    for n in 1..=steps {
        let mut row = Vec::new();
        for k in 0..thetas.len() {
            let (a, b) = table[n - 1][k];
            let mid = (a + b) / int(2);
            let halves = [(a, mid), (mid, b)];
            let inside = |(lo, hi): (Q, Q)| -> Vec<usize> {
                survivors.iter().copied().filter(|i| values[i][k] >= lo && values[i][k] <= hi).collect()
            };
            let lower = inside(halves[0]);
            let upper = inside(halves[1]);
            let (chosen, keep) = if !lower.is_empty() { (halves[0], lower) } else { (halves[1], upper.clone()) };
            if keep.is_empty() {
                return Err(Error::NotFound(format!("no bank model survives step {n} for sentence {k}")));
            }
            if chosen == halves[0] && upper.iter().any(|i| !keep.contains(i)) {
                log.push(format!(
                    "step {n}, sentence {k}: kept [{}, {}]; dropped models {:?}",
                    fmt_q(&chosen.0),
                    fmt_q(&chosen.1),
                    upper.iter().filter(|i| !keep.contains(i)).collect::<Vec<_>>()
                ));
            }
            survivors = keep;
            row.push(chosen);
        }
        table.push(row);
    }
    Ok(Refinement { table, survivors, log })
}

/// A member of the family `(cut_m(ψ), F, 1/n)`, with `ψ` the single normalized
/// form of `p`, that extends `p` and keeps `p`'s witness. The smallest threshold
/// `1/m + 1/n` above the witness value is chosen, with `m, n ≤ 32`.
pub fn cohen_shadow(p: &ForcingCondition, bank: &WitnessBank) -> Option<(ForcingCondition, u32, u32)> {
    let Search::Found(w) = cond_check(p, bank) else { return None };
    let (psi, f, _) = p.single();
    let v = eval(&psi, bank.model(w.model), &w.asg).ok()?;
    let mut best: Option<(Q, u32, u32)> = None;
    for n in 2..=32u32 {
        for m in 2..=32u32 {
            let t = Q::new(1, m as i64) + Q::new(1, n as i64);
            if t <= Q::one() && v < t && best.map_or(true, |(b, _, _)| t < b) {
                best = Some((t, m, n));
            }
        }
    }
    let (_, m, n) = best?;
    let q = ForcingCondition::new(fcut(m, psi), f, Q::new(1, n as i64)).ok()?;
    debug_assert!(extends(p, &q, bank).holds());
    Some((q, m, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;

    fn bank() -> WitnessBank {
        WitnessBank::from_ctors(&["N(depth=2,branch=2,h=1)", "N(depth=1,branch=3,h=1)"]).unwrap()
    }

    #[test]
    fn permutation_examples() {
        let p = ForcingCondition::new(dist(Term::var(0), Term::var(1)), [0, 1], Q::new(1, 2)).unwrap();
        assert_eq!(permute(&Permutation::identity(), &p), p);
        let h = Permutation::swap(1, 5);
        let hp = permute(&h, &p);
        assert_eq!(hp.f, BTreeSet::from([0, 5]));
        assert_eq!(hp.parts[0].formula, dist(Term::var(0), Term::var(5)));
        assert!(permute(&h, &permute(&h.inverse(), &p)).same_as(&p));
        assert!(Permutation::new([(0, 1)]).is_err());
    }

    #[test]
    fn permutation_avoids_capture() {
        let p = ForcingCondition::new(parse_formula("inf x5 . d(x0,x5)").unwrap(), [0], Q::one()).unwrap();
        let hp = permute(&Permutation::swap(0, 5), &p);
        assert_eq!(hp.f, BTreeSet::from([5]));
        assert_eq!(hp.parts[0].formula.free_vars(), BTreeSet::from([5]));
        assert!(permute(&Permutation::swap(0, 5), &hp).same_as(&p));
    }

    #[test]
    fn compatibility_examples() {
        let b = bank();
        let p = ForcingCondition::new(dist(Term::var(0), Term::var(1)), [0, 1], Q::new(1, 4)).unwrap();
        assert!(compatible(&p, &p, &b).compatible());
        let far = ForcingCondition::new(fneg(dist(Term::var(2), Term::var(3))), [2, 3], Q::new(1, 4)).unwrap();
        let c = compatible(&p, &far, &b);
        assert!(c.compatible());
        assert!(c.evidence.contains("merged"));
        let clash = ForcingCondition::new(fneg(dist(Term::var(0), Term::var(1))), [0, 1], Q::new(1, 4)).unwrap();
        let c = compatible(&p, &clash, &b);
        assert!(!c.compatible());
        assert!(c.evidence.contains("exhaustive"));
    }

    #[test]
    fn relocation_separates_constants() {
        let h = relocate(&BTreeSet::from([0, 1]), &BTreeSet::from([1, 2]));
        assert_eq!(h.apply(1), 3);
        assert_eq!(h.apply(2), 2);
    }

    #[test]
    fn homogeneity_small_run() {
        let rep = homogeneity_experiment(&bank(), 10, 7);
        assert_eq!(rep.pairs, 10);
        // A shared certifying model makes the merged witness work.
        assert!(rep.successes >= rep.common_model);
        assert_eq!(rep.successes + rep.failures.len(), 10);
    }

    #[test]
    fn refinement_examples() {
        let b = bank();
        let theta = parse_formula("sup x0 . d(x0,x0)").unwrap();
        let r = refine_theory(&[theta], &b, 5, None).unwrap();
        assert_eq!(r.table[5][0], (Q::zero(), Q::new(1, 32)));

        let third = parse_formula("1/3").unwrap();
        let r = refine_theory(&[third], &b, 6, None).unwrap();
        let (lo, hi) = r.table[6][0];
        assert!(lo <= Q::new(1, 3) && Q::new(1, 3) <= hi && hi - lo == Q::new(1, 64));

        // Value 1 in the first model and 0 in the second: the lower branch survives.
        let pts = |n: usize| {
            let mut m = crate::structure::FiniteStructure::new("discrete");
            m.add_sort("D", (0..n).map(|i| format!("p{i}")).collect(), crate::structure::Metric::Discrete);
            m
        };
        let b = WitnessBank::from_structures(vec![("two".into(), pts(2)), ("one".into(), pts(1))]).unwrap();
        let split = parse_formula("sup x0 . sup x1 . d(x0,x1)").unwrap();
        let r = refine_theory(&[split], &b, 3, None).unwrap();
        assert_eq!(r.table[1][0], (Q::zero(), Q::new(1, 2)));
        assert_eq!(r.survivors, vec![1]);
        assert!(!r.log.is_empty());
    }

    #[test]
    fn cohen_shadow_extends() {
        let b = bank();
        let p = ForcingCondition::new(dist(Term::var(0), Term::var(1)), [0, 1], Q::new(1, 2)).unwrap();
        let (q, m, n) = cohen_shadow(&p, &b).unwrap();
        assert!(extends(&p, &q, &b).holds());
        assert!(matches!(cond_check(&q, &b), Search::Found(_)));
        assert!(Q::new(1, m as i64) + Q::new(1, n as i64) <= Q::one());
    }
}
