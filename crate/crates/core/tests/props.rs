//! Property tests over randomly generated formulas, structures, trees and forcing conditions.
//! Random objects are drawn from a seeded `StdRng` so failures replay from the seed.

use std::collections::{BTreeMap, BTreeSet};

use mlw_core::condition::{normalize_condition, Condition};
use mlw_core::forge::{
    build_generic, cohen_shadow, cond_check, extends, extract_premodel, permute, random_condition, verify_witness,
    Budget, DenseSetSpec, Permutation, Search, WitnessBank,
};
use mlw_core::formula::{
    dist, fclamp, fconst, fcut, fmax, fmin, fmonus, fneg, formula_modulus, inf, parse_formula, pred, prenex, sup,
    Formula, Term, Var,
};
use mlw_core::modulus::Modulus;
use mlw_core::q::{q, Q};
use mlw_core::structure::{
    eval, find_iso, perm_iso_exhaustive, realizes, verify_iso, FiniteStructure, IsoOutcome, Metric, PredTable,
    Sublanguage,
};
use mlw_core::trees::{
    baire_dist, nat_node, parse_tree, project, tree_space_dist, FiniteTree, Node, Ordinal, PairTree, TreeTerm,
};
use mlw_core::types::{type_and, type_or, PartialType};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

// ------------------------------------------------------------ generators

/// Points on a line at distinct positions `k/4` (distances capped at 1) with a
/// 1-Lipschitz unary predicate `P`.
fn line_structure(rng: &mut StdRng, n: usize) -> FiniteStructure {
    let mut pos: Vec<i64> = (0..9).collect();
    pos.shuffle(rng);
    pos.truncate(n);
    let mut table = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            table.push(q((pos[a] - pos[b]).abs(), 4).min(Q::one()));
        }
    }
    let mut m = FiniteStructure::new("line");
    m.add_sort("D", (0..n).map(|i| format!("p{i}")).collect(), Metric::Dense(table));
    let vals: Vec<Q> = pos.iter().map(|&p| q(p, 8)).collect();
    m.add_predicate("P", &["D"], PredTable::Dense(vals), Some(Modulus::lipschitz(Q::one()))).unwrap();
    m
}

fn var(i: u32) -> Term {
    Term::var(i)
}

/// Formulas in free variables `x0, x1`, binding `x2, x3`.
fn gen_formula(rng: &mut StdRng, depth: usize, bound: &[u32]) -> Formula {
    let mut vars = vec![0u32, 1];
    vars.extend_from_slice(bound);
    let pick = |rng: &mut StdRng| *vars.choose(rng).unwrap();
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..3) {
            0 => dist(var(pick(rng)), var(pick(rng))),
            1 => pred("P", vec![var(pick(rng))]),
            _ => fconst(q(rng.gen_range(0..=4), 4)),
        };
    }
    let sub = |rng: &mut StdRng| gen_formula(rng, depth - 1, bound);
    match rng.gen_range(0..8) {
        0 => fmax(vec![sub(rng), sub(rng)]),
        1 => fmin(vec![sub(rng), sub(rng)]),
        2 => fneg(sub(rng)),
        3 => fmonus(sub(rng), sub(rng)),
        4 => fcut(rng.gen_range(1..4), sub(rng)),
        5 => fclamp(*[q(2, 1), q(-1, 1), q(1, 2)].choose(rng).unwrap(), q(rng.gen_range(0..2), 2), sub(rng)),
        _ => {
            let v = if bound.contains(&2) { 3 } else { 2 };
            let mut b = bound.to_vec();
            b.push(v);
            let body = gen_formula(rng, depth - 1, &b);
            if rng.gen_bool(0.5) {
                sup(Var::new(v), body)
            } else {
                inf(Var::new(v), body)
            }
        }
    }
}

fn assignments(n: usize) -> Vec<BTreeMap<u32, usize>> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            out.push(BTreeMap::from([(0u32, a), (1u32, b)]));
        }
    }
    out
}

fn random_tree(rng: &mut StdRng, depth: usize, branch: u32) -> FiniteTree {
    let mut nodes = vec![nat_node(&[])];
    for _ in 0..rng.gen_range(0..8) {
        let len = rng.gen_range(1..=depth);
        let s: Vec<u32> = (0..len).map(|_| rng.gen_range(0..branch)).collect();
        nodes.push(nat_node(&s));
    }
    FiniteTree::closure(nodes)
}

fn random_term(rng: &mut StdRng, depth: usize, wf: bool) -> TreeTerm {
    let leaves = if wf { 4 } else { 6 };
    if depth == 0 || rng.gen_bool(0.4) {
        return match rng.gen_range(0..leaves) {
            0 => TreeTerm::Chain(rng.gen_range(0..4)),
            1 => TreeTerm::T1,
            2 => TreeTerm::T2,
            3 => TreeTerm::Finite(random_tree(rng, 2, 3)),
            4 => TreeTerm::Full,
            _ => TreeTerm::Comb,
        };
    }
    match rng.gen_range(0..3) {
        0 => TreeTerm::Graft(Box::new(random_term(rng, depth - 1, wf)), Box::new(random_term(rng, depth - 1, wf))),
        1 => TreeTerm::DSum((0..rng.gen_range(1..=3)).map(|_| random_term(rng, depth - 1, wf)).collect()),
        _ => TreeTerm::DSumOmega(Box::new(random_term(rng, depth - 1, wf))),
    }
}

fn random_ordinal(rng: &mut StdRng) -> Ordinal {
    let mut terms: Vec<(u32, u64)> = Vec::new();
    for k in (0..3u32).rev() {
        if rng.gen_bool(0.5) {
            terms.push((k, rng.gen_range(1..4)));
        }
    }
    Ordinal::from_terms(&terms)
}

fn forge_bank() -> WitnessBank {
    WitnessBank::parse("N(depth=2,branch=2,h=1); N(depth=1,branch=3,h=1)").unwrap()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

// ------------------------------------------------------------ logic

proptest! {
    #![proptest_config(config(250))]

    #[test]
    fn modulus_bounds_every_perturbation(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rng.gen_range(2..=5);
        let m = line_structure(&mut rng, n);
        let f = gen_formula(&mut rng, 3, &[]);
        let md = formula_modulus(&f, &m.signature()).unwrap();
        for _ in 0..4 {
            let a = BTreeMap::from([(0u32, rng.gen_range(0..n)), (1u32, rng.gen_range(0..n))]);
            let b = BTreeMap::from([(0u32, rng.gen_range(0..n)), (1u32, rng.gen_range(0..n))]);
            let shift = m.dist(0, a[&0], b[&0]) + m.dist(0, a[&1], b[&1]);
            let eps = q(rng.gen_range(1..=8), 8);
            let change = (eval(&f, &m, &a).unwrap() - eval(&f, &m, &b).unwrap()).abs();
            if shift < md.eval(eps) {
                prop_assert!(change <= eps, "{f}: change {change} at shift {shift}, eps {eps}");
            }
            prop_assert!(change <= md.tolerance_at(shift), "{f}: change {change} at shift {shift}");
        }
    }

    #[test]
    fn values_stay_in_unit_interval(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rng.gen_range(1..=4);
        let m = line_structure(&mut rng, n);
        let f = gen_formula(&mut rng, 4, &[]);
        for a in assignments(n) {
            let v = eval(&f, &m, &a).unwrap();
            prop_assert!(v >= Q::zero() && v <= Q::one());
        }
    }

    #[test]
    fn prenex_preserves_values(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rng.gen_range(1..=4);
        let m = line_structure(&mut rng, n);
        let f = gen_formula(&mut rng, 3, &[]);
        let p = prenex(&f).unwrap();
        prop_assert!(mlw_core::formula::is_prenex(&p));
        for a in assignments(n) {
            prop_assert_eq!(eval(&f, &m, &a).unwrap(), eval(&p, &m, &a).unwrap(), "{} vs {}", f, p);
        }
    }

    #[test]
    fn formulas_round_trip_through_text(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let f = gen_formula(&mut rng, 4, &[]);
        let back = parse_formula(&f.to_string()).unwrap();
        prop_assert_eq!(back.to_string(), f.to_string());
        let m = line_structure(&mut rng, 3);
        for a in assignments(3) {
            prop_assert_eq!(eval(&f, &m, &a).unwrap(), eval(&back, &m, &a).unwrap());
        }
    }

    #[test]
    fn normalized_conditions_have_the_same_solutions(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rng.gen_range(1..=6);
        let m = line_structure(&mut rng, n);
        let f = gen_formula(&mut rng, 2, &[]);
        let t = q(rng.gen_range(0..=4), 4);
        let c = match rng.gen_range(0..3) {
            0 => Condition::Closed(f.clone()),
            1 => Condition::Open(f.clone(), t),
            _ => Condition::Le(f.clone(), t),
        };
        let nc = normalize_condition(&c);
        for a in assignments(n) {
            let before = c.holds(eval(c.formula(), &m, &a).unwrap());
            let after = nc.holds(eval(nc.formula(), &m, &a).unwrap());
            prop_assert_eq!(before, after, "{:?} vs {:?}", c, nc);
        }
    }

    #[test]
    fn realizes_matches_brute_force(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rng.gen_range(1..=5);
        let m = line_structure(&mut rng, n);
        let conds: Vec<Formula> = (0..rng.gen_range(1..=3)).map(|_| gen_formula(&mut rng, 2, &[])).collect();
        let t = PartialType::new("t", vec![Var::new(0), Var::new(1)], conds.clone());
        let got: BTreeSet<Vec<usize>> = realizes(&m, &t, 0, Q::zero()).unwrap().into_iter().collect();
        let want: BTreeSet<Vec<usize>> = assignments(n)
            .into_iter()
            .filter(|a| conds.iter().all(|c| eval(c, &m, a).unwrap().is_zero()))
            .map(|a| vec![a[&0], a[&1]])
            .collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn pairing_is_product_and_union(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rng.gen_range(1..=5);
        let m = line_structure(&mut rng, n);
        let one_var = |rng: &mut StdRng| {
            let cs = (0..rng.gen_range(1..=3))
                .map(|_| gen_formula(rng, 2, &[]).rename(&BTreeMap::from([(1u32, 0u32)])))
                .collect();
            PartialType::new("u", vec![Var::new(0)], cs)
        };
        let t = one_var(&mut rng);
        let s = one_var(&mut rng);
        let single = |ty: &PartialType| -> BTreeSet<usize> {
            realizes(&m, ty, 0, Q::zero()).unwrap().into_iter().map(|v| v[0]).collect()
        };
        let (rt, rs) = (single(&t), single(&s));
        let or: BTreeSet<Vec<usize>> = realizes(&m, &type_or(&t, &s), 0, Q::zero()).unwrap().into_iter().collect();
        let and: BTreeSet<Vec<usize>> = realizes(&m, &type_and(&t, &s), 0, Q::zero()).unwrap().into_iter().collect();
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(or.contains(&vec![a, b]), rt.contains(&a) && rs.contains(&b));
                prop_assert_eq!(and.contains(&vec![a, b]), rt.contains(&a) || rs.contains(&b));
            }
        }
    }

    #[test]
    fn moduli_are_positive_and_monotone(pts in proptest::collection::vec((1i64..=16, 1i64..=16), 1..4), l in 1i64..8) {
        let pts: Vec<(Q, Q)> = pts.into_iter().map(|(e, d)| (q(e, 16), q(d, 16))).collect();
        let Ok(a) = Modulus::from_points(pts) else { return Ok(()) };
        let b = Modulus::lipschitz(q(l, 2));
        let c = Modulus::compose(&a, &b);
        for md in [&a, &b, &c] {
            let mut prev = Q::zero();
            for k in 1..=16 {
                let v = md.eval(q(k, 16));
                prop_assert!(v > Q::zero());
                prop_assert!(v >= prev);
                prev = v;
            }
        }
    }
}

// ------------------------------------------------------------ structures

/// A copy of `m` with its points listed in the order `perm`.
fn permuted(m: &FiniteStructure, perm: &[usize]) -> FiniteStructure {
    let n = perm.len();
    let mut table = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            table.push(m.dist(0, perm[a], perm[b]));
        }
    }
    let mut out = FiniteStructure::new("copy");
    out.add_sort("D", (0..n).map(|i| format!("p{i}")).collect(), Metric::Dense(table));
    let pi = m.predicate_index("P").unwrap();
    let vals: Vec<Q> = perm.iter().map(|&x| m.pred_value(pi, &[x])).collect();
    out.add_predicate("P", &["D"], PredTable::Dense(vals), Some(Modulus::lipschitz(Q::one()))).unwrap();
    out
}

proptest! {
    #![proptest_config(config(120))]

    #[test]
    fn find_iso_is_sound_and_complete(seed in any::<u64>(), tweak in any::<bool>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rng.gen_range(1..=6);
        let a = line_structure(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let b = if tweak { line_structure(&mut rng, n) } else { permuted(&a, &perm) };
        let l0 = Sublanguage::all(&a);
        let exhaustive = perm_iso_exhaustive(&a, &b, &l0);
        match find_iso(&a, &b, &l0) {
            IsoOutcome::Found(w) => {
                prop_assert!(verify_iso(&a, &b, &l0, &w).is_ok());
                prop_assert!(exhaustive);
            }
            IsoOutcome::Refused(_) => prop_assert!(!exhaustive),
            IsoOutcome::Undecided(r) => prop_assert!(false, "undecided on {n} points: {r}"),
        }
    }
}

// ------------------------------------------------------------ trees

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn ordinal_addition_laws(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (a, b, c) = (random_ordinal(&mut rng), random_ordinal(&mut rng), random_ordinal(&mut rng));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.add(&Ordinal::zero()), a.clone());
        prop_assert_eq!(Ordinal::zero().add(&a), a.clone());
        prop_assert!(a.add(&b) >= a);
        prop_assert!(a.add(&b) >= b);
        let s = Ordinal::sup(&[a.clone(), b.clone()]);
        prop_assert!(s >= a && s >= b && (s == a || s == b));
        prop_assert_eq!(a.succ(), a.add(&Ordinal::nat(1)));
    }

    #[test]
    fn symbolic_rank_laws(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let s = random_term(&mut rng, 2, true);
        let t = random_term(&mut rng, 2, true);
        prop_assert!(s.well_founded() && t.well_founded());
        let g = TreeTerm::Graft(Box::new(s.clone()), Box::new(t.clone()));
        prop_assert_eq!(g.rank(), t.rank().add(&s.rank()));
        let d = TreeTerm::DSum(vec![s.clone(), t.clone()]);
        prop_assert_eq!(d.rank(), Ordinal::sup(&[s.rank(), t.rank()]));
        prop_assert_eq!(TreeTerm::DSumOmega(Box::new(s.clone())).rank(), s.rank());
    }

    #[test]
    fn truncation_ranks_add_under_graft(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let s = random_term(&mut rng, 1, true);
        let t = random_term(&mut rng, 1, true);
        let g = TreeTerm::Graft(Box::new(s.clone()), Box::new(t.clone()));
        let (depth, branch) = (14, 2);
        prop_assert_eq!(
            g.truncate(depth, branch).rank(),
            s.truncate(depth, branch).rank() + t.truncate(depth, branch).rank()
        );
    }

    #[test]
    fn dsl_round_trips(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let t = random_term(&mut rng, 3, false);
        let back = parse_tree(&t.to_string()).unwrap();
        prop_assert_eq!(back.to_string(), t.to_string());
        prop_assert_eq!(back.rank(), t.rank());
        prop_assert_eq!(back.well_founded(), t.well_founded());
    }

    #[test]
    fn truncations_are_subtrees_of_deeper_ones(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let t = random_term(&mut rng, 2, false);
        let small = t.truncate(3, 2);
        let big = t.truncate(4, 3);
        prop_assert!(small.is_subset(&big));
        for s in small.nodes() {
            for k in 0..s.len() {
                prop_assert!(small.contains(&s[..k]));
            }
        }
    }

    #[test]
    fn baire_distance_is_an_ultrametric(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let node = |rng: &mut StdRng| -> Node {
            let len = rng.gen_range(0..=5);
            nat_node(&(0..len).map(|_| rng.gen_range(0..3)).collect::<Vec<u32>>())
        };
        let (a, b, c) = (node(&mut rng), node(&mut rng), node(&mut rng));
        prop_assert_eq!(baire_dist(&a, &b), baire_dist(&b, &a));
        prop_assert_eq!(baire_dist(&a, &a), Q::zero());
        prop_assert!(baire_dist(&a, &c) <= baire_dist(&a, &b).max(baire_dist(&b, &c)));
        if a != b {
            prop_assert!(baire_dist(&a, &b) > Q::zero());
        }
    }

    #[test]
    fn tree_distance_is_a_metric_and_local(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (a, b, c) = (random_tree(&mut rng, 4, 3), random_tree(&mut rng, 4, 3), random_tree(&mut rng, 4, 3));
        let d = tree_space_dist;
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &a), Q::zero());
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        if a != b {
            prop_assert!(d(&a, &b) > Q::zero());
        }
        // agreement inside k^{≤k} keeps the distance at most 1/(k+1)
        for k in 1..=3usize {
            let inside = |t: &FiniteTree| -> BTreeSet<Node> {
                t.nodes()
                    .iter()
                    .filter(|s| s.len() <= k && s.iter().all(|x| (x.max_entry() as usize) < k))
                    .cloned()
                    .collect()
            };
            if inside(&a) == inside(&b) {
                prop_assert!(d(&a, &b) <= q(1, k as i64 + 1));
            }
        }
    }

    #[test]
    fn projections_are_monotone(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut pairs = BTreeSet::from([(nat_node(&[]), nat_node(&[]))]);
        for _ in 0..rng.gen_range(0..6) {
            let len = rng.gen_range(1..=3);
            let s: Vec<u32> = (0..len).map(|_| rng.gen_range(0..2)).collect();
            let t: Vec<u32> = (0..len).map(|_| rng.gen_range(0..2)).collect();
            for k in 1..=len {
                pairs.insert((nat_node(&s[..k]), nat_node(&t[..k])));
            }
        }
        let all: Vec<(Node, Node)> = pairs.iter().cloned().collect();
        let keep: Vec<(Node, Node)> = all.iter().filter(|(s, _)| s.len() <= 1 || rng.gen_bool(0.5)).cloned().collect();
        let keep: BTreeSet<(Node, Node)> = keep
            .iter()
            .filter(|(s, t)| (0..s.len()).all(|k| keep.contains(&(s[..k].to_vec(), t[..k].to_vec()))))
            .cloned()
            .collect();
        let big = PairTree::finite(all).unwrap();
        let small = PairTree::finite(keep).unwrap();
        let x: Vec<u32> = (0..3).map(|_| rng.gen_range(0..2)).collect();
        let (ps, pb) = (project(&small, &nat_node(&x), 2).unwrap(), project(&big, &nat_node(&x), 2).unwrap());
        prop_assert!(ps.is_subset(&pb));
    }
}

#[test]
fn t1_truncation_ranks_grow_with_depth() {
    let mut prev = None;
    for d in 1..=7u32 {
        let r = TreeTerm::T1.truncate(d as usize, d).rank();
        assert_eq!(r, d as u64);
        if let Some(p) = prev {
            assert!(r > p);
        }
        prev = Some(r);
    }
    assert_eq!(TreeTerm::T1.rank(), Ordinal::omega());
}

// ------------------------------------------------------------ forcing

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn permutation_commutes_with_extension(seed in any::<u64>()) {
        let bank = forge_bank();
        let mut rng = StdRng::seed_from_u64(seed);
        let p = random_condition(&mut rng, &[0, 1], true);
        let mut qc = p.clone();
        let extra = random_condition(&mut rng, &[0, 1, 2], true);
        for part in &extra.parts {
            qc.conjoin_widen(part.formula.clone(), part.eps);
        }
        let h = Permutation::random(&mut rng, 5);
        let before = extends(&p, &qc, &bank).holds();
        let after = extends(&permute(&h, &p), &permute(&h, &qc), &bank).holds();
        prop_assert_eq!(before, after);
        prop_assert!(before, "a conjunction extends its conjunct");
    }
}

proptest! {
    #![proptest_config(config(60))]

    #[test]
    fn extension_is_a_preorder(seed in any::<u64>()) {
        let bank = forge_bank();
        let mut rng = StdRng::seed_from_u64(seed);
        let conds: Vec<_> = (0..3).map(|_| random_condition(&mut rng, &[0, 1], true)).collect();
        for a in &conds {
            prop_assert!(extends(a, a, &bank).holds());
        }
        for a in &conds {
            for b in &conds {
                for c in &conds {
                    if extends(a, b, &bank).holds() && extends(b, c, &bank).holds() {
                        prop_assert!(extends(a, c, &bank).holds());
                    }
                }
            }
        }
    }

    #[test]
    fn cohen_family_is_dense(seed in any::<u64>()) {
        let bank = forge_bank();
        let mut rng = StdRng::seed_from_u64(seed);
        let p = random_condition(&mut rng, &[0, 1, 2], true);
        if let Search::Found(_) = cond_check(&p, &bank) {
            let (qc, m, n) = cohen_shadow(&p, &bank).expect("certified conditions have a shadow");
            prop_assert!(extends(&p, &qc, &bank).holds(), "cut_{m} with 1/{n} does not extend");
            prop_assert!(matches!(cond_check(&qc, &bank), Search::Found(_)));
        }
    }

    #[test]
    fn runs_are_sound_and_premodels_nearly_metric(seed in any::<u64>()) {
        let bank = forge_bank();
        let mut rng = StdRng::seed_from_u64(seed);
        let mut schedule = Vec::new();
        for _ in 0..rng.gen_range(3..12) {
            let (i, j) = (rng.gen_range(0..4u32), rng.gen_range(0..4u32));
            schedule.push(DenseSetSpec::MetricDecide { i, j, k: rng.gen_range(1..=6) });
        }
        let run = build_generic(&schedule, &bank, &Budget::default());
        prop_assert!(run.complete(), "{:?}", run.failure);
        let mut acc = mlw_core::forge::ForcingCondition::trivial();
        for st in &run.steps {
            for part in &st.added {
                acc.conjoin_widen(part.formula.clone(), part.eps);
            }
            prop_assert!(verify_witness(&acc, &bank, &st.witness).is_ok());
        }
        let Ok(pm) = extract_premodel(&run) else { return Ok(()) };
        let n = pm.points.len();
        let r = |a: usize, b: usize| {
            if a == b { Q::zero() } else { pm.radius[&(pm.points[a.min(b)], pm.points[a.max(b)])] }
        };
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let lhs = pm.structure.dist(0, a, c);
                    let rhs = pm.structure.dist(0, a, b) + pm.structure.dist(0, b, c);
                    prop_assert!(lhs <= rhs + r(a, b) + r(b, c) + r(a, c));
                }
            }
        }
        prop_assert!(pm.approx_metric());
    }
}
