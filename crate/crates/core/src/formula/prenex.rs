//! Prenex normal form.
//!
//! Every connective in the grammar is monotone in each argument (increasing
//! or decreasing), so a quantifier can be pulled through it, flipping
//! `sup`/`inf` under a decreasing position. The rewrite is exact on
//! structures whose sorts are nonempty.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;

use super::{Formula, Quant, Var};
use crate::error::Result;

type Prefix = Vec<(Quant, Var)>;

struct Ctx {
    next: u32,
}

fn rebuild(prefix: Prefix, matrix: Formula) -> Formula {
    prefix.into_iter().rev().fold(matrix, |acc, (k, v)| Formula::Quant(k, v, Box::new(acc)))
}

impl Ctx {
    fn pn(&mut self, f: &Formula) -> (Prefix, Formula) {
        match f {
            Formula::Const(_) | Formula::Dist(..) | Formula::Pred(..) => (vec![], f.clone()),
            Formula::Quant(k, v, body) => {
                let (mut p, m) = self.pn(body);
                p.insert(0, (*k, v.clone()));
                (p, m)
            }
            Formula::Max(xs) => self.combine(xs.iter().map(|x| (x, true)).collect(), |ms| Formula::Max(ms)),
            Formula::Min(xs) => self.combine(xs.iter().map(|x| (x, true)).collect(), |ms| Formula::Min(ms)),
            Formula::Neg(a) => self.combine(vec![(a, false)], |mut ms| Formula::Neg(Box::new(ms.remove(0)))),
            Formula::Cut(m, a) => {
                let m = *m;
                self.combine(vec![(a, true)], move |mut ms| Formula::Cut(m, Box::new(ms.remove(0))))
            }
            Formula::Clamp(a, b, x) => {
                let (a, b) = (*a, *b);
                self.combine(vec![(x, a >= Zero::zero())], move |mut ms| Formula::Clamp(a, b, Box::new(ms.remove(0))))
            }
            Formula::Monus(a, b) => self.combine(vec![(a, true), (b, false)], |mut ms| {
                let y = ms.pop().unwrap();
                let x = ms.pop().unwrap();
                Formula::Monus(Box::new(x), Box::new(y))
            }),
        }
    }

    fn combine(&mut self, kids: Vec<(&Formula, bool)>, make: impl FnOnce(Vec<Formula>) -> Formula) -> (Prefix, Formula) {
        let mut taken: BTreeSet<u32> = kids.iter().flat_map(|(k, _)| k.free_vars()).collect();
        let mut prefix = Prefix::new();
        let mut mats = Vec::new();
        for (kid, increasing) in kids {
            let (p, mut m) = self.pn(kid);
            let mut renames: BTreeMap<u32, u32> = BTreeMap::new();
            for (k, v) in p {
                let mut v = v;
                if let Some(&r) = renames.get(&v.idx) {
                    v.idx = r;
                } else if taken.contains(&v.idx) {
                    let fresh = self.next;
                    self.next += 1;
                    renames.insert(v.idx, fresh);
                    v.idx = fresh;
                }
                taken.insert(v.idx);
                prefix.push((if increasing { k } else { k.flip() }, v));
            }
            if !renames.is_empty() {
                m = m.rename(&renames);
            }
            mats.push(m);
        }
        (prefix, make(mats))
    }
}

/// Pull every quantifier to the front.
pub fn prenex(f: &Formula) -> Result<Formula> {
    let next = f.all_vars().into_iter().max().map(|m| m + 1).unwrap_or(0);
    let mut ctx = Ctx { next };
    let (p, m) = ctx.pn(f);
    Ok(rebuild(p, m))
}

pub fn is_prenex(f: &Formula) -> bool {
    match f {
        Formula::Quant(_, _, body) => is_prenex(body),
        other => other.is_quantifier_free(),
    }
}
