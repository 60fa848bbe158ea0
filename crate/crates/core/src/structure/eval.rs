//! Exact evaluation on a finite structure.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::FiniteStructure;
use crate::error::{Error, Result};
use crate::formula::{Formula, Quant, Term};
use crate::q::{clamp01, monus, Q};

/// Variable index to point index (within the variable's sort).
pub type Assignment = BTreeMap<u32, usize>;

#[derive(Clone, Debug)]
pub(crate) enum CTerm {
    Var(usize),
    Point(usize),
    App(usize, Vec<CTerm>),
}

#[derive(Clone, Debug)]
pub(crate) enum CF {
    Const(Q),
    Dist(usize, CTerm, CTerm),
    Pred(usize, Vec<CTerm>),
    Max(Vec<CF>),
    Min(Vec<CF>),
    Neg(Box<CF>),
    Monus(Box<CF>, Box<CF>),
    Cut(Q, Box<CF>),
    Clamp(Q, Q, Box<CF>),
    Quant(Quant, usize, usize, Box<CF>),
}

/// A formula resolved against one structure.
pub struct Compiled<'a> {
    pub(crate) m: &'a FiniteStructure,
    pub(crate) root: CF,
    /// Sort index of every variable.
    pub sorts: BTreeMap<u32, usize>,
    /// Free variables, ascending.
    pub free: Vec<u32>,
    pub(crate) slots: usize,
}

struct Resolver<'a> {
    m: &'a FiniteStructure,
    sorts: &'a BTreeMap<u32, usize>,
}

impl Resolver<'_> {
    fn term(&self, t: &Term) -> Result<(CTerm, usize)> {
        Ok(match t {
            Term::Var(v) => (CTerm::Var(v.idx as usize), self.sorts[&v.idx]),
            Term::Const(c) => {
                let (s, p) = self.m.resolve(c)?;
                (CTerm::Point(p), s)
            }
            Term::App(f, args) => {
                let fi = self.m.function_index(f).ok_or_else(|| Error::UnknownSymbol(f.clone()))?;
                let cargs = args.iter().map(|a| self.term(a).map(|x| x.0)).collect::<Result<Vec<_>>>()?;
                (CTerm::App(fi, cargs), self.m.functions[fi].result)
            }
        })
    }

    fn formula(&self, f: &Formula) -> Result<CF> {
        Ok(match f {
            Formula::Const(x) => CF::Const(clamp01(*x)),
            Formula::Dist(a, b) => {
                let (ca, sa) = self.term(a)?;
                let (cb, _) = self.term(b)?;
                CF::Dist(sa, ca, cb)
            }
            Formula::Pred(p, args) => {
                let pi = self.m.predicate_index(p).ok_or_else(|| Error::UnknownSymbol(p.clone()))?;
                CF::Pred(pi, args.iter().map(|a| self.term(a).map(|x| x.0)).collect::<Result<Vec<_>>>()?)
            }
            Formula::Max(xs) => CF::Max(xs.iter().map(|x| self.formula(x)).collect::<Result<_>>()?),
            Formula::Min(xs) => CF::Min(xs.iter().map(|x| self.formula(x)).collect::<Result<_>>()?),
            Formula::Neg(a) => CF::Neg(Box::new(self.formula(a)?)),
            Formula::Monus(a, b) => CF::Monus(Box::new(self.formula(a)?), Box::new(self.formula(b)?)),
            Formula::Cut(m, a) => CF::Cut(Q::new(1, *m as i64), Box::new(self.formula(a)?)),
            Formula::Clamp(a, b, x) => CF::Clamp(*a, *b, Box::new(self.formula(x)?)),
            Formula::Quant(k, v, body) => {
                CF::Quant(*k, v.idx as usize, self.sorts[&v.idx], Box::new(self.formula(body)?))
            }
        })
    }
}

impl<'a> Compiled<'a> {
    pub fn new(f: &Formula, m: &'a FiniteStructure) -> Result<Compiled<'a>> {
        let names = m.signature().infer_sorts(f)?;
        let sorts: BTreeMap<u32, usize> =
            names.iter().map(|(v, s)| m.sort_index(s).map(|si| (*v, si))).collect::<Result<_>>()?;
        let root = Resolver { m, sorts: &sorts }.formula(f)?;
        let slots = f.all_vars().into_iter().max().map(|x| x as usize + 1).unwrap_or(0);
        Ok(Compiled { m, root, sorts, free: f.free_vars().into_iter().collect(), slots })
    }

    /// Evaluate with a full slot vector (index = variable index).
    pub fn eval_slots(&self, env: &mut Vec<usize>) -> Q {
        if env.len() < self.slots {
            env.resize(self.slots, 0);
        }
        self.m.eval_cf(&self.root, env)
    }

    pub fn eval(&self, asg: &Assignment) -> Result<Q> {
        let mut env = self.env_for(asg)?;
        Ok(self.eval_slots(&mut env))
    }

    pub fn env_for(&self, asg: &Assignment) -> Result<Vec<usize>> {
        let mut env = vec![0usize; self.slots.max(asg.keys().map(|&k| k as usize + 1).max().unwrap_or(0))];
        for v in &self.free {
            let p = *asg.get(v).ok_or(Error::Unbound(*v))?;
            let s = self.sorts[v];
            if p >= self.m.sorts[s].len() {
                return Err(Error::Sort(format!("x{v} assigned point {p} outside sort {}", self.m.sorts[s].name)));
            }
            env[*v as usize] = p;
        }
        Ok(env)
    }

    pub fn sort_of(&self, v: u32) -> Option<usize> {
        self.sorts.get(&v).copied()
    }
}

impl FiniteStructure {
    pub(crate) fn term_point(&self, t: &CTerm, env: &[usize]) -> usize {
        match t {
            CTerm::Var(v) => env[*v],
            CTerm::Point(p) => *p,
            CTerm::App(fi, args) => {
                let mut buf = [0usize; 4];
                if args.len() <= 4 {
                    for (i, a) in args.iter().enumerate() {
                        buf[i] = self.term_point(a, env);
                    }
                    self.apply(*fi, &buf[..args.len()])
                } else {
                    let v: Vec<usize> = args.iter().map(|a| self.term_point(a, env)).collect();
                    self.apply(*fi, &v)
                }
            }
        }
    }

    pub(crate) fn eval_cf(&self, f: &CF, env: &mut Vec<usize>) -> Q {
        match f {
            CF::Const(x) => *x,
            CF::Dist(s, a, b) => {
                let (pa, pb) = (self.term_point(a, env), self.term_point(b, env));
                self.dist(*s, pa, pb)
            }
            CF::Pred(pi, args) => {
                let v: Vec<usize> = args.iter().map(|a| self.term_point(a, env)).collect();
                self.pred_value(*pi, &v)
            }
            CF::Max(xs) => {
                let mut best = Q::zero();
                for x in xs {
                    let v = self.eval_cf(x, env);
                    if v > best {
                        best = v;
                        if best >= Q::one() {
                            break;
                        }
                    }
                }
                best
            }
            CF::Min(xs) => {
                let mut best = Q::one();
                for x in xs {
                    let v = self.eval_cf(x, env);
                    if v < best {
                        best = v;
                        if best.is_zero() {
                            break;
                        }
                    }
                }
                best
            }
            CF::Neg(a) => Q::one() - self.eval_cf(a, env),
            CF::Monus(a, b) => {
                let u = self.eval_cf(a, env);
                if u.is_zero() {
                    return u;
                }
                monus(u, self.eval_cf(b, env))
            }
            CF::Cut(inv, a) => monus(self.eval_cf(a, env), *inv),
            CF::Clamp(a, b, x) => clamp01(*a * self.eval_cf(x, env) + *b),
            CF::Quant(k, slot, sort, body) => {
                let n = self.sorts[*sort].len();
                let saved = env[*slot];
                let mut best = match k {
                    Quant::Sup => Q::zero(),
                    Quant::Inf => Q::one(),
                };
                for p in 0..n {
                    env[*slot] = p;
                    let v = self.eval_cf(body, env);
                    match k {
                        Quant::Sup if v > best => {
                            best = v;
                            if best >= Q::one() {
                                break;
                            }
                        }
                        Quant::Inf if v < best => {
                            best = v;
                            if best.is_zero() {
                                break;
                            }
                        }
                        _ => {}
                    }
                }
                env[*slot] = saved;
                best
            }
        }
    }
}

/// Value of `f` in `m` at `asg`. Quantifiers range over the finite sorts;
/// `sup` over an empty sort is 0 and `inf` is 1.
pub fn eval(f: &Formula, m: &FiniteStructure, asg: &Assignment) -> Result<Q> {
    Compiled::new(f, m)?.eval(asg)
}

/// Like [`eval`], with points given by display name.
pub fn eval_named(f: &Formula, m: &FiniteStructure, asg: &[(u32, &str)]) -> Result<Q> {
    let c = Compiled::new(f, m)?;
    let mut a = Assignment::new();
    for (v, name) in asg {
        let sort = c.sort_of(*v).ok_or(Error::Unbound(*v))?;
        let p = match m.sorts[sort].lookup(name) {
            Some(p) => p,
            None => {
                let (s, p) = m.resolve(name)?;
                if s != sort {
                    return Err(Error::Sort(format!("{name} is not in sort {}", m.sorts[sort].name)));
                }
                p
            }
        };
        a.insert(*v, p);
    }
    c.eval(&a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::q::q;
    use crate::structure::Metric;

    fn two_points() -> FiniteStructure {
        let mut m = FiniteStructure::new("two");
        m.add_sort("D", vec!["a".into(), "b".into()], Metric::Dense(vec![q(0, 1), q(1, 2), q(1, 2), q(0, 1)]));
        m
    }

    #[test]
    fn diagonal_is_zero() {
        let m = two_points();
        assert_eq!(eval(&parse_formula("d(a,a)").unwrap(), &m, &Assignment::new()).unwrap(), q(0, 1));
    }

    #[test]
    fn sup_over_two_points() {
        let m = two_points();
        assert_eq!(eval(&parse_formula("sup x0 . d(x0, a)").unwrap(), &m, &Assignment::new()).unwrap(), q(1, 2));
    }

    #[test]
    fn unbound_variable() {
        let m = two_points();
        assert_eq!(eval(&parse_formula("d(x0, a)").unwrap(), &m, &Assignment::new()), Err(Error::Unbound(0)));
    }

    #[test]
    fn named_assignment() {
        let m = two_points();
        assert_eq!(eval_named(&parse_formula("neg(d(x0, a))").unwrap(), &m, &[(0, "b")]).unwrap(), q(1, 2));
    }
}
