//! Signatures, sort inference and formula moduli.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use super::{Formula, Term};
use crate::error::{Error, Result};
use crate::modulus::Modulus;
use crate::q::{int, Q};

#[derive(Clone, Debug, PartialEq)]
pub struct FnSig {
    pub args: Vec<String>,
    pub result: String,
    pub modulus: Option<Modulus>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredSig {
    pub args: Vec<String>,
    pub modulus: Option<Modulus>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Signature {
    pub sorts: Vec<String>,
    pub functions: BTreeMap<String, FnSig>,
    pub predicates: BTreeMap<String, PredSig>,
    pub constants: BTreeMap<String, String>,
}

impl Signature {
    fn const_sort(&self, c: &str) -> Result<&String> {
        self.constants.get(c).ok_or_else(|| Error::UnknownSymbol(c.to_string()))
    }

    fn fn_sig(&self, f: &str) -> Result<&FnSig> {
        self.functions.get(f).ok_or_else(|| Error::UnknownSymbol(f.to_string()))
    }

    fn pred_sig(&self, p: &str) -> Result<&PredSig> {
        self.predicates.get(p).ok_or_else(|| Error::UnknownSymbol(p.to_string()))
    }

    fn term_sort(&self, t: &Term, env: &BTreeMap<u32, String>) -> Result<Option<String>> {
        Ok(match t {
            Term::Var(v) => env.get(&v.idx).cloned(),
            Term::Const(c) => Some(self.const_sort(c)?.clone()),
            Term::App(f, _) => Some(self.fn_sig(f)?.result.clone()),
        })
    }

    /// Force `t` to have sort `s`, recording variable sorts. Returns whether `env` grew.
    fn unify(&self, t: &Term, s: &str, env: &mut BTreeMap<u32, String>) -> Result<bool> {
        match t {
            Term::Var(v) => match env.get(&v.idx) {
                Some(have) if have != s => {
                    Err(Error::Sort(format!("x{} used at sort {have} and at sort {s}", v.idx)))
                }
                Some(_) => Ok(false),
                None => {
                    env.insert(v.idx, s.to_string());
                    Ok(true)
                }
            },
            Term::Const(c) => {
                let have = self.const_sort(c)?;
                if have != s {
                    return Err(Error::Sort(format!("constant {c} has sort {have}, expected {s}")));
                }
                Ok(false)
            }
            Term::App(f, args) => {
                let sig = self.fn_sig(f)?;
                if sig.result != s {
                    return Err(Error::Sort(format!("{f} returns sort {}, expected {s}", sig.result)));
                }
                self.unify_args(f, &sig.args, args, env)
            }
        }
    }

    fn unify_args(&self, name: &str, sorts: &[String], args: &[Term], env: &mut BTreeMap<u32, String>) -> Result<bool> {
        if sorts.len() != args.len() {
            return Err(Error::Sort(format!("{name} expects {} arguments, got {}", sorts.len(), args.len())));
        }
        let mut grew = false;
        for (a, s) in args.iter().zip(sorts) {
            grew |= self.unify(a, s, env)?;
        }
        Ok(grew)
    }

    /// Walk every term position once; free terms inside functions are unified as we go.
    fn pass(&self, f: &Formula, env: &mut BTreeMap<u32, String>) -> Result<bool> {
        let mut grew = false;
        match f {
            Formula::Dist(a, b) => {
                for t in [a, b] {
                    if let Term::App(name, args) = t {
                        let sig = self.fn_sig(name)?;
                        grew |= self.unify_args(name, &sig.args, args, env)?;
                    }
                }
                let sa = self.term_sort(a, env)?;
                let sb = self.term_sort(b, env)?;
                match (sa, sb) {
                    (Some(x), Some(y)) if x != y => {
                        return Err(Error::Sort(format!("d compares sort {x} with sort {y}")));
                    }
                    (Some(x), None) => grew |= self.unify(b, &x, env)?,
                    (None, Some(y)) => grew |= self.unify(a, &y, env)?,
                    _ => {}
                }
            }
            Formula::Pred(p, args) => {
                let sig = self.pred_sig(p)?;
                grew |= self.unify_args(p, &sig.args, args, env)?;
            }
            Formula::Quant(_, v, body) => {
                if let Some(s) = &v.sort {
                    grew |= self.unify(&Term::Var(v.clone()), s, env)?;
                }
                grew |= self.pass(body, env)?;
            }
            _ => {
                for c in f.children() {
                    grew |= self.pass(c, env)?;
                }
            }
        }
        Ok(grew)
    }

    /// Infer a sort for every variable index in `f`. One index has one sort per formula.
    pub fn infer_sorts(&self, f: &Formula) -> Result<BTreeMap<u32, String>> {
        let mut env = BTreeMap::new();
        for (idx, s) in f.written_sorts() {
            if !self.sorts.contains(&s) {
                return Err(Error::Sort(format!("unknown sort {s}")));
            }
            if let Some(prev) = env.insert(idx, s.clone()) {
                if prev != s {
                    return Err(Error::Sort(format!("x{idx} annotated with sorts {prev} and {s}")));
                }
            }
        }
        while self.pass(f, &mut env)? {}
        for v in f.all_vars() {
            if !env.contains_key(&v) {
                if self.sorts.len() == 1 {
                    env.insert(v, self.sorts[0].clone());
                } else {
                    return Err(Error::Sort(format!("cannot infer the sort of x{v}; annotate it")));
                }
            }
        }
        // a final pass validates the completed assignment
        self.pass(f, &mut env)?;
        Ok(env)
    }

    pub fn check(&self, f: &Formula) -> Result<()> {
        self.infer_sorts(f).map(|_| ())
    }
}

type Sens = BTreeMap<u32, Q>;

fn sens_add(a: &mut Sens, b: &Sens, scale: Q) {
    for (k, v) in b {
        *a.entry(*k).or_insert_with(Q::zero) += *v * scale;
    }
}

fn sens_max(a: &mut Sens, b: &Sens) {
    for (k, v) in b {
        let e = a.entry(*k).or_insert_with(Q::zero);
        if *v > *e {
            *e = *v;
        }
    }
}

fn lip_of(m: &Option<Modulus>, name: &str) -> Result<Option<Q>> {
    match m {
        None => Err(Error::NoModulus(name.to_string())),
        Some(m) => Ok(m.lipschitz_const()),
    }
}

/// Per-variable Lipschitz sensitivity of a term, or `None` when some symbol is not Lipschitz.
fn term_sens(t: &Term, sig: &Signature) -> Result<Option<Sens>> {
    match t {
        Term::Var(v) => Ok(Some(BTreeMap::from([(v.idx, Q::one())]))),
        Term::Const(_) => Ok(Some(Sens::new())),
        Term::App(f, args) => {
            let Some(l) = lip_of(&sig.fn_sig(f)?.modulus, f)? else { return Ok(None) };
            let mut out = Sens::new();
            for a in args {
                let Some(s) = term_sens(a, sig)? else { return Ok(None) };
                sens_add(&mut out, &s, l);
            }
            Ok(Some(out))
        }
    }
}

fn formula_sens(f: &Formula, sig: &Signature) -> Result<Option<Sens>> {
    Ok(match f {
        Formula::Const(_) => Some(Sens::new()),
        Formula::Dist(a, b) => {
            let (Some(x), Some(y)) = (term_sens(a, sig)?, term_sens(b, sig)?) else { return Ok(None) };
            let mut out = x;
            sens_add(&mut out, &y, Q::one());
            Some(out)
        }
        Formula::Pred(p, args) => {
            let Some(l) = lip_of(&sig.pred_sig(p)?.modulus, p)? else { return Ok(None) };
            let mut out = Sens::new();
            for a in args {
                let Some(s) = term_sens(a, sig)? else { return Ok(None) };
                sens_add(&mut out, &s, l);
            }
            Some(out)
        }
        Formula::Max(xs) | Formula::Min(xs) => {
            let mut out = Sens::new();
            for x in xs {
                let Some(s) = formula_sens(x, sig)? else { return Ok(None) };
                sens_max(&mut out, &s);
            }
            Some(out)
        }
        Formula::Neg(a) | Formula::Cut(_, a) => formula_sens(a, sig)?,
        Formula::Monus(a, b) => {
            let (Some(x), Some(y)) = (formula_sens(a, sig)?, formula_sens(b, sig)?) else { return Ok(None) };
            let mut out = x;
            sens_add(&mut out, &y, Q::one());
            Some(out)
        }
        Formula::Clamp(a, _, x) => formula_sens(x, sig)?.map(|s| {
            let mut out = Sens::new();
            sens_add(&mut out, &s, a.abs());
            out
        }),
        Formula::Quant(_, v, body) => formula_sens(body, sig)?.map(|mut s| {
            s.remove(&v.idx);
            s
        }),
    })
}

/// Generic modulus of a term with respect to total variable displacement.
/// Each symbol application halves its input radius so strict and non-strict
/// readings of a modulus compose soundly.
fn term_modulus(t: &Term, sig: &Signature) -> Result<Modulus> {
    match t {
        Term::Var(_) => Ok(Modulus::lipschitz(Q::one())),
        Term::Const(_) => Ok(Modulus::constant()),
        Term::App(f, args) => {
            let m = sig.fn_sig(f)?.modulus.clone().ok_or_else(|| Error::NoModulus(f.clone()))?;
            args_modulus(&m, args, sig)
        }
    }
}

fn args_modulus(m: &Modulus, args: &[Term], sig: &Signature) -> Result<Modulus> {
    let mut out = Modulus::constant();
    let share = m.clone();
    let n = int(2 * args.len().max(1) as i64);
    for a in args {
        let inner = term_modulus(a, sig)?;
        // ε ↦ Δ_a(Δ_sym(ε) / 2n)
        let outer = scale_output(&share, n);
        out = out.min(&Modulus::compose(&inner, &outer));
    }
    Ok(out)
}

fn scale_output(m: &Modulus, n: Q) -> Modulus {
    if m.points().is_empty() {
        return Modulus::from_points(vec![(Q::one(), Q::one() / n)]).unwrap_or_else(|_| Modulus::constant());
    }
    let pts = m.points().iter().map(|&(e, d)| (e, d / n)).collect();
    Modulus::from_points(pts).unwrap_or_else(|_| Modulus::constant())
}

fn generic_modulus(f: &Formula, sig: &Signature) -> Result<Modulus> {
    Ok(match f {
        Formula::Const(_) => Modulus::constant(),
        Formula::Dist(a, b) => {
            let ma = term_modulus(a, sig)?.scale_input(int(2));
            let mb = term_modulus(b, sig)?.scale_input(int(2));
            ma.min(&mb)
        }
        Formula::Pred(p, args) => {
            let m = sig.pred_sig(p)?.modulus.clone().ok_or_else(|| Error::NoModulus(p.clone()))?;
            args_modulus(&m, args, sig)?
        }
        Formula::Max(xs) | Formula::Min(xs) => {
            let mut out = Modulus::constant();
            for x in xs {
                out = out.min(&generic_modulus(x, sig)?);
            }
            out
        }
        Formula::Neg(a) | Formula::Cut(_, a) | Formula::Quant(_, _, a) => generic_modulus(a, sig)?,
        Formula::Monus(a, b) => {
            let ma = generic_modulus(a, sig)?.scale_input(int(2));
            let mb = generic_modulus(b, sig)?.scale_input(int(2));
            ma.min(&mb)
        }
        Formula::Clamp(a, _, x) => generic_modulus(x, sig)?.scale_input(a.abs()),
    })
}

/// A modulus of uniform continuity for `f`, with respect to the sum of the
/// displacements of its free variables. Exact Lipschitz bookkeeping is used
/// when every symbol is Lipschitz.
pub fn formula_modulus(f: &Formula, sig: &Signature) -> Result<Modulus> {
    sig.check(f)?;
    if let Some(s) = formula_sens(f, sig)? {
        let l = s.values().copied().fold(Q::zero(), |a, b| a.max(b));
        return Ok(Modulus::lipschitz(l));
    }
    generic_modulus(f, sig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::q::q;

    fn sig() -> Signature {
        let mut s = Signature { sorts: vec!["D".into()], ..Default::default() };
        s.predicates.insert("P".into(), PredSig { args: vec!["D".into()], modulus: Some(Modulus::lipschitz(int(2))) });
        s.predicates.insert("R".into(), PredSig { args: vec!["D".into(), "D".into()], modulus: Some(Modulus::lipschitz(int(1))) });
        s.functions.insert("f".into(), FnSig { args: vec!["D".into()], result: "D".into(), modulus: Some(Modulus::lipschitz(int(3))) });
        s.predicates.insert("Q".into(), PredSig { args: vec!["D".into()], modulus: None });
        s.constants.insert("a".into(), "D".into());
        s
    }

    #[test]
    fn lipschitz_composition() {
        let m = formula_modulus(&parse_formula("P(f(x0))").unwrap(), &sig()).unwrap();
        assert_eq!(m.lipschitz_const(), Some(int(6)));
    }

    #[test]
    fn cut_preserves_modulus() {
        let s = sig();
        let a = formula_modulus(&parse_formula("P(x0)").unwrap(), &s).unwrap();
        let b = formula_modulus(&parse_formula("cut3(P(x0))").unwrap(), &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quantified_variable_drops_out() {
        let m = formula_modulus(&parse_formula("sup x1 . max(R(x0,x1), d(x1,a))").unwrap(), &sig()).unwrap();
        assert_eq!(m.lipschitz_const(), Some(int(1)));
    }

    #[test]
    fn missing_modulus_is_reported() {
        assert_eq!(
            formula_modulus(&parse_formula("Q(x0)").unwrap(), &sig()),
            Err(Error::NoModulus("Q".into()))
        );
    }

    #[test]
    fn nonlipschitz_fallback_is_sound_at_sample_points() {
        let mut s = sig();
        let sq = Modulus::from_points(vec![(q(1, 4), q(1, 16)), (q(1, 1), q(1, 2))]).unwrap();
        s.predicates.insert("S".into(), PredSig { args: vec!["D".into()], modulus: Some(sq.clone()) });
        let m = formula_modulus(&parse_formula("max(S(f(x0)), d(x0,x1))").unwrap(), &s).unwrap();
        for k in 1..=8 {
            let e = q(k, 8);
            // S∘f needs radius below sq(e)/2/3 and d needs e/2
            assert!(m.eval(e) <= sq.eval(e) / int(6));
            assert!(m.eval(e) > Q::zero());
        }
    }

    #[test]
    fn sort_errors() {
        let mut s = sig();
        s.sorts.push("E".into());
        s.constants.insert("b".into(), "E".into());
        assert!(matches!(s.check(&parse_formula("d(a,b)").unwrap()), Err(Error::Sort(_))));
        assert!(matches!(s.check(&parse_formula("d(x0,x1)").unwrap()), Err(Error::Sort(_))));
        assert!(s.check(&parse_formula("d(x0,b)").unwrap()).is_ok());
        assert!(matches!(s.check(&parse_formula("P(x0:E)").unwrap()), Err(Error::Sort(_))));
        assert!(matches!(s.check(&parse_formula("Z(x0)").unwrap()), Err(Error::UnknownSymbol(_))));
    }
}
