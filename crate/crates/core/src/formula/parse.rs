use super::{Formula, Quant, Term, Var};
use crate::error::{Error, Result};
use crate::q::Q;

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

fn is_var_name(s: &str) -> Option<u32> {
    let rest = s.strip_prefix('x')?;
    if rest.is_empty() || !rest.bytes().all(|c| c.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

fn cut_index(s: &str) -> Option<u32> {
    let rest = s.strip_prefix("cut")?;
    let rest = rest.strip_prefix('_').unwrap_or(rest);
    if rest.is_empty() || !rest.bytes().all(|c| c.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

impl<'a> Cursor<'a> {
    fn new(s: &'a str) -> Self {
        Cursor { src: s.as_bytes(), pos: 0 }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let before = &self.src[..self.pos.min(self.src.len())];
        let line = before.iter().filter(|&&c| c == b'\n').count() + 1;
        let col = before.iter().rev().take_while(|&&c| c != b'\n').count() + 1;
        Error::Syntax { line, col, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            let found = self.peek().map(|b| format!("'{}'", b as char)).unwrap_or_else(|| "end of input".into());
            Err(self.err(format!("expected '{}', found {found}", c as char)))
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        if self.pos < self.src.len() && is_ident_start(self.src[self.pos]) {
            while self.pos < self.src.len() && is_ident(self.src[self.pos]) {
                self.pos += 1;
            }
            Some(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
        } else {
            None
        }
    }

    fn number(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a number"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("number out of range"))
    }

    fn rational(&mut self) -> Result<Q> {
        let neg = self.eat(b'-');
        let p = self.number()?;
        let mut x = if self.eat(b'/') {
            let at = self.pos;
            let d = self.number()?;
            if d == 0 {
                self.pos = at;
                return Err(self.err("zero denominator"));
            }
            Q::new(p, d)
        } else {
            Q::from_integer(p)
        };
        if neg {
            x = -x;
        }
        Ok(x)
    }

    fn sort(&mut self) -> Result<Option<String>> {
        if self.eat(b':') {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && is_ident(self.src[self.pos]) {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected a sort name"));
            }
            Ok(Some(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()))
        } else {
            Ok(None)
        }
    }

    fn node_literal(&mut self) -> Result<String> {
        self.expect(b'<')?;
        let mut s = String::from("<");
        let mut first = true;
        loop {
            if self.eat(b'>') {
                break;
            }
            if !first {
                self.expect(b',')?;
            }
            first = false;
            let n = self.number()?;
            if s.len() > 1 {
                s.push(',');
            }
            s.push_str(&n.to_string());
        }
        s.push('>');
        Ok(s)
    }

    fn term(&mut self) -> Result<Term> {
        match self.peek() {
            Some(b'<') => Ok(Term::Const(self.node_literal()?)),
            Some(c) if is_ident_start(c) => {
                let at = self.pos;
                let name = self.ident().unwrap();
                if let Some(idx) = is_var_name(&name) {
                    let sort = self.sort()?;
                    return Ok(Term::Var(Var { idx, sort }));
                }
                if name == "d" {
                    self.pos = at;
                    return Err(self.err("'d' is reserved for the metric"));
                }
                if self.eat(b'(') {
                    let args = self.term_list()?;
                    Ok(Term::App(name, args))
                } else {
                    Ok(Term::Const(name))
                }
            }
            _ => Err(self.err("expected a term")),
        }
    }

    fn term_list(&mut self) -> Result<Vec<Term>> {
        let mut args = vec![self.term()?];
        while self.eat(b',') {
            args.push(self.term()?);
        }
        self.expect(b')')?;
        Ok(args)
    }

    fn formula_list(&mut self) -> Result<Vec<Formula>> {
        let mut args = vec![self.formula()?];
        while self.eat(b',') {
            args.push(self.formula()?);
        }
        self.expect(b')')?;
        Ok(args)
    }

    fn formula(&mut self) -> Result<Formula> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(c) if c.is_ascii_digit() || c == b'-' => Ok(Formula::Const(self.rational()?)),
            Some(c) if is_ident_start(c) => {
                let at = self.pos;
                let name = self.ident().unwrap();
                match name.as_str() {
                    "sup" | "inf" => {
                        let kind = if name == "sup" { Quant::Sup } else { Quant::Inf };
                        let vat = self.pos;
                        let v = self.ident().and_then(|s| is_var_name(&s));
                        let Some(idx) = v else {
                            self.pos = vat;
                            return Err(self.err("expected a variable after quantifier"));
                        };
                        let sort = self.sort()?;
                        self.expect(b'.')?;
                        let body = self.formula()?;
                        Ok(Formula::Quant(kind, Var { idx, sort }, Box::new(body)))
                    }
                    "max" | "min" => {
                        self.expect(b'(')?;
                        let args = self.formula_list()?;
                        Ok(if name == "max" { Formula::Max(args) } else { Formula::Min(args) })
                    }
                    "neg" => {
                        self.expect(b'(')?;
                        let a = self.formula()?;
                        self.expect(b')')?;
                        Ok(Formula::Neg(Box::new(a)))
                    }
                    "monus" => {
                        self.expect(b'(')?;
                        let a = self.formula()?;
                        self.expect(b',')?;
                        let b = self.formula()?;
                        self.expect(b')')?;
                        Ok(Formula::Monus(Box::new(a), Box::new(b)))
                    }
                    "cut" => {
                        self.expect(b'<')?;
                        let m = self.cut_arg()?;
                        self.expect(b'>')?;
                        self.cut_body(m)
                    }
                    "clamp" => {
                        self.expect(b'<')?;
                        let a = self.rational()?;
                        self.expect(b',')?;
                        let b = self.rational()?;
                        self.expect(b'>')?;
                        self.expect(b'(')?;
                        let x = self.formula()?;
                        self.expect(b')')?;
                        Ok(Formula::Clamp(a, b, Box::new(x)))
                    }
                    "d" => {
                        self.expect(b'(')?;
                        let a = self.term()?;
                        self.expect(b',')?;
                        let b = self.term()?;
                        self.expect(b')')?;
                        Ok(Formula::Dist(a, b))
                    }
                    _ => {
                        if let Some(m) = cut_index(&name) {
                            if m == 0 {
                                self.pos = at;
                                return Err(self.err("cut index must be positive"));
                            }
                            return self.cut_body(m);
                        }
                        if is_var_name(&name).is_some() {
                            self.pos = at;
                            return Err(self.err("a variable is not a formula"));
                        }
                        if !self.eat(b'(') {
                            return Err(self.err(format!("expected '(' after predicate '{name}'")));
                        }
                        let args = self.term_list()?;
                        Ok(Formula::Pred(name, args))
                    }
                }
            }
            Some(c) => Err(self.err(format!("unexpected character '{}'", c as char))),
        }
    }

    fn cut_arg(&mut self) -> Result<u32> {
        let at = self.pos;
        let m = self.number()?;
        if m <= 0 || m > u32::MAX as i64 {
            self.pos = at;
            return Err(self.err("cut index must be positive"));
        }
        Ok(m as u32)
    }

    fn cut_body(&mut self, m: u32) -> Result<Formula> {
        self.expect(b'(')?;
        let a = self.formula()?;
        self.expect(b')')?;
        Ok(Formula::Cut(m, Box::new(a)))
    }

    fn finish(&mut self) -> Result<()> {
        if self.peek().is_some() {
            return Err(self.err("trailing input"));
        }
        Ok(())
    }
}

/// Parse one formula. Errors carry 1-based line and column.
pub fn parse_formula(src: &str) -> Result<Formula> {
    if !src.is_ascii() {
        let pos = src.char_indices().find(|(_, c)| !c.is_ascii()).map(|(i, _)| i).unwrap_or(0);
        let mut c = Cursor::new(src);
        c.pos = pos;
        return Err(c.err("non-ASCII character"));
    }
    let mut c = Cursor::new(src);
    let f = c.formula()?;
    c.finish()?;
    Ok(f)
}

pub fn parse_term(src: &str) -> Result<Term> {
    let mut c = Cursor::new(src);
    let t = c.term()?;
    c.finish()?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::q::q;

    #[test]
    fn metric_atom() {
        assert_eq!(parse_formula("d(x0,x1)").unwrap(), Formula::Dist(Term::var(0), Term::var(1)));
    }

    #[test]
    fn max_with_constant() {
        let f = parse_formula("max(P11(x0), 1/2)").unwrap();
        assert_eq!(f, Formula::Max(vec![Formula::Pred("P11".into(), vec![Term::var(0)]), Formula::Const(q(1, 2))]));
    }

    #[test]
    fn quantifier() {
        let f = parse_formula("sup x0 . d(x0,x0)").unwrap();
        assert_eq!(f, Formula::Quant(Quant::Sup, Var::new(0), Box::new(Formula::Dist(Term::var(0), Term::var(0)))));
    }

    #[test]
    fn cut_spellings() {
        let a = parse_formula("cut3(d(x0,x1))").unwrap();
        assert_eq!(parse_formula("cut_3(d(x0,x1))").unwrap(), a);
        assert_eq!(parse_formula("cut<3>(d(x0,x1))").unwrap(), a);
    }

    #[test]
    fn sorted_vars_and_literals() {
        let f = parse_formula("inf x2:D2 . ee(f1(x0:D1), x2:D2, <0,1>)").unwrap();
        assert_eq!(f.to_string(), "inf x2:D2 . ee(f1(x0:D1),x2:D2,<0,1>)");
    }

    #[test]
    fn syntax_error_position() {
        match parse_formula("max(d(x0,x1),\n  neg(") {
            Err(Error::Syntax { line, col, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(col, 7);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_formula("d(x0,x1) x"), Err(Error::Syntax { line: 1, col: 10, .. })));
        assert!(parse_formula("cut0(1)").is_err());
        assert!(parse_formula("1/0").is_err());
    }

    #[test]
    fn clamp_round_trip() {
        let f = parse_formula("clamp<2,-1/2>(monus(d(x0,x1), 1/4))").unwrap();
        assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
    }
}
