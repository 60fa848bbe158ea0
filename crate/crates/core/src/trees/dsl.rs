//! Parser for the tree construction language:
//! `T1 | T2 | full | chain(n) | comb | finite{<node>;...} | dsum(t[,t...]) | graft(t,t)`.

use super::{FiniteTree, Node, Sym, TreeTerm};
use crate::error::{Error, Result};

pub fn parse_tree(src: &str) -> Result<TreeTerm> {
    let mut p = P { s: src.as_bytes(), i: 0 };
    let t = p.term()?;
    p.ws();
    if p.i < p.s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(t)
}

struct P<'a> {
    s: &'a [u8],
    i: usize,
}

impl P<'_> {
    fn err(&self, msg: &str) -> Error {
        let before = &self.s[..self.i.min(self.s.len())];
        let line = before.iter().filter(|&&c| c == b'\n').count() + 1;
        let col = self.i - before.iter().rposition(|&c| c == b'\n').map_or(0, |p| p + 1) + 1;
        Error::Syntax { line, col, msg: msg.to_string() }
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.i).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.i += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn ident(&mut self) -> String {
        self.ws();
        let st = self.i;
        while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_') {
            self.i += 1;
        }
        String::from_utf8_lossy(&self.s[st..self.i]).into_owned()
    }

    fn nat(&mut self) -> Result<u32> {
        self.ws();
        let st = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        if st == self.i {
            return Err(self.err("expected a natural number"));
        }
        std::str::from_utf8(&self.s[st..self.i]).unwrap().parse().map_err(|_| self.err("number too large"))
    }

    fn term(&mut self) -> Result<TreeTerm> {
        let at = self.i;
        let name = self.ident();
        let t = match name.to_ascii_lowercase().as_str() {
            "t1" => TreeTerm::T1,
            "t2" => TreeTerm::T2,
            "full" => TreeTerm::Full,
            "comb" => TreeTerm::Comb,
            "chain" => {
                self.expect(b'(')?;
                let n = self.nat()?;
                self.expect(b')')?;
                TreeTerm::Chain(n)
            }
            "finite" => {
                self.expect(b'{')?;
                let mut nodes = Vec::new();
                if self.peek() != Some(b'}') {
                    loop {
                        nodes.push(self.node()?);
                        if self.peek() == Some(b';') {
                            self.i += 1;
                        } else {
                            break;
                        }
                    }
                }
                self.expect(b'}')?;
                let ft = FiniteTree::new(nodes).map_err(|e| self.err(&e.to_string()))?;
                TreeTerm::Finite(ft)
            }
            "dsum" => {
                self.expect(b'(')?;
                let mut v = vec![self.term()?];
                while self.peek() == Some(b',') {
                    self.i += 1;
                    v.push(self.term()?);
                }
                self.expect(b')')?;
                if v.len() == 1 {
                    TreeTerm::DSumOmega(Box::new(v.pop().unwrap()))
                } else {
                    TreeTerm::DSum(v)
                }
            }
            "graft" => {
                self.expect(b'(')?;
                let s = self.term()?;
                self.expect(b',')?;
                let t = self.term()?;
                self.expect(b')')?;
                TreeTerm::Graft(Box::new(s), Box::new(t))
            }
            "" => return Err(self.err("expected a tree term")),
            other => {
                self.i = at;
                self.ws();
                return Err(self.err(&format!("unknown tree constructor '{other}'")));
            }
        };
        Ok(t)
    }

    /// `<1,2,0>` or `<(1,0),(0,3)>` for letters of the wide tree.
    fn node(&mut self) -> Result<Node> {
        self.expect(b'<')?;
        let mut out = Vec::new();
        if self.peek() == Some(b'>') {
            self.i += 1;
            return Ok(out);
        }
        loop {
            if self.peek() == Some(b'(') {
                self.i += 1;
                let a = self.nat()?;
                self.expect(b',')?;
                let b = self.nat()?;
                self.expect(b')')?;
                out.push(Sym::P(a, b));
            } else {
                out.push(Sym::N(self.nat()?));
            }
            match self.peek() {
                Some(b',') => self.i += 1,
                Some(b'>') => {
                    self.i += 1;
                    return Ok(out);
                }
                _ => return Err(self.err("expected ',' or '>'")),
            }
        }
    }
}

/// Parses a single node literal such as `<1,2,5>`.
pub fn parse_node(src: &str) -> Result<Node> {
    let mut p = P { s: src.as_bytes(), i: 0 };
    let n = p.node()?;
    p.ws();
    if p.i < p.s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(n)
}
