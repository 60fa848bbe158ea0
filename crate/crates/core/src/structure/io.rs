//! Line-oriented text format for finite structures.
//!
//! ```text
//! [sorts]
//! D tree
//! [points]
//! D <>
//! D <0>
//! [metric D]
//! 1 0
//! [fn f1]
//! sig D -> D
//! 0 -> 0
//! 1 -> 0
//! [pred P]
//! sig D
//! 0 : 1/2
//! [moduli]
//! f1 lip(1)
//! [constants]
//! root D 0
//! [density]
//! D 1/4
//! [meta]
//! kind example
//! ```
//! Tree metrics list `child parent` lines; dense metrics list `i j value` for `i < j`.

use std::collections::BTreeMap;

use num_traits::Zero;

use super::{check_structure, FiniteStructure, FnTable, Metric, PredTable};
use crate::error::{Error, Result};
use crate::modulus::Modulus;
use crate::q::{fmt_q, parse_q, Q};

pub fn write_structure(m: &FiniteStructure) -> String {
    let m = m.densified();
    let mut s = String::from("[sorts]\n");
    for so in &m.sorts {
        let kind = match so.metric {
            Metric::Tree { .. } => "tree",
            Metric::Discrete => "discrete",
            _ => "dense",
        };
        s.push_str(&format!("{} {kind}\n", so.name));
    }
    s.push_str("[points]\n");
    for so in &m.sorts {
        for n in &so.names {
            s.push_str(&format!("{} {n}\n", so.name));
        }
    }
    for so in &m.sorts {
        match &so.metric {
            Metric::Tree { parent, .. } => {
                s.push_str(&format!("[metric {}]\n", so.name));
                for (i, p) in parent.iter().enumerate() {
                    if let Some(p) = p {
                        s.push_str(&format!("{i} {p}\n"));
                    }
                }
            }
            Metric::Dense(_) => {
                s.push_str(&format!("[metric {}]\n", so.name));
                for i in 0..so.len() {
                    for j in i + 1..so.len() {
                        s.push_str(&format!("{i} {j} {}\n", fmt_q(&so.dist(i, j))));
                    }
                }
            }
            _ => {}
        }
    }
    for f in &m.functions {
        s.push_str(&format!("[fn {}]\nsig", f.name));
        for a in &f.args {
            s.push_str(&format!(" {}", m.sorts[*a].name));
        }
        s.push_str(&format!(" -> {}\n", m.sorts[f.result].name));
        for t in m.tuples(&f.args) {
            let r = m.apply(m.function_index(&f.name).unwrap(), &t);
            let args: Vec<String> = t.iter().map(|x| x.to_string()).collect();
            s.push_str(&format!("{} -> {r}\n", args.join(" ")));
        }
    }
    for p in &m.predicates {
        s.push_str(&format!("[pred {}]\nsig", p.name));
        for a in &p.args {
            s.push_str(&format!(" {}", m.sorts[*a].name));
        }
        s.push('\n');
        let pi = m.predicate_index(&p.name).unwrap();
        for t in m.tuples(&p.args) {
            let args: Vec<String> = t.iter().map(|x| x.to_string()).collect();
            s.push_str(&format!("{} : {}\n", args.join(" "), fmt_q(&m.pred_value(pi, &t))));
        }
    }
    s.push_str("[moduli]\n");
    for f in &m.functions {
        if let Some(md) = &f.modulus {
            s.push_str(&format!("{} {md}\n", f.name));
        }
    }
    for p in &m.predicates {
        if let Some(md) = &p.modulus {
            s.push_str(&format!("{} {md}\n", p.name));
        }
    }
    s.push_str("[constants]\n");
    for (c, (si, p)) in &m.constants {
        s.push_str(&format!("{c} {} {p}\n", m.sorts[*si].name));
    }
    s.push_str("[density]\n");
    for so in &m.sorts {
        if let Some(r) = so.density {
            s.push_str(&format!("{} {}\n", so.name, fmt_q(&r)));
        }
    }
    s.push_str("[meta]\n");
    s.push_str(&format!("kind {}\n", m.meta.kind));
    if let Some(d) = m.meta.depth {
        s.push_str(&format!("depth {d}\n"));
    }
    if let Some(b) = m.meta.branch {
        s.push_str(&format!("branch {b}\n"));
    }
    for n in &m.meta.notes {
        s.push_str(&format!("note {n}\n"));
    }
    s
}

struct Sym {
    args: Vec<String>,
    result: Option<String>,
    rows: Vec<(Vec<usize>, String)>,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Syntax { line, col: 1, msg: msg.into() }
}

/// Parse and validate a structure; any `check_structure` violation is an error.
pub fn read_structure(text: &str) -> Result<FiniteStructure> {
    let mut section = String::new();
    let mut sorts: Vec<(String, String)> = Vec::new();
    let mut points: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut metric_rows: BTreeMap<String, Vec<(usize, Vec<String>)>> = BTreeMap::new();
    let mut syms: Vec<(bool, String, Sym)> = Vec::new();
    let mut moduli: BTreeMap<String, Modulus> = BTreeMap::new();
    let mut constants: Vec<(String, String, usize)> = Vec::new();
    let mut density: Vec<(String, Q)> = Vec::new();
    let mut meta = super::Meta::default();
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            section = line[1..line.len() - 1].trim().to_string();
            if let Some(n) = section.strip_prefix("fn ") {
                syms.push((true, n.trim().to_string(), Sym { args: vec![], result: None, rows: vec![] }));
            } else if let Some(n) = section.strip_prefix("pred ") {
                syms.push((false, n.trim().to_string(), Sym { args: vec![], result: None, rows: vec![] }));
            }
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let sec = section.split_whitespace().next().unwrap_or("");
        match sec {
            "sorts" => {
                if toks.len() != 2 {
                    return Err(perr(ln, "expected '<sort> tree|dense|discrete'"));
                }
                sorts.push((toks[0].to_string(), toks[1].to_string()));
            }
            "points" => {
                let (s, name) = line.split_once(char::is_whitespace).ok_or_else(|| perr(ln, "expected '<sort> <name>'"))?;
                points.entry(s.to_string()).or_default().push(name.trim().to_string());
            }
            "metric" => {
                let s = section["metric".len()..].trim().to_string();
                metric_rows.entry(s).or_default().push((ln, toks.iter().map(|t| t.to_string()).collect()));
            }
            "fn" | "pred" => {
                let sym = &mut syms.last_mut().unwrap().2;
                if toks[0] == "sig" {
                    let rest = &toks[1..];
                    if let Some(i) = rest.iter().position(|t| *t == "->") {
                        sym.args = rest[..i].iter().map(|t| t.to_string()).collect();
                        sym.result = rest.get(i + 1).map(|t| t.to_string());
                    } else {
                        sym.args = rest.iter().map(|t| t.to_string()).collect();
                    }
                } else {
                    let sep = if sec == "fn" { "->" } else { ":" };
                    let (lhs, rhs) = line.split_once(sep).ok_or_else(|| perr(ln, format!("expected '{sep}'")))?;
                    let args = lhs
                        .split_whitespace()
                        .map(|t| t.parse::<usize>().map_err(|_| perr(ln, format!("bad index '{t}'"))))
                        .collect::<Result<Vec<_>>>()?;
                    sym.rows.push((args, rhs.trim().to_string()));
                }
            }
            "moduli" => {
                let (n, md) = line.split_once(char::is_whitespace).ok_or_else(|| perr(ln, "expected '<symbol> <modulus>'"))?;
                moduli.insert(n.to_string(), Modulus::parse(md.trim())?);
            }
            "constants" => {
                if toks.len() != 3 {
                    return Err(perr(ln, "expected '<name> <sort> <index>'"));
                }
                let p = toks[2].parse().map_err(|_| perr(ln, "bad index"))?;
                constants.push((toks[0].to_string(), toks[1].to_string(), p));
            }
            "density" => {
                if toks.len() != 2 {
                    return Err(perr(ln, "expected '<sort> <radius>'"));
                }
                density.push((toks[0].to_string(), parse_q(toks[1])?));
            }
            "meta" => {
                let (k, v) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
                match k {
                    "kind" => meta.kind = v.trim().to_string(),
                    "depth" => meta.depth = v.trim().parse().ok(),
                    "branch" => meta.branch = v.trim().parse().ok(),
                    _ => meta.notes.push(v.trim().to_string()),
                }
            }
            other => return Err(perr(ln, format!("line outside a known section ({other})"))),
        }
    }
    let mut m = FiniteStructure::new(&meta.kind);
    for (name, kind) in &sorts {
        let names = points.remove(name).unwrap_or_default();
        let n = names.len();
        let rows = metric_rows.remove(name).unwrap_or_default();
        let metric = match kind.as_str() {
            "discrete" => Metric::Discrete,
            "tree" => {
                let mut parent = vec![None; n];
                for (ln, r) in rows {
                    let (Some(c), Some(p)) = (r.first().and_then(|x| x.parse::<usize>().ok()), r.get(1).and_then(|x| x.parse::<usize>().ok())) else {
                        return Err(perr(ln, "expected '<child> <parent>'"));
                    };
                    if c >= n {
                        return Err(perr(ln, "index out of range"));
                    }
                    parent[c] = Some(p);
                }
                Metric::tree(parent)?
            }
            "dense" => {
                let mut t = vec![Q::zero(); n * n];
                for (ln, r) in rows {
                    if r.len() != 3 {
                        return Err(perr(ln, "expected '<i> <j> <value>'"));
                    }
                    let i: usize = r[0].parse().map_err(|_| perr(ln, "bad index"))?;
                    let j: usize = r[1].parse().map_err(|_| perr(ln, "bad index"))?;
                    if i >= n || j >= n {
                        return Err(perr(ln, "index out of range"));
                    }
                    let v = parse_q(&r[2])?;
                    t[i * n + j] = v;
                    t[j * n + i] = v;
                }
                Metric::Dense(t)
            }
            other => return Err(Error::Parse(format!("unknown metric kind {other}"))),
        };
        m.add_sort(name, names, metric);
    }
    for (is_fn, name, sym) in syms {
        let args: Vec<&str> = sym.args.iter().map(|s| s.as_str()).collect();
        let sorts_ix = args.iter().map(|a| m.sort_index(a)).collect::<Result<Vec<_>>>()?;
        let size: usize = sorts_ix.iter().map(|&s| m.sorts[s].len()).product();
        let md = moduli.get(&name).cloned();
        if is_fn {
            let mut t = vec![usize::MAX; size];
            for (a, r) in &sym.rows {
                let o = m.offset(&sorts_ix, a);
                t[o] = r.parse().map_err(|_| Error::Parse(format!("{name}: bad result '{r}'")))?;
            }
            if t.contains(&usize::MAX) {
                return Err(Error::Parse(format!("{name}: incomplete table")));
            }
            let res = sym.result.ok_or_else(|| Error::Parse(format!("{name}: missing result sort")))?;
            m.add_function(&name, &args, &res, FnTable::Dense(t), md)?;
        } else {
            let mut t = vec![None; size];
            for (a, r) in &sym.rows {
                t[m.offset(&sorts_ix, a)] = Some(parse_q(r)?);
            }
            if t.contains(&None) {
                return Err(Error::Parse(format!("{name}: incomplete table")));
            }
            m.add_predicate(&name, &args, PredTable::Dense(t.into_iter().map(|x| x.unwrap()).collect()), md)?;
        }
    }
    for (c, s, p) in constants {
        let si = m.sort_index(&s)?;
        m.add_constant(&c, si, p);
    }
    for (s, r) in density {
        let si = m.sort_index(&s)?;
        m.sorts[si].density = Some(r);
    }
    m.meta = meta;
    let report = check_structure(&m);
    if !report.is_empty() {
        let lines: Vec<String> = report.iter().map(|v| v.to_string()).collect();
        return Err(Error::Invalid(format!("structure fails validation: {}", lines.join("; "))));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::q::q;

    #[test]
    fn round_trip() {
        let mut m = FiniteStructure::new("demo");
        m.add_sort("D", vec!["<>".into(), "<0>".into(), "<1>".into()], Metric::tree(vec![None, Some(0), Some(0)]).unwrap());
        m.add_sort("E", vec!["a".into(), "b".into()], Metric::Dense(vec![q(0, 1), q(1, 3), q(1, 3), q(0, 1)]));
        m.add_function("f", &["D"], "D", FnTable::Dense(vec![0, 0, 0]), Some(Modulus::lipschitz(q(1, 1)))).unwrap();
        m.add_predicate("P", &["D", "E"], PredTable::Dense(vec![q(0, 1); 6]), Some(Modulus::lipschitz(q(1, 1)))).unwrap();
        m.add_constant("root", 0, 0);
        let text = write_structure(&m);
        let back = read_structure(&text).unwrap();
        assert_eq!(write_structure(&back), text);
        assert_eq!(back.dist(1, 0, 1), q(1, 3));
    }

    #[test]
    fn invalid_table_is_rejected() {
        let text = "[sorts]\nD dense\n[points]\nD a\nD b\n[metric D]\n0 1 0\n";
        assert!(matches!(read_structure(text), Err(Error::Invalid(_))));
    }
}
