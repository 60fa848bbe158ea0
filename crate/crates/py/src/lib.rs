//! Python bindings. Rationals cross the boundary as `fractions.Fraction`; models and
//! types are named by the same constructor strings the command line accepts.

use std::collections::BTreeMap;

use mlw_cli::{load_model, load_type, TypeSource};
use mlw_core::forge::{build_generic, parse_schedule, resolve_type_source, Budget, WitnessBank};
use mlw_core::formula::parse_formula;
use mlw_core::models::DEFAULT_CAP;
use mlw_core::q::{parse_q, Q};
use mlw_core::structure::{check_structure, find_iso, realizes, write_structure, Compiled, IsoOutcome, Sublanguage};
use mlw_core::trees::parse_tree;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyTuple;

fn err(e: mlw_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn fraction(py: Python<'_>, q: &Q) -> PyResult<PyObject> {
    let cls = py.import_bound("fractions")?.getattr("Fraction")?;
    Ok(cls.call1((*q.numer(), *q.denom()))?.unbind())
}

fn source(kind: &str, dsl: Option<String>) -> TypeSource {
    TypeSource { ty: kind.to_string(), dsl, colours: None, levels: None }
}

/// Model text for a constructor such as `N(depth=3,branch=2)`.
#[pyfunction]
#[pyo3(signature = (ctor, cap = DEFAULT_CAP))]
fn build_model(ctor: &str, cap: usize) -> PyResult<String> {
    Ok(write_structure(&load_model(ctor, cap).map_err(err)?))
}

/// `(kind, detail)` for every violated metric or modulus requirement.
#[pyfunction]
fn check_model(model: &str) -> PyResult<Vec<(String, String)>> {
    let m = load_model(model, DEFAULT_CAP).map_err(err)?;
    Ok(check_structure(&m).into_iter().map(|v| (v.kind, v.detail)).collect())
}

/// Value of a formula with free variables assigned by point name, e.g. `{0: "<>"}`.
#[pyfunction]
#[pyo3(signature = (model, formula, assign = BTreeMap::new()))]
fn eval(py: Python<'_>, model: &str, formula: &str, assign: BTreeMap<u32, String>) -> PyResult<PyObject> {
    let m = load_model(model, DEFAULT_CAP).map_err(err)?;
    let f = parse_formula(formula).map_err(err)?;
    let c = Compiled::new(&f, &m).map_err(err)?;
    let mut asg = BTreeMap::new();
    for (v, name) in assign {
        asg.insert(v, m.resolve(&name).map_err(err)?.1);
    }
    fraction(py, &c.eval(&asg).map_err(err)?)
}

/// Realizers of a fragment, each a tuple of point names.
#[pyfunction]
#[pyo3(signature = (model, kind, frag = 0, tol = "0", dsl = None))]
fn realizers(
    py: Python<'_>,
    model: &str,
    kind: &str,
    frag: usize,
    tol: &str,
    dsl: Option<String>,
) -> PyResult<Vec<Py<PyTuple>>> {
    let m = load_model(model, DEFAULT_CAP).map_err(err)?;
    let t = load_type(&source(kind, dsl), Some(&m)).map_err(err)?;
    let tol = parse_q(tol).map_err(err)?;
    let sorts: Vec<usize> =
        t.vars.iter().map(|v| v.sort.as_ref().and_then(|s| m.sort_index(s).ok()).unwrap_or(0)).collect();
    let got = realizes(&m, &t, frag, tol).map_err(err)?;
    Ok(got
        .iter()
        .map(|tup| {
            let names: Vec<String> = tup.iter().zip(&sorts).map(|(&p, &s)| m.point_name(s, p).to_string()).collect();
            PyTuple::new_bound(py, names).unbind()
        })
        .collect())
}

/// Rank of a tree term in Cantor normal form, e.g. `"w+2"`.
#[pyfunction]
fn tree_rank(dsl: &str) -> PyResult<String> {
    Ok(parse_tree(dsl).map_err(err)?.rank().to_string())
}

#[pyfunction]
fn well_founded(dsl: &str) -> PyResult<bool> {
    Ok(parse_tree(dsl).map_err(err)?.well_founded())
}

/// A point map `[(sort, a, b), ...]`, or `None` with the reason when no isomorphism exists.
#[pyfunction]
fn isomorphism(a: &str, b: &str) -> PyResult<(Option<Vec<(String, String, String)>>, String)> {
    let (x, y) = (load_model(a, DEFAULT_CAP).map_err(err)?, load_model(b, DEFAULT_CAP).map_err(err)?);
    Ok(match find_iso(&x, &y, &Sublanguage::all(&x)) {
        IsoOutcome::Found(w) => {
            let mut out = Vec::new();
            for (s, map) in w.maps.iter().enumerate() {
                for (p, q) in map {
                    out.push((x.sorts[s].name.clone(), x.point_name(s, *p).to_string(), y.point_name(s, *q).to_string()));
                }
            }
            (Some(out), "found".into())
        }
        IsoOutcome::Refused(why) => (None, format!("refused: {why}")),
        IsoOutcome::Undecided(why) => (None, format!("undecided: {why}")),
    })
}

/// Run a schedule (the text of a schedule file) against a bank; `(complete, transcript)`.
#[pyfunction]
fn forge(schedule: &str, bank: &str) -> PyResult<(bool, String)> {
    let types = |s: &str| resolve_type_source(s, None);
    let specs = parse_schedule(schedule, &types).map_err(err)?;
    let b = WitnessBank::parse(bank).map_err(err)?;
    let run = build_generic(&specs, &b, &Budget::default());
    Ok((run.complete(), run.transcript()))
}

/// The command line in-process: `(exit code, stdout, stderr)`.
#[pyfunction]
fn cli(args: Vec<String>) -> (i32, String, String) {
    let out = mlw_cli::run(std::iter::once("mlw".to_string()).chain(args));
    (out.code, out.stdout, out.stderr)
}

#[pymodule]
fn mlw(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(build_model, m)?)?;
    m.add_function(wrap_pyfunction!(check_model, m)?)?;
    m.add_function(wrap_pyfunction!(eval, m)?)?;
    m.add_function(wrap_pyfunction!(realizers, m)?)?;
    m.add_function(wrap_pyfunction!(tree_rank, m)?)?;
    m.add_function(wrap_pyfunction!(well_founded, m)?)?;
    m.add_function(wrap_pyfunction!(isomorphism, m)?)?;
    m.add_function(wrap_pyfunction!(forge, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
