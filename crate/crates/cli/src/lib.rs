//! Command-line front end. `run` parses an argument vector, executes one verb and
//! returns the report text plus an exit code; nothing depends on hidden state.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlw_core::forge::{
    build_generic, extract_premodel, homogeneity_experiment, parse_schedule, replay, resolve_type_source, Budget,
    WitnessBank,
};
use mlw_core::formula::{parse_formula, prenex, Formula};
use mlw_core::models::{
    build_model, build_type, kfamily_check, n2_model, n3_model, n3_pair_trees, naturalize, parse_pair_tree,
    perturb_colour, pred_gap, split_top, window_pair, KFamily, ModelCtor, N2Params, N3Params, TypeParams, Window,
    DEFAULT_CAP,
};
use mlw_core::q::{fmt_q, parse_q, Q};
use mlw_core::structure::{
    best_lipschitz, check_structure, eval_bounds, find_iso, read_structure, realization_tree, realizes, theory_fragment,
    write_structure, Assignment, Compiled, FiniteStructure, IsoOutcome, Sublanguage,
};
use mlw_core::trees::{
    baire_dist, fmt_node, pair_tree_dist, parse_node, parse_tree, project, tree_space_dist, FiniteTree, TreeTerm,
};
use mlw_core::types::{omega_type, type_and, type_or, PartialType};
use mlw_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "mlw", version, about = "Finite-structure laboratory for metric continuous logic")]
pub struct Cli {
    /// Also write the report's table as CSV to this path.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Seed for commands that draw random samples.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Point budget for model builds.
    #[arg(long, global = true)]
    pub cap: Option<usize>,
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build or validate a model.
    Model {
        #[command(subcommand)]
        op: ModelOp,
    },
    /// Evaluate a formula at an assignment.
    Eval(EvalArgs),
    /// Build, realize and combine types.
    Type {
        #[command(subcommand)]
        op: TypeOp,
    },
    /// Symbolic trees: ranks, distances, truncations, projections.
    Tree {
        #[command(subcommand)]
        op: TreeOp,
    },
    /// Tree-to-type reductions checked on finite truncations.
    Reduce {
        #[command(subcommand)]
        op: ReduceOp,
    },
    /// Search for an isomorphism between two models or two windows.
    Iso(IsoArgs),
    /// Henkin-style forcing runs.
    Forge {
        #[command(subcommand)]
        op: ForgeOp,
    },
    /// Tabular reports, suited to --csv.
    Report {
        #[command(subcommand)]
        op: ReportOp,
    },
}

#[derive(Subcommand, Debug)]
pub enum ModelOp {
    /// Print a model in the text format (or write it with --out).
    Build {
        #[arg(long)]
        model: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the metric and modulus checks.
    Check {
        #[arg(long)]
        model: String,
        /// Also report the best Lipschitz constant of every symbol.
        #[arg(long)]
        best: bool,
    },
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Constructor such as `N(depth=3,branch=2)` or a model file.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub formula: String,
    /// `x0=<point>`; repeat or separate with commas.
    #[arg(long)]
    pub assign: Vec<String>,
    /// Report bounds for the intended model as well.
    #[arg(long)]
    pub bounds: bool,
}

#[derive(Args, Debug, Clone)]
pub struct TypeSource {
    /// A type file, or a built-in kind `sm:<m>`, `s0_branch`, `s0_escape`, `tS`, `tR:<point>`, `t_T2`.
    #[arg(long = "type")]
    pub ty: String,
    /// Tree for `tS`, in the tree language.
    #[arg(long)]
    pub dsl: Option<String>,
    /// Colour count for `sm` and `t_T2`; read off the model when omitted.
    #[arg(long)]
    pub colours: Option<usize>,
    /// Colour levels for `t_T2`; read off the model when omitted.
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum TypeOp {
    /// Print a type, or one of its fragments.
    Build {
        #[command(flatten)]
        src: TypeSource,
        #[arg(long)]
        frag: Option<usize>,
        #[arg(long)]
        model: Option<String>,
    },
    /// List realizers of a fragment; exit 1 when there are none.
    Check {
        #[arg(long)]
        model: String,
        #[command(flatten)]
        src: TypeSource,
        #[arg(long, default_value_t = 0)]
        frag: usize,
        #[arg(long, default_value = "0")]
        tol: String,
    },
    /// Realizers of the disjunction (`or`) or conjunction (`and`) of two types.
    Pair {
        #[arg(long)]
        model: String,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[arg(long, value_enum)]
        op: PairOp,
        #[arg(long, default_value_t = 0)]
        frag: usize,
        #[arg(long, default_value = "0")]
        tol: String,
    },
    /// The sequence type of a 1-type; with a model, its realizers.
    Omega {
        #[command(flatten)]
        src: TypeSource,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value = "0")]
        tol: String,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum PairOp {
    Or,
    And,
}

#[derive(Subcommand, Debug)]
pub enum TreeOp {
    /// Rank in Cantor normal form; with --depth, the rank of the truncation.
    Rank {
        #[arg(long)]
        dsl: String,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = 3)]
        branch: u32,
    },
    /// Distance between nodes, tree truncations, or pair trees (--pairs).
    Dist {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        pairs: bool,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 4)]
        branch: u32,
    },
    /// Nodes of length ≤ depth with entries below branch.
    Truncate {
        #[arg(long)]
        dsl: String,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        branch: u32,
    },
    /// Section of a pair tree at a node.
    Project {
        #[arg(long)]
        pairs: String,
        #[arg(long)]
        x: String,
        #[arg(long, default_value_t = 4)]
        branch: u32,
    },
    /// Exit 0 for a well-founded tree, 1 otherwise.
    Wf {
        #[arg(long)]
        dsl: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum ReduceOp {
    /// Realization of the tree type fragments on a two-sorted truncation.
    #[command(name = "tS")]
    Ts {
        #[arg(long)]
        dsl: String,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Realization of the pair-tree type fragments on a three-sorted truncation.
    #[command(name = "tR")]
    Tr {
        /// `diag`, `full` or `{(<s>,<t>);...}`.
        #[arg(long)]
        pairs: String,
        /// Interpretation of the constant `c`; the zero node of length k by default.
        #[arg(long)]
        c: Option<String>,
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
}

#[derive(Args, Debug)]
pub struct IsoArgs {
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    /// Compare the pruned window `l,m[,lambda]` with the unpruned one.
    #[arg(long)]
    pub window: Option<String>,
    /// Colour family for --window: `standard`, `{...}` or a file.
    #[arg(long, default_value = "standard")]
    pub family: String,
    /// Recolour one point of the second structure first.
    #[arg(long)]
    pub perturb: bool,
}

#[derive(Subcommand, Debug)]
pub enum ForgeOp {
    /// Meet every dense set of a schedule; prints the transcript.
    Run {
        #[arg(long)]
        schedule: PathBuf,
        /// Bank constructors separated by `;`.
        #[arg(long)]
        bank: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also print the extracted pre-model.
        #[arg(long)]
        premodel: bool,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
    },
    /// Re-verify a transcript step by step.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
    },
    /// Random pairs of certified conditions relocated apart and tested for compatibility.
    Homogeneity {
        #[arg(long)]
        bank: String,
        #[arg(long, default_value_t = 50)]
        pairs: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum ReportOp {
    /// Ranks of truncations at growing depth.
    Rank {
        #[arg(long)]
        dsl: String,
        #[arg(long, default_value_t = 6)]
        max: usize,
    },
    /// Level counts of the realization tree of a 1-type.
    Realization {
        #[arg(long)]
        model: String,
        #[command(flatten)]
        src: TypeSource,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 100_000)]
        nodes: usize,
    },
    /// Clause table of the colour-family check.
    Kfamily {
        #[arg(long, default_value = "standard")]
        family: String,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        lambda: Option<usize>,
    },
    /// Values of the height gap predicate by point.
    Gap {
        #[arg(long)]
        model: String,
        #[arg(long)]
        m: usize,
    },
    /// Sentence values in a model with bounds for the intended model.
    Theory {
        #[arg(long)]
        model: String,
        #[arg(long, required = true)]
        sentence: Vec<String>,
    },
}

/// Text output, a table for --csv and the exit code.
#[derive(Debug, Default)]
pub struct Report {
    pub text: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub code: i32,
}

impl Report {
    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn table(&mut self, header: &[&str]) {
        self.header = header.iter().map(|s| s.to_string()).collect();
    }

    fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    fn verdict(&mut self, ok: bool) {
        self.code = if ok { 0 } else { 1 };
    }

    pub fn csv(&self) -> String {
        let esc = |c: &String| {
            if c.contains([',', '"', '\n']) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.clone()
            }
        };
        let mut s = String::new();
        for r in std::iter::once(&self.header).chain(self.rows.iter()) {
            let _ = writeln!(s, "{}", r.iter().map(esc).collect::<Vec<_>>().join(","));
        }
        s
    }
}

/// Outcome of one invocation: what to print where, and the exit code.
pub struct Invocation {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

/// Parse and execute an argument vector (program name first).
pub fn run<I, T>(argv: I) -> Invocation
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Invocation { stdout: text, stderr: String::new(), code }
            } else {
                Invocation { stdout: String::new(), stderr: text, code }
            };
        }
    };
    match execute(&cli) {
        Ok(rep) => {
            if let Some(path) = &cli.csv {
                if let Err(e) = std::fs::write(path, rep.csv()) {
                    return Invocation {
                        stdout: rep.text,
                        stderr: format!("error: writing {}: {e}\n", path.display()),
                        code: 2,
                    };
                }
            }
            Invocation { stdout: rep.text, stderr: String::new(), code: rep.code }
        }
        Err(e) => Invocation { stdout: String::new(), stderr: format!("error: {e}\n"), code: 2 },
    }
}

pub fn execute(cli: &Cli) -> Result<Report> {
    let cap = cli.cap.unwrap_or(DEFAULT_CAP);
    let mut r = Report::default();
    match &cli.cmd {
        Command::Model { op } => model_cmd(op, cap, &mut r)?,
        Command::Eval(a) => eval_cmd(a, cap, &mut r)?,
        Command::Type { op } => type_cmd(op, cap, &mut r)?,
        Command::Tree { op } => tree_cmd(op, &mut r)?,
        Command::Reduce { op } => reduce_cmd(op, cap, &mut r)?,
        Command::Iso(a) => iso_cmd(a, cap, &mut r)?,
        Command::Forge { op } => forge_cmd(op, cli.seed, &mut r)?,
        Command::Report { op } => report_cmd(op, cap, &mut r)?,
    }
    Ok(r)
}

// ------------------------------------------------------------ shared helpers

fn read_file(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
}

/// A model file when the path exists, a constructor otherwise.
pub fn load_model(spec: &str, cap: usize) -> Result<FiniteStructure> {
    let p = Path::new(spec);
    if p.is_file() {
        return read_structure(&read_file(p)?);
    }
    if !spec.contains('(') {
        return Err(Error::Io(format!("{spec}: no such model file and not a constructor")));
    }
    build_model(&ModelCtor::parse(spec)?.with_cap(cap))
}

fn parse_tol(s: &str) -> Result<Q> {
    let t = parse_q(s)?;
    if t < Q::from_integer(0) {
        return Err(Error::Invalid(format!("tolerance {s} is negative")));
    }
    Ok(t)
}

/// Colour count and top colour level from the `P_i_j` predicates of a model.
fn colour_shape(m: &FiniteStructure) -> Option<(usize, usize)> {
    let mut colours = 0;
    let mut levels = 0;
    for p in &m.predicates {
        let Some(rest) = p.name.strip_prefix("P_") else { continue };
        let Some((i, j)) = rest.split_once('_') else { continue };
        let (Ok(i), Ok(j)) = (i.parse::<usize>(), j.parse::<usize>()) else { continue };
        colours = colours.max(j + 1);
        levels = levels.max(i);
    }
    (colours > 0).then_some((colours, levels))
}

pub fn load_type(src: &TypeSource, model: Option<&FiniteStructure>) -> Result<PartialType> {
    if Path::new(&src.ty).is_file() {
        return resolve_type_source(&src.ty, None);
    }
    let (kind, arg) = match src.ty.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (src.ty.as_str(), None),
    };
    let mut p = TypeParams::default();
    if let Some((c, l)) = model.and_then(colour_shape) {
        p.colours = c;
        p.levels = l;
    }
    if let Some(c) = src.colours {
        p.colours = c;
    }
    if let Some(l) = src.levels {
        p.levels = l;
    }
    match kind {
        "sm" | "s_m" => {
            let a = arg.ok_or_else(|| Error::Invalid("sm needs a level, as in sm:2".into()))?;
            p.m = a.parse().map_err(|_| Error::Parse(format!("bad level '{a}'")))?;
        }
        "tR" => p.pair_point = arg.unwrap_or("R0").to_string(),
        "tS" => {
            let d = src.dsl.as_ref().ok_or_else(|| Error::Invalid("tS needs --dsl".into()))?;
            p.tree = Some(finite_tree(d)?);
        }
        _ => {}
    }
    build_type(kind, &p)
}

/// A tree given in the tree language, required to be finite after naturalizing.
fn finite_tree(dsl: &str) -> Result<FiniteTree> {
    match parse_tree(dsl)? {
        TreeTerm::Finite(t) => Ok(naturalize(&t)),
        other => Err(Error::Invalid(format!("{other} is infinite; give a finite{{...}} tree"))),
    }
}

fn tuple_names(m: &FiniteStructure, t: &PartialType, tuple: &[usize]) -> Vec<String> {
    let sorts = sorts_of(m, t);
    tuple.iter().zip(sorts).map(|(&p, s)| m.point_name(s, p).to_string()).collect()
}

fn sorts_of(m: &FiniteStructure, t: &PartialType) -> Vec<usize> {
    t.vars
        .iter()
        .map(|v| v.sort.as_ref().and_then(|s| m.sort_index(s).ok()).unwrap_or(0))
        .collect()
}

fn list_realizers(r: &mut Report, m: &FiniteStructure, t: &PartialType, frag: usize, tol: Q, what: &str) -> Result<()> {
    let got = realizes(m, t, frag, tol)?;
    let vars: Vec<String> = t.vars.iter().map(|v| format!("x{}", v.idx)).collect();
    let mut header: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
    header.insert(0, "tuple");
    r.table(&header);
    for (i, tup) in got.iter().enumerate() {
        let names = tuple_names(m, t, tup);
        r.line(format!("({})", names.join(", ")));
        let mut row = vec![i.to_string()];
        row.extend(names);
        r.row(row);
    }
    r.line(format!("realizes({what}, frag={frag}, tol={}): {} realizers", fmt_q(&tol), got.len()));
    r.verdict(!got.is_empty());
    Ok(())
}

fn parse_assignments(c: &Compiled, m: &FiniteStructure, items: &[String]) -> Result<Assignment> {
    let mut asg = Assignment::new();
    for item in items {
        for part in split_top(item, ',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (v, name) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("assignment '{part}' is not x<n>=<point>")))?;
            let idx: u32 = v
                .trim()
                .trim_start_matches('x')
                .parse()
                .map_err(|_| Error::Parse(format!("bad variable '{v}'")))?;
            let (sort, p) = m.resolve(name.trim())?;
            if let Some(want) = c.sort_of(idx) {
                if want != sort {
                    return Err(Error::Sort(format!(
                        "x{idx} ranges over sort {}, but {} is in sort {}",
                        m.sorts[want].name, name, m.sorts[sort].name
                    )));
                }
            }
            asg.insert(idx, p);
        }
    }
    Ok(asg)
}

// ------------------------------------------------------------ verbs

fn model_cmd(op: &ModelOp, cap: usize, r: &mut Report) -> Result<()> {
    match op {
        ModelOp::Build { model, out } => {
            let m = load_model(model, cap)?;
            let text = write_structure(&m);
            let sizes: Vec<String> = m.sorts.iter().map(|s| format!("{}:{}", s.name, s.len())).collect();
            r.table(&["sort", "points"]);
            for s in &m.sorts {
                r.row(vec![s.name.clone(), s.len().to_string()]);
            }
            match out {
                Some(p) => {
                    std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                    r.line(format!("build_model({model}): {} points ({}) written to {}", m.size(), sizes.join(" "), p.display()));
                }
                None => r.text.push_str(&text),
            }
        }
        ModelOp::Check { model, best } => {
            let m = load_model(model, cap)?;
            let v = check_structure(&m);
            r.table(&["kind", "detail"]);
            for x in &v {
                r.line(format!("{}: {}", x.kind, x.detail));
                r.row(vec![x.kind.clone(), x.detail.clone()]);
            }
            if *best {
                let mut syms: Vec<(String, String)> = Vec::new();
                for f in &m.functions {
                    syms.push((f.name.clone(), f.modulus.as_ref().map_or("-".into(), |md| md.to_string())));
                }
                for p in &m.predicates {
                    syms.push((p.name.clone(), p.modulus.as_ref().map_or("-".into(), |md| md.to_string())));
                }
                for (name, declared) in syms {
                    let b = best_lipschitz(&m, &name).map_or("-".into(), |q| fmt_q(&q));
                    r.line(format!("best_lipschitz({name}) = {b}, declared {declared}"));
                    r.row(vec!["lipschitz".into(), format!("{name} best={b} declared={declared}")]);
                }
            }
            let verdict = if v.is_empty() { "valid".to_string() } else { format!("{} violations", v.len()) };
            r.line(format!("check_structure({model}): {verdict}, {} points", m.size()));
            r.verdict(v.is_empty());
        }
    }
    Ok(())
}

fn eval_cmd(a: &EvalArgs, cap: usize, r: &mut Report) -> Result<()> {
    let m = load_model(&a.model, cap)?;
    let f = parse_formula(&a.formula)?;
    let c = Compiled::new(&f, &m)?;
    let asg = parse_assignments(&c, &m, &a.assign)?;
    if let Some(v) = f.free_vars().into_iter().find(|v| !asg.contains_key(v)) {
        return Err(Error::Invalid(format!("x{v} is free in the formula but not assigned")));
    }
    let v = c.eval(&asg)?;
    r.line(fmt_q(&v));
    let shown: Vec<String> = asg.iter().map(|(k, p)| format!("x{k}={}", m.point_name(c.sort_of(*k).unwrap_or(0), *p))).collect();
    r.table(&["formula", "assignment", "value"]);
    r.row(vec![f.to_string(), shown.join(" "), fmt_q(&v)]);
    if a.bounds {
        // Two-sided bounds need density claims on every quantified sort; otherwise fall back to one side.
        let g = prenex(&f)?;
        let b = match eval_bounds(&g, &m, &asg, true) {
            Ok(b) => b,
            Err(_) => eval_bounds(&g, &m, &asg, false)?,
        };
        r.line(format!("eval_bounds: {b}"));
        for (k, name) in &b.lo_witness {
            r.line(format!("  lower witness x{k}={name}"));
        }
        for note in &b.notes {
            r.line(format!("  note: {note}"));
        }
    }
    Ok(())
}

fn type_cmd(op: &TypeOp, cap: usize, r: &mut Report) -> Result<()> {
    match op {
        TypeOp::Build { src, frag, model } => {
            let m = model.as_deref().map(|s| load_model(s, cap)).transpose()?;
            let t = load_type(src, m.as_ref())?;
            let text = match frag {
                Some(n) => t.fragment_text(*n),
                None => t.to_text(),
            };
            r.text.push_str(&text);
            if !text.ends_with('\n') {
                r.text.push('\n');
            }
            r.table(&["batch", "condition"]);
            for (i, c) in t.fragment(frag.unwrap_or(0)).iter().enumerate() {
                r.row(vec![i.to_string(), c.to_string()]);
            }
        }
        TypeOp::Check { model, src, frag, tol } => {
            let m = load_model(model, cap)?;
            let t = load_type(src, Some(&m))?;
            list_realizers(r, &m, &t, *frag, parse_tol(tol)?, &format!("model={model}, type={}", src.ty))?;
        }
        TypeOp::Pair { model, left, right, op, frag, tol } => {
            let m = load_model(model, cap)?;
            let src = |s: &String| TypeSource { ty: s.clone(), dsl: None, colours: None, levels: None };
            let (a, b) = (load_type(&src(left), Some(&m))?, load_type(&src(right), Some(&m))?);
            let (t, name) = match op {
                PairOp::Or => (type_or(&a, &b), "or"),
                PairOp::And => (type_and(&a, &b), "and"),
            };
            list_realizers(r, &m, &t, *frag, parse_tol(tol)?, &format!("model={model}, type={left} {name} {right}"))?;
        }
        TypeOp::Omega { src, n, model, tol } => {
            let m = model.as_deref().map(|s| load_model(s, cap)).transpose()?;
            let t = omega_type(&load_type(src, m.as_ref())?, *n)?;
            match (&m, model) {
                (Some(m), Some(name)) => {
                    list_realizers(r, m, &t, 0, parse_tol(tol)?, &format!("model={name}, type=omega({}, {n})", src.ty))?;
                }
                _ => r.text.push_str(&t.to_text()),
            }
        }
    }
    Ok(())
}

fn tree_cmd(op: &TreeOp, r: &mut Report) -> Result<()> {
    match op {
        TreeOp::Rank { dsl, depth, branch } => {
            let t = parse_tree(dsl)?;
            match depth {
                None => {
                    let rank = t.rank();
                    r.line(rank.to_string());
                    r.table(&["tree", "rank"]);
                    r.row(vec![t.to_string(), rank.to_string()]);
                }
                Some(d) => {
                    let ft = t.truncate(*d, *branch);
                    r.line(ft.rank().to_string());
                    r.table(&["tree", "depth", "branch", "rank"]);
                    r.row(vec![t.to_string(), d.to_string(), branch.to_string(), ft.rank().to_string()]);
                }
            }
        }
        TreeOp::Dist { a, b, pairs, depth, branch } => {
            let (v, how) = if *pairs {
                (pair_tree_dist(&parse_pair_tree(a)?.truncate(*depth, *branch), &parse_pair_tree(b)?.truncate(*depth, *branch))?, "pair_tree_dist")
            } else if a.trim_start().starts_with('<') && b.trim_start().starts_with('<') {
                (baire_dist(&parse_node(a)?, &parse_node(b)?), "baire_dist")
            } else {
                (tree_space_dist(&parse_tree(a)?.truncate(*depth, *branch), &parse_tree(b)?.truncate(*depth, *branch)), "tree_space_dist")
            };
            r.line(fmt_q(&v));
            r.table(&["op", "a", "b", "distance"]);
            r.row(vec![how.into(), a.clone(), b.clone(), fmt_q(&v)]);
        }
        TreeOp::Truncate { dsl, depth, branch } => {
            let ft = parse_tree(dsl)?.truncate(*depth, *branch);
            r.line(ft.to_string());
            r.table(&["node"]);
            for s in ft.nodes() {
                r.row(vec![fmt_node(s)]);
            }
        }
        TreeOp::Project { pairs, x, branch } => {
            let ft = project(&parse_pair_tree(pairs)?, &parse_node(x)?, *branch)?;
            r.line(ft.to_string());
            r.table(&["node"]);
            for s in ft.nodes() {
                r.row(vec![fmt_node(s)]);
            }
        }
        TreeOp::Wf { dsl } => {
            let t = parse_tree(dsl)?;
            let wf = t.well_founded();
            r.line(if wf { "well-founded" } else { "ill-founded" });
            r.table(&["tree", "well_founded"]);
            r.row(vec![t.to_string(), wf.to_string()]);
            r.verdict(wf);
        }
    }
    Ok(())
}

fn reduce_cmd(op: &ReduceOp, cap: usize, r: &mut Report) -> Result<()> {
    match op {
        ReduceOp::Ts { dsl, k } => {
            let term = parse_tree(dsl)?;
            let s = naturalize(&term.truncate(*k, *k as u32));
            let mut p = N2Params::new(*k, *k);
            p.trees = vec![term.clone()];
            p.cap = cap;
            let m = n2_model(&p)?;
            let t = build_type("tS", &TypeParams { tree: Some(s.clone()), ..TypeParams::default() })?;
            r.table(&["depth", "realized", "branch_in_box"]);
            let mut last = false;
            for j in 1..=*k {
                let got = !realizes(&m, &t, j + 1, Q::from_integer(0))?.is_empty();
                let branch = s.nodes().iter().any(|n| n.len() == j && n.iter().all(|x| (x.max_entry() as usize) < *k));
                r.line(format!("depth {j}: realized={got} branch_in_box={branch}"));
                r.row(vec![j.to_string(), got.to_string(), branch.to_string()]);
                last = got;
            }
            r.line(format!("reduce tS(tree={term}, k={k}) on N2(depth={k},branch={k}): {}", if last { "realized" } else { "omitted" }));
            r.verdict(last);
        }
        ReduceOp::Tr { pairs, c, k } => {
            let pt = parse_pair_tree(pairs)?;
            let mut p = N3Params::new(*k, 2);
            p.pairs = vec![pt.clone()];
            let c = c.clone().unwrap_or_else(|| format!("<{}>", vec!["0"; *k].join(",")));
            p.c = Some(parse_node(&c)?);
            p.cap = cap;
            let all = n3_pair_trees(&p)?;
            let idx = all
                .iter()
                .position(|x| *x == pt.truncate(p.depth, p.branch as u32))
                .ok_or_else(|| Error::NotFound("pair tree missing from the model".into()))?;
            let m = n3_model(&p)?;
            let point = format!("R{idx}");
            let t = build_type("tR", &TypeParams { pair_point: point.clone(), ..TypeParams::default() })?;
            r.table(&["depth", "realizers"]);
            let mut last = false;
            for j in 1..=*k {
                let got = realizes(&m, &t, j + 1, Q::from_integer(0))?;
                let names: Vec<String> = got.iter().map(|v| m.point_name(0, v[0]).to_string()).collect();
                r.line(format!("depth {j}: {} realizers {}", got.len(), names.join(" ")));
                r.row(vec![j.to_string(), got.len().to_string()]);
                last = !got.is_empty();
            }
            r.line(format!("reduce tR(pairs={pairs}, c={c}, k={k}) on N3 point {point}: {}", if last { "realized" } else { "omitted" }));
            r.verdict(last);
        }
    }
    Ok(())
}

fn iso_cmd(a: &IsoArgs, cap: usize, r: &mut Report) -> Result<()> {
    let (x, mut y, what) = match (&a.window, &a.a, &a.b) {
        (Some(w), _, _) => {
            let nums: Vec<usize> = w
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| Error::Parse(format!("bad window '{w}'"))))
                .collect::<Result<_>>()?;
            let (l, m, lambda) = match nums.as_slice() {
                [l, m] => (*l, *m, *m),
                [l, m, lam] => (*l, *m, *lam),
                _ => return Err(Error::Parse(format!("window '{w}' is not l,m[,lambda]"))),
            };
            let fam = KFamily::from_spec(&a.family)?;
            let pruned = Window::of_family(&fam, Some(l), m, lambda)?;
            let full = Window::of_family(&fam, None, m, lambda)?;
            let (x, y) = window_pair(&pruned, &full)?;
            (x, y, format!("window l={l}, m={m}, lambda={lambda}, family={}", a.family))
        }
        (None, Some(pa), Some(pb)) => (load_model(pa, cap)?, load_model(pb, cap)?, format!("a={pa}, b={pb}")),
        _ => return Err(Error::Invalid("give --a and --b, or --window".into())),
    };
    if a.perturb {
        let d = perturb_colour(&mut y).ok_or_else(|| Error::Invalid("nothing to perturb".into()))?;
        r.line(format!("perturbed: {d}"));
    }
    r.table(&["sort", "a", "b"]);
    match find_iso(&x, &y, &Sublanguage::all(&x)) {
        IsoOutcome::Found(w) => {
            for (s, map) in w.maps.iter().enumerate() {
                for (p, q) in map {
                    r.line(format!("{} -> {}", x.point_name(s, *p), y.point_name(s, *q)));
                    r.row(vec![x.sorts[s].name.clone(), x.point_name(s, *p).into(), y.point_name(s, *q).into()]);
                }
            }
            r.line(format!("find_iso({what}): isomorphism on {} points", w.size()));
            r.verdict(true);
        }
        IsoOutcome::Refused(why) => {
            r.line(format!("find_iso({what}): refused, {why}"));
            r.verdict(false);
        }
        IsoOutcome::Undecided(why) => {
            r.line(format!("find_iso({what}): undecided, {why}"));
            r.verdict(false);
        }
    }
    Ok(())
}

fn forge_cmd(op: &ForgeOp, seed: u64, r: &mut Report) -> Result<()> {
    match op {
        ForgeOp::Run { schedule, bank, out, premodel, max_steps } => {
            let text = read_file(schedule)?;
            let base = schedule.parent().map(Path::to_path_buf);
            let types = |s: &str| resolve_type_source(s, base.as_deref());
            let specs = parse_schedule(&text, &types)?;
            let b = WitnessBank::parse(bank)?;
            let budget = Budget { max_steps: *max_steps, ..Budget::default() };
            let run = build_generic(&specs, &b, &budget);
            let tr = run.transcript();
            match out {
                Some(p) => {
                    std::fs::write(p, &tr).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                }
                None => r.text.push_str(&tr),
            }
            r.table(&["step", "spec", "model", "note"]);
            for (i, st) in run.steps.iter().enumerate() {
                r.row(vec![(i + 1).to_string(), st.spec.to_string(), st.model.to_string(), st.note.clone()]);
            }
            if *premodel && run.complete() {
                let pm = extract_premodel(&run)?;
                r.line(format!(
                    "premodel: {} points, triangle excess {}, largest radius sum {}",
                    pm.points.len(),
                    fmt_q(&pm.triangle_excess),
                    fmt_q(&pm.max_radius)
                ));
                r.text.push_str(&write_structure(&pm.structure));
            }
            let verdict = match &run.failure {
                None => format!("complete, {} steps", run.steps.len()),
                Some(f) => format!("failed at step {} ({:?}): {}", f.step, f.kind, f.msg),
            };
            r.line(format!("build_generic(schedule={}, bank={bank}) [bank-relative]: {verdict}", schedule.display()));
            r.verdict(run.complete());
        }
        ForgeOp::Replay { transcript } => {
            let text = read_file(transcript)?;
            let base = transcript.parent().map(Path::to_path_buf);
            let types = |s: &str| resolve_type_source(s, base.as_deref());
            let rep = replay(&text, None, &types)?;
            r.table(&["steps", "complete"]);
            r.row(vec![rep.steps.to_string(), rep.complete.to_string()]);
            r.line(format!(
                "replay({}) [bank-relative]: {} steps verified, {}",
                transcript.display(),
                rep.steps,
                if rep.complete { "complete" } else { "incomplete" }
            ));
            r.verdict(rep.complete);
        }
        ForgeOp::Homogeneity { bank, pairs } => {
            let b = WitnessBank::parse(bank)?;
            let h = homogeneity_experiment(&b, *pairs, seed);
            r.table(&["pairs", "successes", "common_model"]);
            r.row(vec![h.pairs.to_string(), h.successes.to_string(), h.common_model.to_string()]);
            for f in &h.failures {
                r.line(format!("failure: {f}"));
            }
            r.line(format!(
                "homogeneity_experiment(bank={bank}, pairs={pairs}, seed={seed}) [bank-relative]: {}/{} compatible after relocation",
                h.successes, h.pairs
            ));
            r.verdict(h.successes == h.pairs);
        }
    }
    Ok(())
}

fn report_cmd(op: &ReportOp, cap: usize, r: &mut Report) -> Result<()> {
    match op {
        ReportOp::Rank { dsl, max } => {
            let t = parse_tree(dsl)?;
            r.table(&["depth", "branch", "nodes", "rank"]);
            for d in 1..=*max {
                let ft = t.truncate(d, d as u32);
                r.line(format!("depth {d}: {} nodes, rank {}", ft.len(), ft.rank()));
                r.row(vec![d.to_string(), d.to_string(), ft.len().to_string(), ft.rank().to_string()]);
            }
            r.line(format!("rank({t}) = {}", t.rank()));
        }
        ReportOp::Realization { model, src, depth, nodes } => {
            let m = load_model(model, cap)?;
            let t = load_type(src, Some(&m))?;
            let rt = realization_tree(&m, &t, *depth, *nodes)?;
            r.table(&["level", "nodes"]);
            for (i, c) in rt.counts.iter().enumerate() {
                r.line(format!("level {}: {c}", i + 1));
                r.row(vec![(i + 1).to_string(), c.to_string()]);
            }
            if let Some(p) = &rt.full_path {
                r.line(format!("path: {}", p.join(" ")));
            }
            let end = match (rt.died_at, rt.capped) {
                (_, true) => "capped".to_string(),
                (Some(l), _) => format!("dies at level {l}"),
                (None, _) => format!("alive to level {depth}"),
            };
            r.line(format!("realization_tree(model={model}, type={}, depth={depth}): {end}", src.ty));
        }
        ReportOp::Kfamily { family, l, m, lambda } => {
            let fam = KFamily::from_spec(family)?;
            let rep = kfamily_check(&fam, *l, *m, lambda.unwrap_or(*m))?;
            r.table(&["clause", "pass", "witness"]);
            for c in &rep.clauses {
                r.line(format!("{} {}: {}", c.clause, if c.pass { "pass" } else { "fail" }, c.witness));
                r.row(vec![c.clause.clone(), c.pass.to_string(), c.witness.clone()]);
            }
            r.line(format!("kfamily_check(family={family}, l={l}, m={m}): {}", if rep.all_pass() { "pass" } else { "fail" }));
            r.verdict(rep.all_pass());
        }
        ReportOp::Gap { model, m } => {
            let s = load_model(model, cap)?;
            let (plm, pgm) = pred_gap(*m)?;
            let (cl, cg) = (Compiled::new(&plm, &s)?, Compiled::new(&pgm, &s)?);
            r.table(&["point", "Plm", "Pgm"]);
            let mut zeros = 0;
            for p in 0..s.sorts[0].len() {
                let asg = BTreeMap::from([(0u32, p)]);
                let (a, b) = (cl.eval(&asg)?, cg.eval(&asg)?);
                zeros += usize::from(a == Q::from_integer(0));
                r.row(vec![s.point_name(0, p).into(), fmt_q(&a), fmt_q(&b)]);
            }
            r.line(format!("pred_gap(m={m}) on {model}: Plm vanishes at {zeros} of {} points", s.sorts[0].len()));
        }
        ReportOp::Theory { model, sentence } => {
            let m = load_model(model, cap)?;
            let fs: Vec<Formula> = sentence.iter().map(|s| parse_formula(s)).collect::<Result<_>>()?;
            let rows = theory_fragment(&m, &fs)?;
            r.table(&["sentence", "value", "intended"]);
            for row in &rows {
                r.line(format!("{}: {} (intended model: {})", row.sentence, fmt_q(&row.value), row.bounds));
                r.row(vec![row.sentence.to_string(), fmt_q(&row.value), row.bounds.to_string()]);
            }
            r.line(format!("theory_fragment(model={model}): {} sentences", rows.len()));
        }
    }
    Ok(())
}
