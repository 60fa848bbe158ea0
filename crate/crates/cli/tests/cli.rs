use std::path::PathBuf;
use std::process::{Command, Output};

fn mlw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlw")).args(args).output().expect("spawn mlw")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mlw-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn graft_rank_prints_omega_plus_two() {
    let o = mlw(&["tree", "rank", "--dsl", "graft(chain(2),T1)"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next(), Some("w+2"));
}

#[test]
fn self_distance_evaluates_to_zero() {
    let o = mlw(&["eval", "--model", "N(depth=3,branch=3)", "--formula", "d(x0,x0)", "--assign", "x0=<>"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next(), Some("0"));
}

#[test]
fn type_check_exit_code_follows_emptiness() {
    let o = mlw(&["type", "check", "--model", "M(depth=4,branch=3)", "--type", "sm:2", "--frag", "3", "--tol", "0"]);
    let out = stdout(&o);
    let verdict = out.lines().last().unwrap();
    assert!(verdict.starts_with("realizes(model=M(depth=4,branch=3), type=sm:2, frag=3"), "{verdict}");
    let n: usize = verdict.rsplit(": ").next().unwrap().split(' ').next().unwrap().parse().unwrap();
    assert_eq!(o.status.code(), Some(if n > 0 { 0 } else { 1 }));
    assert_eq!(out.lines().count(), n + 1);
}

#[test]
fn usage_and_data_errors_exit_two() {
    assert_eq!(mlw(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mlw(&["tree", "rank", "--bogus", "x"]).status.code(), Some(2));
    assert_eq!(mlw(&["model", "check", "--model", "/no/such/file"]).status.code(), Some(2));
    let o = mlw(&["eval", "--model", "N(depth=2,branch=2)", "--formula", "d(x0,x1)", "--assign", "x0=<>"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("x1"));
}

#[test]
fn well_foundedness_is_the_exit_code() {
    assert_eq!(mlw(&["tree", "wf", "--dsl", "graft(T2,T1)"]).status.code(), Some(0));
    assert_eq!(mlw(&["tree", "wf", "--dsl", "dsum(T1,full)"]).status.code(), Some(1));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let args = ["forge", "homogeneity", "--bank", "N(depth=2,branch=2,h=1)", "--pairs", "6", "--seed", "11"];
    let (a, b) = (mlw(&args), mlw(&args));
    assert_eq!(a.stdout, b.stdout);
    let args = ["model", "build", "--model", "M(depth=3,branch=2)"];
    assert_eq!(mlw(&args).stdout, mlw(&args).stdout);
}

#[test]
fn csv_holds_the_report_table() {
    let path = scratch("rank.csv");
    let o = mlw(&["--csv", path.to_str().unwrap(), "report", "rank", "--dsl", "T1", "--max", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv, "depth,branch,nodes,rank\n1,1,2,1\n2,2,4,2\n3,3,8,3\n");
}

#[test]
fn built_models_reload_and_check_clean() {
    let path = scratch("n.mlw");
    let o = mlw(&["model", "build", "--model", "N(depth=2,branch=3,h=1)", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = mlw(&["model", "check", "--model", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains(": valid"));
}

#[test]
fn windows_are_isomorphic_until_a_colour_moves() {
    let o = mlw(&["iso", "--window", "1,3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = mlw(&["iso", "--window", "1,3", "--perturb"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("refused"));
}

#[test]
fn forge_transcripts_replay() {
    let sched = scratch("sched.txt");
    std::fs::write(&sched, "metric 0 1 2\nmetric 1 2 4\nwitness inf x9 . d(x0,x9) F=0\n").unwrap();
    let log = scratch("run.txt");
    let o = mlw(&[
        "forge", "run", "--schedule", sched.to_str().unwrap(), "--bank", "N(depth=2,branch=2,h=1)", "--out",
        log.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = mlw(&["forge", "replay", "--transcript", log.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("3 steps verified, complete"));
}

#[test]
fn reductions_track_branches() {
    let o = mlw(&["reduce", "tS", "--dsl", "T1", "--k", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let o = mlw(&["reduce", "tS", "--dsl", "finite{<>;<0>}", "--k", "3"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert_eq!(mlw(&["reduce", "tR", "--pairs", "diag", "--k", "2"]).status.code(), Some(0));
    assert_eq!(mlw(&["reduce", "tR", "--pairs", "{(<>,<>)}", "--k", "2"]).status.code(), Some(1));
}

#[test]
fn tree_distances_and_sections() {
    assert_eq!(stdout(&mlw(&["tree", "dist", "--a", "<0,1>", "--b", "<0,2>"])).trim(), "1/2");
    assert_eq!(stdout(&mlw(&["tree", "project", "--pairs", "diag", "--x", "<1>"])).trim(), "finite{<>;<1>}");
}

#[test]
fn pairing_ors_and_ands() {
    let m = "N(depth=2,branch=2,h=1)";
    let or = mlw(&["type", "pair", "--model", m, "--left", "s0_branch", "--right", "s0_branch", "--op", "or", "--frag", "2"]);
    let and = mlw(&["type", "pair", "--model", m, "--left", "s0_branch", "--right", "s0_branch", "--op", "and", "--frag", "2"]);
    assert!(matches!(or.status.code(), Some(0 | 1)));
    assert!(matches!(and.status.code(), Some(0 | 1)));
    assert!(stdout(&or).contains(" or s0_branch"));
}
