use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const NINE_CLAUSES: &str = "c nine constraints over A..H
p cnf 8 13
6 8 0
1 -8 0
1 2 7 0
-1 -2 7 0
-1 2 -7 0
1 -2 -7 0
6 7 0
2 6 0
1 5 0
3 5 0
3 4 0
-3 -4 0
2 3 0
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aomdd"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stat(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no {key} in {report}"))
        .to_string()
}

fn example_inputs(dir: &TempDir) -> (PathBuf, PathBuf) {
    let cnf = write(dir, "nine.cnf", NINE_CLAUSES);
    let order = write(dir, "order.txt", "0 1 2 3 4 5 6 7\n");
    (cnf, order)
}

fn compile_to(dir: &TempDir, name: &str, extra: &[&str]) -> (PathBuf, String) {
    let out = dir.path().join(name);
    let stats = dir.path().join(format!("{name}.stats"));
    let mut args = vec!["compile"];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--out", s(&out), "--stats", s(&stats)]);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (out.clone(), std::fs::read_to_string(stats).unwrap())
}

#[test]
fn example_sizes_with_both_methods() {
    let dir = TempDir::new().unwrap();
    let (cnf, order) = example_inputs(&dir);
    let (a, ra) = compile_to(&dir, "a.aomdd", &[s(&cnf), "--order-file", s(&order), "--method", "search"]);
    let (b, rb) = compile_to(&dir, "b.aomdd", &[s(&cnf), "--order-file", s(&order), "--method", "be"]);
    assert_eq!(stat(&ra, "meta_nodes"), "18");
    assert_eq!(stat(&rb, "meta_nodes"), "18");
    assert_eq!(stat(&rb, "edges"), "47");
    assert_eq!(stat(&ra, "seed"), "0");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let (_, rc) = compile_to(&dir, "c.aomdd", &[s(&cnf), "--order-file", s(&order), "--chain"]);
    assert_eq!(stat(&rc, "meta_nodes"), "27");
    assert_eq!(stat(&rc, "edges"), "54");
}

#[test]
fn stats_subcommand_prints_report() {
    let dir = TempDir::new().unwrap();
    let (cnf, order) = example_inputs(&dir);
    let o = run(&["stats", s(&cnf), "--order", "given", "--order-file", s(&order)]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stat(&text, "induced_width"), "3");
    assert_eq!(stat(&text, "n"), "8");
}

#[test]
fn equivalence_exit_codes() {
    let dir = TempDir::new().unwrap();
    let (cnf, order) = example_inputs(&dir);
    let (a, _) = compile_to(&dir, "a.aomdd", &[s(&cnf), "--order-file", s(&order)]);
    assert_eq!(run(&["equiv", s(&a), s(&a)]).status.code(), Some(0));

    // (not B or C) in place of (B or C): same primal graph, different function
    let other = NINE_CLAUSES.replace("\n2 3 0\n", "\n-2 3 0\n");
    let cnf2 = write(&dir, "nine_b.cnf", &other);
    let (b, _) = compile_to(&dir, "b.aomdd", &[s(&cnf2), "--order-file", s(&order)]);
    assert_eq!(run(&["equiv", s(&a), s(&b)]).status.code(), Some(1));

    let (c, _) = compile_to(&dir, "c.aomdd", &[s(&cnf), "--order-file", s(&order), "--chain"]);
    assert_eq!(run(&["equiv", s(&a), s(&c)]).status.code(), Some(2));
}

#[test]
fn queries() {
    let dir = TempDir::new().unwrap();
    let mut queens = String::from("p cnf 16 0\n");
    // 4-queens over cells r*4+c+1: one queen per row, no two attacking
    let cell = |r: usize, c: usize| r * 4 + c + 1;
    let mut clauses = Vec::new();
    for r in 0..4 {
        clauses.push((0..4).map(|c| cell(r, c).to_string()).collect::<Vec<_>>().join(" ") + " 0");
    }
    for a in 0..16usize {
        for b in a + 1..16 {
            let (r1, c1, r2, c2) = (a / 4, a % 4, b / 4, b % 4);
            if r1 == r2 || c1 == c2 || r1.abs_diff(r2) == c1.abs_diff(c2) {
                clauses.push(format!("-{} -{} 0", cell(r1, c1), cell(r2, c2)));
            }
        }
    }
    queens = queens.replace("p cnf 16 0", &format!("p cnf 16 {}", clauses.len()));
    queens.push_str(&clauses.join("\n"));
    queens.push('\n');
    let cnf = write(&dir, "q4.cnf", &queens);
    let (q, _) = compile_to(&dir, "q.aomdd", &[s(&cnf)]);
    let o = run(&["query", s(&q), "count"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "2");

    let zeros = write(&dir, "zeros.txt", &vec!["0"; 16].join(" "));
    let o = run(&["query", s(&q), "eval", "--assignment", s(&zeros)]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "0");

    let bad_ev = write(&dir, "bad.evid", "1 40 0");
    assert_eq!(run(&["query", s(&q), "count", "--evidence", s(&bad_ev)]).status.code(), Some(2));
}

#[test]
fn weighted_sum_equals_root_constant() {
    let dir = TempDir::new().unwrap();
    let uai = write(&dir, "m.uai", "MARKOV\n3\n2 2 3\n2\n2 0 1\n2 1 2\n4\n0.5 2 1 0.25\n6\n1 2 3 4 5 6\n");
    let (d, _) = compile_to(&dir, "m.aomdd", &[s(&uai)]);
    let text = std::fs::read_to_string(&d).unwrap();
    let root: f64 = text.lines().last().unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    let o = run(&["query", s(&d), "sum"]);
    let sum: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    // brute force: sum over x0,x1 of f(x0,x1) * sum over x2 of g(x1,x2)
    let expected = 0.5 * 6.0 + 2.0 * 15.0 + 1.0 * 6.0 + 0.25 * 15.0;
    assert!((sum - expected).abs() < 1e-9 * expected);
    assert!((root - expected).abs() < 1e-9 * expected);

    let ev = write(&dir, "e.evid", "1 2 0");
    let o = run(&["query", s(&d), "sum", "--evidence", s(&ev)]);
    let sum: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert!((sum - (0.5 + 2.0 * 4.0 + 1.0 + 0.25 * 4.0)).abs() < 1e-9);

    let o = run(&["query", s(&d), "mpe"]);
    let out = String::from_utf8(o.stdout).unwrap();
    let mut lines = out.lines();
    let best: f64 = lines.next().unwrap().parse().unwrap();
    assert!((best - 12.0).abs() < 1e-9);
    assert_eq!(lines.next().unwrap(), "0 1 2");
}

#[test]
fn dot_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (cnf, order) = example_inputs(&dir);
    let (a, _) = compile_to(&dir, "a.aomdd", &[s(&cnf), "--order-file", s(&order)]);
    let one = run(&["dot", s(&a)]);
    let two = run(&["dot", s(&a)]);
    assert!(one.status.success());
    assert_eq!(one.stdout, two.stdout);
    let text = String::from_utf8(one.stdout).unwrap();
    assert_eq!(text.matches("shape=square").count(), 2);
    assert_eq!(text.lines().filter(|l| l.contains("label=\"{x")).count(), 18);

    let taut = write(&dir, "taut.cnf", "p cnf 2 1\n1 -1 0\n");
    let (t, _) = compile_to(&dir, "t.aomdd", &[s(&taut)]);
    let text = String::from_utf8(run(&["dot", s(&t)]).stdout).unwrap();
    assert_eq!(text.matches("shape=square").count(), 1);
}

#[test]
fn memory_cap_and_usage_errors() {
    let dir = TempDir::new().unwrap();
    let (cnf, _) = example_inputs(&dir);
    let o = run(&["compile", s(&cnf), "--mem-cap", "3"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(run(&["compile", "/nonexistent/model.uai"]).status.code(), Some(2));
    assert_eq!(run(&["compile"]).status.code(), Some(2));
    let garbage = write(&dir, "bad.uai", "MARKOV 2\n");
    assert_eq!(run(&["compile", s(&garbage)]).status.code(), Some(2));
    let o = run(&["compile", s(&cnf), "--method", "be", "--prune", "bcp"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bcp_output_matches_plain_search() {
    let dir = TempDir::new().unwrap();
    let (cnf, _) = example_inputs(&dir);
    let (a, ra) = compile_to(&dir, "a.aomdd", &[s(&cnf)]);
    let (b, rb) = compile_to(&dir, "b.aomdd", &[s(&cnf), "--prune", "bcp"]);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    let or_a: usize = stat(&ra, "or_expansions").parse().unwrap();
    let or_b: usize = stat(&rb, "or_expansions").parse().unwrap();
    assert!(or_b <= or_a);
}
