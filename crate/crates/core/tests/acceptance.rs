//! Acceptance suite: one PASS/FAIL line per criterion. Runs under
//! `cargo test` with its own harness and exits nonzero on any failure.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use aomdd::*;
use common::*;
use num_bigint::BigUint;
use rand::Rng;

type Outcome = std::result::Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn compile_both(m: &GraphicalModel, t: &Arc<PseudoTree>) -> (Aomdd, SearchStats, Aomdd) {
    let opts = CompileOptions::default();
    let (s, st) = compile_search(m, Arc::clone(t), &mut NoPruning, &opts).expect("search compile");
    let (b, _) = compile_be(m, Arc::clone(t), &opts).expect("be compile");
    (s, st, b)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let m = nine_clauses();
    let d = Ordering::identity(8);
    let tree = tree_for(&m, &d);
    let chain = Arc::new(PseudoTree::chain(&d));
    let mut out = Vec::new();
    for (name, t, nodes, edges) in [("pseudo tree", &tree, 18, 47), ("chain", &chain, 27, 54)] {
        let (s, _, b) = compile_both(&m, t);
        for (method, x) in [("search", &s), ("be", &b)] {
            let st = x.stats();
            check(st.meta_nodes == nodes && st.edges == edges, || {
                format!("{name}/{method}: {} nodes {} edges, expected {nodes}/{edges}", st.meta_nodes, st.edges)
            })?;
        }
        out.push(format!("{name} {nodes}/{edges}"));
    }
    let el = start.elapsed();
    check(el < Duration::from_secs(1), || format!("took {el:?}"))?;
    Ok(format!("{} with both compilers in {el:.2?}", out.join(", ")))
}

struct Sample {
    model: GraphicalModel,
    tree: Arc<PseudoTree>,
    search: Aomdd,
    stats: SearchStats,
    be: Aomdd,
}

fn samples() -> (Vec<Sample>, Duration) {
    let mut r = rng(2024);
    let start = Instant::now();
    let out = (0..200)
        .map(|i| {
            let kind = if i % 2 == 0 { ModelKind::Constraint } else { ModelKind::Weighted };
            let model = random_model(&mut r, kind);
            let tree = minfill_tree(&model, i);
            let (search, stats, be) = compile_both(&model, &tree);
            Sample { model, tree, search, stats, be }
        })
        .collect();
    (out, start.elapsed())
}

fn criterion_2(samples: &[Sample], compile_time: Duration) -> Outcome {
    let start = Instant::now();
    for (i, s) in samples.iter().enumerate() {
        check(s.search.structural_eq(&s.be).unwrap(), || format!("model {i}: diagrams differ"))?;
        check(serialize(&s.search) == serialize(&s.be), || format!("model {i}: serializations differ"))?;
    }
    let el = compile_time + start.elapsed();
    check(el < Duration::from_secs(60), || format!("took {el:?}"))?;
    Ok(format!("200 models structurally equal and byte-identical in {el:.2?}"))
}

fn criterion_3(samples: &[Sample]) -> Outcome {
    let mut points = 0usize;
    let mut worst: f64 = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let bf = s.model.brute_force_table(DEFAULT_BRUTE_FORCE).unwrap();
        for (j, x) in all_assignments(s.model.domains()).enumerate() {
            let want = bf.values()[j];
            for d in [&s.search, &s.be] {
                let got = evaluate(d, &x).unwrap();
                match s.model.kind() {
                    ModelKind::Constraint => check(got == want, || format!("model {i} at {x:?}: {got} vs {want}"))?,
                    ModelKind::Weighted => {
                        let rel = if want == got { 0.0 } else { (got - want).abs() / want.abs().max(got.abs()) };
                        worst = worst.max(rel);
                        check(rel <= 1e-9, || format!("model {i} at {x:?}: {got} vs {want}"))?;
                    }
                }
                points += 1;
            }
        }
    }
    Ok(format!("{points} evaluations agree with brute force (worst weighted relative error {worst:.1e})"))
}

const DEFAULT_BRUTE_FORCE: usize = 1 << 24;

fn brute_count(m: &GraphicalModel) -> BigUint {
    let bf = m.brute_force_table(DEFAULT_BRUTE_FORCE).unwrap();
    BigUint::from(bf.values().iter().filter(|&&w| w != 0.0).count())
}

fn criterion_4(samples: &[Sample]) -> Outcome {
    let q = queens(4);
    let (s, _, b) = compile_both(&q, &minfill_tree(&q, 0));
    for d in [&s, &b] {
        let c = count_solutions(d, &Evidence::none(4)).unwrap();
        check(c == BigUint::from(2u32), || format!("4-queens count {c}"))?;
    }
    let sols = enumerate_solutions(&s, &Evidence::none(4), Some(10)).unwrap();
    let boards: Vec<Vec<usize>> = sols.into_iter().map(|(x, _)| x).collect();
    check(boards == vec![vec![1, 3, 0, 2], vec![2, 0, 3, 1]], || format!("4-queens boards {boards:?}"))?;
    for (i, s) in samples.iter().enumerate() {
        let want = brute_count(&s.model);
        for d in [&s.search, &s.be] {
            let got = count_solutions(d, &Evidence::none(s.model.num_vars())).unwrap();
            check(got == want, || format!("model {i}: count {got} vs {want}"))?;
        }
    }
    Ok("4-queens has 2 solutions; 200 random counts exact".into())
}

fn criterion_5(samples: &[Sample]) -> Outcome {
    let mut r = rng(5);
    let mut n = 0;
    for (i, s) in samples.iter().enumerate().filter(|(_, s)| s.model.kind() == ModelKind::Weighted) {
        let bf = s.model.brute_force_table(DEFAULT_BRUTE_FORCE).unwrap();
        let total: f64 = bf.values().iter().sum();
        let max = bf.values().iter().cloned().fold(0.0, f64::max);
        for d in [&s.search, &s.be] {
            let none = Evidence::none(s.model.num_vars());
            let sum = sum_over(d, &none).unwrap();
            check(rel_close(sum, total, 1e-9), || format!("model {i}: sum {sum} vs {total}"))?;
            check(rel_close(d.root_constant(), total, 1e-9), || {
                format!("model {i}: root constant {}", d.root_constant())
            })?;
            if total > 0.0 {
                let t = sum_traversal(d);
                check((t - 1.0).abs() <= 1e-9, || format!("model {i}: normalized traversal {t}"))?;
            }
            let (v, x) = mpe(d, &none).unwrap();
            check(rel_close(v, max, 1e-9), || format!("model {i}: mpe {v} vs {max}"))?;
            check(evaluate(d, &x).unwrap() == v, || format!("model {i}: witness does not evaluate to mpe value"))?;

            // one random observation, checked against the brute-force table
            let var = r.gen_range(0..s.model.num_vars());
            let val = r.gen_range(0..s.model.domain_size(var));
            let mut e = Evidence::none(s.model.num_vars());
            e.observe(var, val);
            let want: f64 = all_assignments(s.model.domains())
                .zip(bf.values())
                .filter(|(x, _)| x[var] == val)
                .map(|(_, w)| w)
                .sum();
            let got = sum_over(d, &e).unwrap();
            check(rel_close(got, want, 1e-9), || format!("model {i}: evidence sum {got} vs {want}"))?;
            let want_max = all_assignments(s.model.domains())
                .zip(bf.values())
                .filter(|(x, _)| x[var] == val)
                .map(|(_, w)| *w)
                .fold(0.0, f64::max);
            let (v, x) = mpe(d, &e).unwrap();
            check(rel_close(v, want_max, 1e-9) && x[var] == val, || {
                format!("model {i}: evidence mpe {v} vs {want_max}")
            })?;
        }
        n += 1;
    }
    Ok(format!("{n} weighted models: sums, traversal = 1, MPE and evidence queries agree"))
}

fn criterion_6(samples: &[Sample]) -> Outcome {
    let mut tightest = 0.0f64;
    for (i, s) in samples.iter().enumerate() {
        let g = PrimalGraph::from_model(&s.model);
        let contexts = compute_contexts(&s.tree, &g);
        let w = contexts.iter().map(Vec::len).max().unwrap_or(0);
        let k = s.model.max_domain();
        let n = s.model.num_vars();
        let table = s.search.table();
        for (v, ctx) in contexts.iter().enumerate() {
            let bound: usize = ctx.iter().map(|&c| s.model.domain_size(c)).product();
            let created = table.created(v);
            check(s.stats.or_expansions[v] <= bound, || {
                format!("model {i} var {v}: {} OR expansions > {bound}", s.stats.or_expansions[v])
            })?;
            check(created <= bound, || format!("model {i} var {v}: {created} nodes created > {bound}"))?;
            for d in [&s.search, &s.be] {
                check(d.stats().per_var[v] <= bound, || format!("model {i} var {v}: final count above {bound}"))?;
            }
        }
        let total_bound = n * k.pow(w as u32);
        let total = s.search.stats().meta_nodes;
        check(total <= total_bound, || format!("model {i}: {total} nodes > n k^w = {total_bound}"))?;
        tightest = tightest.max(total as f64 / total_bound as f64);
    }
    Ok(format!("per-variable context bounds and n k^w hold (largest ratio {tightest:.2})"))
}

fn criterion_7() -> Outcome {
    let mut r = rng(77);
    let mut done = 0;
    let mut tries = 0;
    while done < 50 {
        tries += 1;
        let m = random_model(&mut r, ModelKind::Weighted);
        let fs = m.functions();
        // a pair of distinct functions with a shared variable
        let pair = (0..fs.len())
            .flat_map(|i| (0..fs.len()).map(move |j| (i, j)))
            .find(|&(i, j)| i != j && fs[i].scope().iter().any(|v| fs[j].scope().contains(v)));
        let Some((i, j)) = pair else { continue };
        let c = r.gen_range(0.1..10.0);
        let mut scaled = fs.to_vec();
        scaled[i] = fs[i].scaled(c).unwrap();
        scaled[j] = fs[j].scaled(1.0 / c).unwrap();
        let m2 = m.with_functions(scaled).unwrap();
        let t = minfill_tree(&m, tries);
        let (a, _, _) = compile_both(&m, &t);
        let (b, _, b2) = compile_both(&m2, &t);
        check(a.structural_eq(&b).unwrap() && a.structural_eq(&b2).unwrap(), || {
            format!("reparameterized model {done} (c = {c}) compiles differently")
        })?;
        check(equivalent(&a, &b).unwrap(), || format!("model {done}: equivalent() disagrees"))?;
        done += 1;
    }
    Ok("50 reparameterized weighted models give structurally equal diagrams".into())
}

fn criterion_8() -> Outcome {
    let n = 20;
    let m = all_pairs_equal(n, 3);
    let t = minfill_tree(&m, 0);
    let (s, _, b) = compile_both(&m, &t);
    let (ns, nb) = (s.stats().meta_nodes, b.stats().meta_nodes);
    check(ns <= 4 * n && nb <= 4 * n, || format!("{ns} / {nb} meta-nodes, bound {}", 4 * n))?;
    let c = count_solutions(&s, &Evidence::none(n)).unwrap();
    check(c == BigUint::from(3u32), || format!("count {c}, expected 3"))?;
    Ok(format!("n = 20, k = 3: {ns} meta-nodes (bound {})", 4 * n))
}

fn criterion_9() -> Outcome {
    let mut r = rng(9);
    let mut saved = 0usize;
    for i in 0..50 {
        let m = random_cnf(&mut r);
        let t = minfill_tree(&m, i);
        let opts = CompileOptions::default();
        let (a, sa) = compile_search(&m, Arc::clone(&t), &mut NoPruning, &opts).unwrap();
        let (b, sb) = compile_search(&m, Arc::clone(&t), &mut bcp_hook(&m), &opts).unwrap();
        check(a.structural_eq(&b).unwrap(), || format!("cnf {i}: BCP changed the diagram"))?;
        for v in 0..m.num_vars() {
            check(sb.or_expansions[v] <= sa.or_expansions[v] && sb.and_expansions[v] <= sa.and_expansions[v], || {
                format!("cnf {i} var {v}: BCP increased expansions")
            })?;
        }
        saved += sa.and_expansions.iter().sum::<usize>() - sb.and_expansions.iter().sum::<usize>();
    }
    Ok(format!("50 CNFs identical with BCP; {saved} AND expansions saved"))
}

fn main() {
    let (samples, compile_time) = samples();
    let results: Vec<(usize, &str, Outcome)> = vec![
        (1, "reference network sizes", criterion_1()),
        (2, "cross-compiler canonicity", criterion_2(&samples, compile_time)),
        (3, "evaluation matches brute force", criterion_3(&samples)),
        (4, "solution counting", criterion_4(&samples)),
        (5, "weighted queries", criterion_5(&samples)),
        (6, "width bounds", criterion_6(&samples)),
        (7, "reparameterization canonicity", criterion_7()),
        (8, "redundancy payoff", criterion_8()),
        (9, "pruning neutrality", criterion_9()),
    ];
    let mut failed = 0;
    for (n, name, r) in &results {
        match r {
            Ok(msg) => println!("PASS criterion {n} ({name}): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
