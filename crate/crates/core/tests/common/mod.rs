#![allow(dead_code)]

use std::sync::Arc;

use aomdd::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const A: Var = 0;
pub const B: Var = 1;
pub const C: Var = 2;
pub const D: Var = 3;
pub const E: Var = 4;
pub const F: Var = 5;
pub const G: Var = 6;
pub const H: Var = 7;

fn rel(scope: Vec<Var>, f: impl Fn(&[usize]) -> bool) -> TableFunction {
    let doms = vec![2; scope.len()];
    TableFunction::from_fn(scope, doms, |x| if f(x) { 1.0 } else { 0.0 }).unwrap()
}

/// The nine-constraint network over A..H.
pub fn nine_clause_functions() -> Vec<TableFunction> {
    vec![
        rel(vec![F, H], |x| x[0] == 1 || x[1] == 1),
        rel(vec![A, H], |x| x[0] == 1 || x[1] == 0),
        rel(vec![A, B, G], |x| (x[0] ^ x[1] ^ x[2]) == 1),
        rel(vec![F, G], |x| x[0] == 1 || x[1] == 1),
        rel(vec![B, F], |x| x[0] == 1 || x[1] == 1),
        rel(vec![A, E], |x| x[0] == 1 || x[1] == 1),
        rel(vec![C, E], |x| x[0] == 1 || x[1] == 1),
        rel(vec![C, D], |x| (x[0] ^ x[1]) == 1),
        rel(vec![B, C], |x| x[0] == 1 || x[1] == 1),
    ]
}

pub fn nine_clauses() -> GraphicalModel {
    GraphicalModel::new(vec![2; 8], nine_clause_functions(), ModelKind::Constraint).unwrap()
}

pub fn nine_clauses_without_last() -> GraphicalModel {
    let mut fs = nine_clause_functions();
    fs.pop();
    GraphicalModel::new(vec![2; 8], fs, ModelKind::Constraint).unwrap()
}

pub fn tree_for(model: &GraphicalModel, d: &Ordering) -> Arc<PseudoTree> {
    Arc::new(PseudoTree::generate(&PrimalGraph::from_model(model), d))
}

pub fn minfill_tree(model: &GraphicalModel, seed: u64) -> Arc<PseudoTree> {
    let g = PrimalGraph::from_model(model);
    Arc::new(PseudoTree::generate(&g, &min_fill_ordering(&g, seed)))
}

/// N-queens with one variable per row holding the column.
pub fn queens(n: usize) -> GraphicalModel {
    let mut fs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let gap = j - i;
            fs.push(
                TableFunction::from_fn(vec![i, j], vec![n, n], |x| {
                    let ok = x[0] != x[1] && x[0].abs_diff(x[1]) != gap;
                    if ok {
                        1.0
                    } else {
                        0.0
                    }
                })
                .unwrap(),
            );
        }
    }
    GraphicalModel::new(vec![n; n], fs, ModelKind::Constraint).unwrap()
}

/// Pairwise equality between every two of `n` variables with domain `k`.
pub fn all_pairs_equal(n: usize, k: usize) -> GraphicalModel {
    let mut fs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            fs.push(TableFunction::from_fn(vec![i, j], vec![k, k], |x| if x[0] == x[1] { 1.0 } else { 0.0 }).unwrap());
        }
    }
    GraphicalModel::new(vec![k; n], fs, ModelKind::Constraint).unwrap()
}

/// A random model with at most 12 variables, domains up to 3, at most 15
/// functions of arity at most 3. Constraint tables are sparse enough in
/// zeros to keep solutions around; weighted tables mix zeros and values.
pub fn random_model(rng: &mut ChaCha8Rng, kind: ModelKind) -> GraphicalModel {
    let n = rng.gen_range(1..=12);
    let domains: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=3)).collect();
    let nf = rng.gen_range(0..=15);
    let mut fs = Vec::with_capacity(nf);
    for _ in 0..nf {
        let arity = rng.gen_range(0..=3.min(n));
        let mut scope: Vec<Var> = Vec::with_capacity(arity);
        while scope.len() < arity {
            let v = rng.gen_range(0..n);
            if !scope.contains(&v) {
                scope.push(v);
            }
        }
        let fd: Vec<usize> = scope.iter().map(|&v| domains[v]).collect();
        let zero_p = rng.gen_range(0.0..0.35);
        let f = TableFunction::from_fn(scope, fd, |_| {
            if rng.gen_bool(zero_p) {
                0.0
            } else {
                match kind {
                    ModelKind::Constraint => 1.0,
                    ModelKind::Weighted => {
                        if rng.gen_bool(0.2) {
                            rng.gen_range(1..=4) as f64
                        } else {
                            rng.gen_range(0.01..10.0)
                        }
                    }
                }
            }
        })
        .unwrap();
        fs.push(f);
    }
    GraphicalModel::new(domains, fs, kind).unwrap()
}

/// A random 3-CNF-like formula with unit and binary clauses mixed in.
pub fn random_cnf(rng: &mut ChaCha8Rng) -> GraphicalModel {
    let n = rng.gen_range(3..=12);
    let m = rng.gen_range(1..=(2 * n));
    let mut text = format!("p cnf {n} {m}\n");
    for _ in 0..m {
        let len = rng.gen_range(1..=3);
        for _ in 0..len {
            let v = rng.gen_range(1..=n) as i64;
            let lit = if rng.gen_bool(0.5) { v } else { -v };
            text.push_str(&format!("{lit} "));
        }
        text.push_str("0\n");
    }
    parse_dimacs_cnf(&text).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}
