use super::uai::Tokens;
use super::{GraphicalModel, ModelKind, TableFunction};
use crate::error::{Error, Result};

/// Parses DIMACS CNF. Each clause becomes a 0/1 table over its variables
/// that forbids the single tuple falsifying every literal.
pub fn parse_dimacs_cnf(text: &str) -> Result<GraphicalModel> {
    // strip comment lines but keep line numbering
    let cleaned: String = text
        .lines()
        .map(|l| {
            let t = l.trim_start();
            if t.starts_with('c') || t.starts_with('%') {
                ""
            } else {
                l
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let mut toks = Tokens::new(&cleaned);
    let (line, p) = toks.next("problem line")?;
    if p != "p" {
        return Err(Error::parse(line, format!("expected \"p cnf V C\" header, found {p:?}")));
    }
    let (line, fmt) = toks.next("format")?;
    if fmt != "cnf" {
        return Err(Error::parse(line, format!("expected format \"cnf\", found {fmt:?}")));
    }
    let nvars = toks.usize("variable count")?;
    let _nclauses = toks.usize("clause count")?;

    let mut functions = Vec::new();
    let mut lits: Vec<i64> = Vec::new();
    let mut clause_line = 0;
    while !toks.done() {
        let (line, t) = toks.next("literal")?;
        if lits.is_empty() {
            clause_line = line;
        }
        let lit: i64 = t.parse().map_err(|_| Error::parse(line, format!("expected literal, found {t:?}")))?;
        if lit == 0 {
            functions.push(clause_table(&lits));
            lits.clear();
            continue;
        }
        if lit.unsigned_abs() as usize > nvars {
            return Err(Error::parse(line, format!("literal {lit} exceeds declared variable count {nvars}")));
        }
        lits.push(lit);
    }
    if !lits.is_empty() {
        return Err(Error::parse(clause_line, "clause is missing its terminating 0"));
    }
    GraphicalModel::new(vec![2; nvars], functions, ModelKind::Constraint)
}

fn clause_table(lits: &[i64]) -> TableFunction {
    let mut scope: Vec<usize> = Vec::new();
    let mut falsifying: Vec<usize> = Vec::new();
    let mut tautology = false;
    for &lit in lits {
        let v = lit.unsigned_abs() as usize - 1;
        // the literal is false when a positive var is 0 or a negative var is 1
        let bad = usize::from(lit < 0);
        match scope.iter().position(|&s| s == v) {
            Some(i) if falsifying[i] != bad => tautology = true,
            Some(_) => {}
            None => {
                scope.push(v);
                falsifying.push(bad);
            }
        }
    }
    let domains = vec![2; scope.len()];
    TableFunction::from_fn(scope, domains, |t| if !tautology && t == falsifying.as_slice() { 0.0 } else { 1.0 })
        .expect("clause tables are well formed")
}
