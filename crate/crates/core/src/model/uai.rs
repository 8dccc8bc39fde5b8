//! UAI model and evidence formats.

use std::fmt::Write as _;

use super::{GraphicalModel, ModelKind, TableFunction};
use crate::error::{Error, Result};

/// Whitespace tokenizer that remembers the line each token came from.
pub(crate) struct Tokens<'a> {
    inner: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        let inner =
            text.lines().enumerate().flat_map(|(i, line)| line.split_whitespace().map(move |t| (i + 1, t))).collect();
        Tokens { inner, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.inner.last().map_or(1, |t| t.0)
    }

    pub(crate) fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let tok = self
            .inner
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::parse(self.last_line(), format!("unexpected end of input, expected {what}")))?;
        self.pos += 1;
        Ok(tok)
    }

    pub(crate) fn usize(&mut self, what: &str) -> Result<usize> {
        let (line, t) = self.next(what)?;
        t.parse().map_err(|_| Error::parse(line, format!("expected {what}, found {t:?}")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let (line, t) = self.next(what)?;
        let w: f64 = t.parse().map_err(|_| Error::parse(line, format!("expected {what}, found {t:?}")))?;
        if !w.is_finite() || w < 0.0 {
            return Err(Error::parse(line, format!("{what} must be finite and non-negative, found {t}")));
        }
        Ok(w)
    }

    pub(crate) fn done(&self) -> bool {
        self.pos >= self.inner.len()
    }

    pub(crate) fn peek_line(&self) -> usize {
        self.inner.get(self.pos).map_or(self.last_line(), |t| t.0)
    }
}

/// Parses a model in the UAI format. `BAYES` and `MARKOV` are both read as
/// weighted models with tables in the declared scope order.
pub fn parse_uai(text: &str) -> Result<GraphicalModel> {
    let mut toks = Tokens::new(text);
    let (line, preamble) = toks.next("preamble")?;
    if preamble != "BAYES" && preamble != "MARKOV" {
        return Err(Error::parse(line, format!("unknown preamble {preamble:?}, expected BAYES or MARKOV")));
    }
    let n = toks.usize("variable count")?;
    let mut domains = Vec::with_capacity(n);
    for _ in 0..n {
        let line = toks.peek_line();
        let k = toks.usize("domain size")?;
        if k == 0 {
            return Err(Error::parse(line, "domain size must be at least 1"));
        }
        domains.push(k);
    }
    let nf = toks.usize("function count")?;
    let mut scopes = Vec::with_capacity(nf);
    for _ in 0..nf {
        let arity = toks.usize("scope size")?;
        let mut scope = Vec::with_capacity(arity);
        for _ in 0..arity {
            let line = toks.peek_line();
            let v = toks.usize("scope variable")?;
            if v >= n {
                return Err(Error::parse(line, format!("scope variable {v} out of range (n = {n})")));
            }
            if scope.contains(&v) {
                return Err(Error::parse(line, format!("variable {v} repeated in scope")));
            }
            scope.push(v);
        }
        scopes.push(scope);
    }
    let mut functions = Vec::with_capacity(nf);
    for scope in scopes {
        let line = toks.peek_line();
        let count = toks.usize("table entry count")?;
        let fdomains: Vec<usize> = scope.iter().map(|&v| domains[v]).collect();
        let expected: usize = fdomains.iter().product();
        if count != expected {
            return Err(Error::parse(line, format!("table declares {count} entries, scope requires {expected}")));
        }
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(toks.f64("table entry")?);
        }
        functions.push(TableFunction::new(scope, fdomains, values).map_err(|e| Error::parse(line, e.to_string()))?);
    }
    if !toks.done() {
        return Err(Error::parse(toks.peek_line(), "trailing tokens after last table"));
    }
    GraphicalModel::new(domains, functions, ModelKind::Weighted)
}

/// Writes a model in the UAI `MARKOV` format. Values use the shortest decimal
/// that reads back to the same `f64`.
pub fn write_uai(model: &GraphicalModel) -> String {
    let mut out = String::new();
    out.push_str("MARKOV\n");
    let _ = writeln!(out, "{}", model.num_vars());
    let doms: Vec<String> = model.domains().iter().map(|k| k.to_string()).collect();
    let _ = writeln!(out, "{}", doms.join(" "));
    let _ = writeln!(out, "{}", model.functions().len());
    for f in model.functions() {
        let mut line = f.arity().to_string();
        for v in f.scope() {
            let _ = write!(line, " {v}");
        }
        let _ = writeln!(out, "{line}");
    }
    for f in model.functions() {
        let _ = writeln!(out, "\n{}", f.values().len());
        let vals: Vec<String> = f.values().iter().map(|w| format!("{w}")).collect();
        let _ = writeln!(out, " {}", vals.join(" "));
    }
    out
}

/// Parses a UAI evidence file: a count followed by variable/value pairs.
/// Returns one slot per model variable.
pub fn parse_evidence(text: &str, model: &GraphicalModel) -> Result<Vec<Option<usize>>> {
    let mut toks = Tokens::new(text);
    let mut evidence = vec![None; model.num_vars()];
    if toks.done() {
        return Ok(evidence);
    }
    let count = toks.usize("evidence count")?;
    for _ in 0..count {
        let line = toks.peek_line();
        let v = toks.usize("evidence variable")?;
        let val = toks.usize("evidence value")?;
        if v >= model.num_vars() {
            return Err(Error::parse(line, format!("unknown evidence variable {v}")));
        }
        if val >= model.domain_size(v) {
            return Err(Error::parse(line, format!("value {val} out of range for variable {v}")));
        }
        evidence[v] = Some(val);
    }
    if !toks.done() {
        return Err(Error::parse(toks.peek_line(), "trailing tokens in evidence"));
    }
    Ok(evidence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_instance() {
        let m = parse_uai("MARKOV 1 2 1 1 0 2 0.4 0.6").unwrap();
        assert_eq!(m.num_vars(), 1);
        assert_eq!(m.domain_size(0), 2);
        assert_eq!(m.functions().len(), 1);
        assert_eq!(m.functions()[0].values(), &[0.4, 0.6]);
        assert_eq!(m.kind(), ModelKind::Weighted);
    }

    #[test]
    fn bad_preamble_is_named() {
        let err = parse_uai("FOO 1 2 0").unwrap_err();
        assert!(err.to_string().contains("FOO"), "{err}");
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn short_table_is_rejected() {
        let err = parse_uai("MARKOV\n1\n2\n1\n1 0\n3 0.1 0.2 0.3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 6, .. }), "{err}");
    }

    #[test]
    fn truncated_table_is_rejected() {
        let err = parse_uai("MARKOV\n1\n2\n1\n1 0\n2 0.1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn scope_variable_out_of_range() {
        assert!(parse_uai("MARKOV 1 2 1 1 3 2 0.4 0.6").is_err());
    }

    #[test]
    fn bayes_preamble_reads_like_markov() {
        let text = "BAYES\n2\n2 2\n2\n1 0\n2 0 1\n2\n0.3 0.7\n4\n0.9 0.1 0.2 0.8\n";
        let m = parse_uai(text).unwrap();
        assert_eq!(m.functions()[1].scope(), &[0, 1]);
        assert_eq!(m.functions()[1].value(&[1, 0]), 0.2);
    }

    #[test]
    fn evidence_parsing() {
        let m = parse_uai("MARKOV 3 2 2 3 0").unwrap();
        assert_eq!(parse_evidence("2 0 1 2 2", &m).unwrap(), vec![Some(1), None, Some(2)]);
        assert_eq!(parse_evidence("", &m).unwrap(), vec![None, None, None]);
        assert!(parse_evidence("1 5 0", &m).is_err());
        assert!(parse_evidence("1 1 2", &m).is_err());
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(
            doms in proptest::collection::vec(1usize..4, 1..5),
            raw in proptest::collection::vec(0.0f64..10.0, 64),
            pairs in proptest::collection::vec((0usize..5, 0usize..5), 0..4),
        ) {
            let n = doms.len();
            let mut functions = Vec::new();
            let mut r = raw.iter().cycle();
            for (a, b) in pairs {
                let (a, b) = (a % n, b % n);
                let scope = if a == b { vec![a] } else { vec![a, b] };
                let fd: Vec<usize> = scope.iter().map(|&v| doms[v]).collect();
                let size: usize = fd.iter().product();
                let vals: Vec<f64> = (0..size).map(|_| *r.next().unwrap()).collect();
                functions.push(TableFunction::new(scope, fd, vals).unwrap());
            }
            let m = GraphicalModel::new(doms, functions, ModelKind::Weighted).unwrap();
            let text = write_uai(&m);
            let back = parse_uai(&text).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(write_uai(&back), text);
        }
    }
}
