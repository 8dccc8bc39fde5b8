//! Canonical text serialization and Graphviz export of diagrams.
//!
//! Text layout:
//!
//! ```text
//! aomdd 1
//! kind weighted
//! digits 12
//! vars 3
//! domains 2 2 2
//! parents -1 0 0
//! order 0 1 2
//! n 2 1 | 0.25 1 | 0.75 1
//! root 1.5 2
//! ```
//!
//! Nodes are numbered from 2 in postorder from the root list (0 and 1 are
//! the terminals), so equal diagrams produce identical text regardless of
//! how they were built.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::diagram::{Aomdd, Branch, MetaNode, NodeRef, Scaled, UniqueTable};
use crate::error::{Error, Result};
use crate::model::ModelKind;
use crate::structure::PseudoTree;

const MAGIC: &str = "aomdd 1";

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn numbering(d: &Aomdd) -> (Vec<NodeRef>, HashMap<NodeRef, usize>) {
    let order = d.postorder();
    let mut ids: HashMap<NodeRef, usize> = HashMap::from([(NodeRef::ZERO, 0), (NodeRef::ONE, 1)]);
    for (i, &r) in order.iter().enumerate() {
        ids.insert(r, i + 2);
    }
    (order, ids)
}

/// Canonical text form of `d`.
pub fn serialize(d: &Aomdd) -> String {
    let t = d.table();
    let tree = d.tree();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let kind = match d.kind() {
        ModelKind::Constraint => "constraint",
        ModelKind::Weighted => "weighted",
    };
    let _ = writeln!(out, "kind {kind}");
    let _ = writeln!(out, "digits {}", t.digits());
    let _ = writeln!(out, "vars {}", d.num_vars());
    let _ = writeln!(out, "domains {}", join(d.domains()));
    let parents = (0..d.num_vars()).map(|v| tree.parent(v).map_or(-1, |p| p as i64));
    let _ = writeln!(out, "parents {}", join(parents));
    let _ = writeln!(out, "order {}", join(tree.dfs_order()));
    let (order, ids) = numbering(d);
    for r in order {
        let n = d.node(r);
        let _ = write!(out, "n {} {}", ids[&r], n.var);
        for b in n.branches.iter() {
            let _ = write!(out, " | {} {}", t.quantize(b.weight), join(b.children.iter().map(|c| ids[c])));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "root {} {}", t.quantize(d.root_constant()), join(d.root_nodes().iter().map(|c| ids[c])));
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        loop {
            match self.inner.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => return Ok((i + 1, l.trim())),
                None => return Err(Error::parse(0, format!("unexpected end of input, expected {what}"))),
            }
        }
    }

    fn field(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (line, l) = self.next(key)?;
        let rest = l
            .strip_prefix(key)
            .filter(|r| r.is_empty() || r.starts_with(' '))
            .ok_or_else(|| Error::parse(line, format!("expected \"{key}\" line")))?;
        Ok((line, rest.trim()))
    }
}

fn nums<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<Vec<T>> {
    s.split_whitespace().map(|t| t.parse::<T>().map_err(|_| Error::parse(line, format!("bad {what} {t:?}")))).collect()
}

fn weight(line: usize, t: &str) -> Result<f64> {
    let w: f64 = t.parse().map_err(|_| Error::parse(line, format!("bad weight {t:?}")))?;
    if !w.is_finite() || w < 0.0 {
        return Err(Error::parse(line, format!("weight {t} must be finite and non-negative")));
    }
    Ok(w)
}

/// Reads the form written by [`serialize`], validating reducedness.
pub fn deserialize(text: &str) -> Result<Aomdd> {
    let mut lines = Lines { inner: text.lines().enumerate().peekable() };
    let (line, magic) = lines.next("header")?;
    if magic != MAGIC {
        return Err(Error::parse(line, format!("expected \"{MAGIC}\" header")));
    }
    let (line, kind) = lines.field("kind")?;
    let kind = match kind {
        "constraint" => ModelKind::Constraint,
        "weighted" => ModelKind::Weighted,
        other => return Err(Error::parse(line, format!("unknown kind {other:?}"))),
    };
    let (line, digits) = lines.field("digits")?;
    let digits: u32 = digits.parse().map_err(|_| Error::parse(line, "bad digits"))?;
    let (line, n) = lines.field("vars")?;
    let n: usize = n.parse().map_err(|_| Error::parse(line, "bad variable count"))?;
    let (line, doms) = lines.field("domains")?;
    let domains: Vec<usize> = nums(line, doms, "domain size")?;
    if domains.len() != n || domains.contains(&0) {
        return Err(Error::parse(line, "domain line does not match the variable count"));
    }
    let (line, parents) = lines.field("parents")?;
    let parents_v: Vec<i64> = nums(line, parents, "parent")?;
    let (_, order) = lines.field("order")?;
    if parents_v.len() != n {
        return Err(Error::parse(line, "parent line does not match the variable count"));
    }
    let tree = PseudoTree::from_text(&format!("{}\n{}\n", parents, order))?;
    let mut table = UniqueTable::new(Arc::new(tree), domains.clone(), kind).with_digits(digits);

    let mut refs: Vec<NodeRef> = vec![NodeRef::ZERO, NodeRef::ONE];
    loop {
        let (line, l) = lines.next("node or root line")?;
        if let Some(rest) = l.strip_prefix("root ") {
            let mut toks = rest.split_whitespace();
            let c = weight(line, toks.next().ok_or_else(|| Error::parse(line, "missing root constant"))?)?;
            let ids: Vec<usize> = nums(line, &toks.collect::<Vec<_>>().join(" "), "root id")?;
            let nodes = ids
                .iter()
                .map(|&i| refs.get(i).copied().ok_or_else(|| Error::parse(line, format!("unknown node id {i}"))))
                .collect::<Result<Vec<_>>>()?;
            if nodes.is_empty() || table.canonical_list(nodes.clone()) != nodes {
                return Err(Error::parse(line, "root list is not canonical"));
            }
            let root = Scaled { nodes, factor: c };
            if let Ok((l2, extra)) = lines.next("end") {
                return Err(Error::parse(l2, format!("unexpected content after root line: {extra:?}")));
            }
            let d = Aomdd::new(Arc::new(table), root);
            if d.postorder().len() != refs.len() - 2 {
                return Err(Error::Structure("stored diagram contains unreachable nodes".into()));
            }
            return Ok(d);
        }
        let mut parts = l.split('|');
        let head: Vec<usize> = nums(line, parts.next().unwrap_or("").trim_start_matches('n'), "node header")?;
        if head.len() != 2 || head[0] != refs.len() {
            return Err(Error::parse(line, format!("expected node header \"n {} <var>\"", refs.len())));
        }
        let var = head[1];
        if var >= n {
            return Err(Error::parse(line, format!("node variable {var} out of range")));
        }
        let mut branches = Vec::with_capacity(domains[var]);
        for p in parts {
            let mut toks = p.split_whitespace();
            let w = weight(line, toks.next().ok_or_else(|| Error::parse(line, "missing arc weight"))?)?;
            if w != table.quantize(w) || (kind == ModelKind::Constraint && w != 0.0 && w != 1.0) {
                return Err(Error::parse(line, format!("weight {w} is not in stored form")));
            }
            let children = toks
                .map(|t| {
                    let i: usize = t.parse().map_err(|_| Error::parse(line, format!("bad child id {t:?}")))?;
                    refs.get(i).copied().ok_or_else(|| Error::parse(line, format!("child id {i} not yet defined")))
                })
                .collect::<Result<Vec<_>>>()?;
            if children.is_empty() || (w == 0.0) != (children == [NodeRef::ZERO]) {
                return Err(Error::parse(line, "arc weight and children disagree"));
            }
            branches.push(Branch { weight: w, children: children.into_boxed_slice() });
        }
        let r = table
            .insert_stored(MetaNode { var, branches: branches.into_boxed_slice() })
            .map_err(|e| Error::parse(line, e.to_string()))?;
        refs.push(r);
    }
}

/// Graphviz rendering: one record per meta-node with a port per value,
/// arc weights as edge labels, square terminals, and the root constant as
/// the entry point.
pub fn to_dot(d: &Aomdd) -> String {
    let (order, ids) = numbering(d);
    let mut out = String::from("digraph aomdd {\n  node [shape=record];\n");
    let _ = writeln!(out, "  root [shape=plaintext, label=\"{}\"];", d.table().quantize(d.root_constant()));
    let mut used = [false; 2];
    for &r in order.iter().rev() {
        let n = d.node(r);
        let ports: Vec<String> = (0..n.branches.len()).map(|i| format!("<p{i}> {i}")).collect();
        let _ = writeln!(out, "  n{} [label=\"{{x{}|{{{}}}}}\"];", ids[&r], n.var, ports.join("|"));
    }
    for &c in d.root_nodes() {
        let _ = writeln!(out, "  root -> n{};", ids[&c]);
        if c.is_terminal() {
            used[c.raw() as usize] = true;
        }
    }
    for &r in order.iter().rev() {
        let n = d.node(r);
        for (i, b) in n.branches.iter().enumerate() {
            let label = match d.kind() {
                ModelKind::Weighted => format!(" [label=\"{}\"]", d.table().quantize(b.weight)),
                ModelKind::Constraint => String::new(),
            };
            for &c in b.children.iter() {
                if c.is_terminal() {
                    used[c.raw() as usize] = true;
                }
                let _ = writeln!(out, "  n{}:p{i} -> n{}{label};", ids[&r], ids[&c]);
            }
        }
    }
    for (i, u) in used.iter().enumerate() {
        if *u {
            let _ = writeln!(out, "  n{i} [shape=square, label=\"{i}\"];");
        }
    }
    out.push_str("}\n");
    out
}
