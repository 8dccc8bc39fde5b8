//! Queries answered directly on a compiled diagram.
//!
//! Variables removed by redundancy reduction are accounted for when
//! summing or counting (each unobserved skipped variable contributes its
//! domain size) and ignored when evaluating or maximizing.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigUint;

use crate::diagram::{Aomdd, NodeRef};
use crate::error::{Error, Result};
use crate::model::{ModelKind, Var};

/// Observed values for a subset of the variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evidence {
    values: Vec<Option<usize>>,
}

impl Evidence {
    pub fn none(n: usize) -> Self {
        Evidence { values: vec![None; n] }
    }

    /// Checks every observed value against `domains`.
    pub fn new(values: Vec<Option<usize>>, domains: &[usize]) -> Result<Self> {
        if values.len() != domains.len() {
            return Err(Error::Precondition(format!(
                "evidence covers {} variables, model has {}",
                values.len(),
                domains.len()
            )));
        }
        for (v, (val, &k)) in values.iter().zip(domains).enumerate() {
            if let Some(x) = val {
                if *x >= k {
                    return Err(Error::Precondition(format!("evidence value {x} out of range for variable {v}")));
                }
            }
        }
        Ok(Evidence { values })
    }

    pub fn get(&self, v: Var) -> Option<usize> {
        self.values[v]
    }

    pub fn observe(&mut self, v: Var, x: usize) {
        self.values[v] = Some(x);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(Option::is_none)
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.values
    }

    fn allows(&self, v: Var, x: usize) -> bool {
        self.values[v].is_none_or(|e| e == x)
    }
}

fn check_evidence(d: &Aomdd, e: &Evidence) -> Result<()> {
    Evidence::new(e.values.clone(), d.domains()).map(|_| ())
}

fn root_vars(d: &Aomdd) -> Vec<Var> {
    d.root_nodes().iter().filter_map(|&r| d.table().var(r)).collect()
}

/// Value of the diagram at a full assignment: the evaluation scale times
/// the arc weights on the path selected by `x`.
pub fn evaluate(d: &Aomdd, x: &[usize]) -> Result<f64> {
    if x.len() != d.num_vars() {
        return Err(Error::Precondition(format!(
            "assignment has {} values, diagram has {} variables",
            x.len(),
            d.num_vars()
        )));
    }
    for (v, (&val, &k)) in x.iter().zip(d.domains()).enumerate() {
        if val >= k {
            return Err(Error::Precondition(format!("value {val} out of range for variable {v}")));
        }
    }
    if d.is_zero() {
        return Ok(0.0);
    }
    let mut w = d.evaluation_scale();
    let mut stack: Vec<NodeRef> = d.root_nodes().to_vec();
    while let Some(r) = stack.pop() {
        if r == NodeRef::ONE {
            continue;
        }
        if r == NodeRef::ZERO {
            return Ok(0.0);
        }
        let n = d.node(r);
        let b = &n.branches[x[n.var]];
        if b.weight == 0.0 {
            return Ok(0.0);
        }
        w *= b.weight;
        stack.extend(b.children.iter().copied());
    }
    Ok(w)
}

/// Per-variable subtree products of the evidence factors: 1 for observed
/// variables, the domain size otherwise.
fn evidence_spaces(d: &Aomdd, e: &Evidence) -> Vec<f64> {
    let tree = d.tree();
    let mut pe = vec![1.0; d.num_vars()];
    for &v in tree.dfs_order().iter().rev() {
        let own = if e.get(v).is_some() { 1.0 } else { d.domains()[v] as f64 };
        pe[v] = own * tree.children(v).iter().map(|&c| pe[c]).product::<f64>();
    }
    pe
}

struct Summer<'a> {
    d: &'a Aomdd,
    e: &'a Evidence,
    pe: Vec<f64>,
    memo: HashMap<NodeRef, f64>,
}

impl Summer<'_> {
    fn own(&self, v: Var) -> f64 {
        if self.e.get(v).is_some() {
            1.0
        } else {
            self.d.domains()[v] as f64
        }
    }

    fn node(&mut self, r: NodeRef) -> f64 {
        match r {
            NodeRef::ZERO => return 0.0,
            NodeRef::ONE => return 1.0,
            _ => {}
        }
        if let Some(&s) = self.memo.get(&r) {
            return s;
        }
        let d = self.d;
        let n = d.node(r);
        let below = self.pe[n.var] / self.own(n.var);
        let mut total = 0.0;
        for (x, b) in n.branches.iter().enumerate() {
            if b.weight == 0.0 || !self.e.allows(n.var, x) {
                continue;
            }
            let mut s = b.weight * below;
            for &c in b.children.iter() {
                if let Some(cv) = d.table().var(c) {
                    s /= self.pe[cv];
                }
                s *= self.node(c);
            }
            total += s;
        }
        self.memo.insert(r, total);
        total
    }
}

/// Sum of the diagram over all full assignments consistent with `e`.
pub fn sum_over(d: &Aomdd, e: &Evidence) -> Result<f64> {
    check_evidence(d, e)?;
    if d.is_zero() {
        return Ok(0.0);
    }
    let pe = evidence_spaces(d, e);
    let tree = d.tree();
    let mut top: f64 =
        tree.dfs_order().iter().map(|&v| if e.get(v).is_some() { 1.0 } else { d.domains()[v] as f64 }).product();
    for v in root_vars(d) {
        top /= pe[v];
    }
    let mut summer = Summer { d, e, pe, memo: HashMap::new() };
    let mut s = d.evaluation_scale() * top;
    for &r in d.root_nodes() {
        s *= summer.node(r);
    }
    Ok(s)
}

/// Product over the root nodes of their sum-traversals, without the root
/// constant and without evidence. For a normalized weighted diagram this is
/// one; multiplied by the root constant it gives the total mass.
pub fn sum_traversal(d: &Aomdd) -> f64 {
    if d.is_zero() {
        return 0.0;
    }
    let e = Evidence::none(d.num_vars());
    let pe = evidence_spaces(d, &e);
    let mut summer = Summer { d, e: &e, pe, memo: HashMap::new() };
    d.root_nodes().iter().map(|&r| summer.node(r)).product()
}

/// Posterior of `var` given `e`, as ratios of evidence sums.
pub fn belief(d: &Aomdd, e: &Evidence, var: Var) -> Result<Vec<f64>> {
    if var >= d.num_vars() {
        return Err(Error::Precondition(format!("unknown variable {var}")));
    }
    let z = sum_over(d, e)?;
    if z == 0.0 {
        return Err(Error::Precondition("evidence has probability zero".into()));
    }
    (0..d.domains()[var])
        .map(|x| {
            let mut ex = e.clone();
            if e.get(var).is_some_and(|o| o != x) {
                return Ok(0.0);
            }
            ex.observe(var, x);
            Ok(sum_over(d, &ex)? / z)
        })
        .collect()
}

/// Number of full assignments consistent with `e` with nonzero value.
pub fn count_solutions(d: &Aomdd, e: &Evidence) -> Result<BigUint> {
    check_evidence(d, e)?;
    if d.is_zero() {
        return Ok(BigUint::from(0u32));
    }
    let tree = d.tree();
    let own = |v: Var| BigUint::from(if e.get(v).is_some() { 1usize } else { d.domains()[v] });
    let mut pe = vec![BigUint::from(1u32); d.num_vars()];
    for &v in tree.dfs_order().iter().rev() {
        let mut p = own(v);
        for &c in tree.children(v) {
            p *= &pe[c];
        }
        pe[v] = p;
    }
    let mut memo: HashMap<NodeRef, BigUint> = HashMap::new();
    let mut total = BigUint::from(1u32);
    for &v in tree.dfs_order() {
        if tree.parent(v).is_none() {
            total *= &pe[v];
        }
    }
    for v in root_vars(d) {
        total /= &pe[v];
    }
    for &r in d.root_nodes() {
        total *= count_node(d, e, r, &mut memo);
    }
    Ok(total)
}

fn count_node(d: &Aomdd, e: &Evidence, r: NodeRef, memo: &mut HashMap<NodeRef, BigUint>) -> BigUint {
    match r {
        NodeRef::ZERO => return BigUint::from(0u32),
        NodeRef::ONE => return BigUint::from(1u32),
        _ => {}
    }
    if let Some(c) = memo.get(&r) {
        return c.clone();
    }
    let n = d.node(r);
    let tree = d.tree();
    let mut total = BigUint::from(0u32);
    for (x, b) in n.branches.iter().enumerate() {
        if b.weight == 0.0 || !e.allows(n.var, x) {
            continue;
        }
        let covered: Vec<Var> = b.children.iter().filter_map(|&c| d.table().var(c)).collect();
        let mut s = BigUint::from(1u32);
        for u in tree.uncovered(Some(n.var), &covered) {
            if e.get(u).is_none() {
                s *= d.domains()[u];
            }
        }
        for &c in b.children.iter() {
            s *= count_node(d, e, c, memo);
        }
        total += s;
    }
    memo.insert(r, total.clone());
    total
}

/// Most probable explanation: a full assignment consistent with `e` of
/// maximal value. Skipped variables take their evidence value or 0. The
/// returned value is the witness evaluated on the diagram.
pub fn mpe(d: &Aomdd, e: &Evidence) -> Result<(f64, Vec<usize>)> {
    check_evidence(d, e)?;
    let mut witness: Vec<usize> = (0..d.num_vars()).map(|v| e.get(v).unwrap_or(0)).collect();
    if d.is_zero() {
        return Ok((0.0, witness));
    }
    let mut memo: HashMap<NodeRef, (f64, usize)> = HashMap::new();
    let mut best = 1.0;
    for &r in d.root_nodes() {
        best *= max_node(d, e, r, &mut memo);
    }
    if best == 0.0 {
        return Ok((0.0, witness));
    }
    let mut stack: Vec<NodeRef> = d.root_nodes().to_vec();
    while let Some(r) = stack.pop() {
        if r.is_terminal() {
            continue;
        }
        let n = d.node(r);
        let x = memo[&r].1;
        witness[n.var] = x;
        stack.extend(n.branches[x].children.iter().copied());
    }
    let value = evaluate(d, &witness)?;
    Ok((value, witness))
}

fn max_node(d: &Aomdd, e: &Evidence, r: NodeRef, memo: &mut HashMap<NodeRef, (f64, usize)>) -> f64 {
    match r {
        NodeRef::ZERO => return 0.0,
        NodeRef::ONE => return 1.0,
        _ => {}
    }
    if let Some(&(m, _)) = memo.get(&r) {
        return m;
    }
    let n = d.node(r);
    let mut best = (0.0, 0);
    for (x, b) in n.branches.iter().enumerate() {
        if b.weight == 0.0 || !e.allows(n.var, x) {
            continue;
        }
        let mut m = b.weight;
        for &c in b.children.iter() {
            m *= max_node(d, e, c, memo);
        }
        if m > best.0 {
            best = (m, x);
        }
    }
    if best.0 == 0.0 {
        best.1 = e.get(n.var).unwrap_or(0);
    }
    memo.insert(r, best);
    best.0
}

#[derive(Clone, Copy)]
enum Pending {
    Node(NodeRef),
    Free(Var),
}

/// Full assignments consistent with `e` with nonzero value, in
/// depth-first order with values ascending, up to `limit` of them.
pub fn enumerate_solutions(d: &Aomdd, e: &Evidence, limit: Option<usize>) -> Result<Vec<(Vec<usize>, f64)>> {
    check_evidence(d, e)?;
    let mut out = Vec::new();
    if d.is_zero() || limit == Some(0) {
        return Ok(out);
    }
    let tree = d.tree();
    let covered = root_vars(d);
    let mut pending: Vec<Pending> = Vec::new();
    for &v in tree.uncovered(None, &covered).iter().rev() {
        pending.push(Pending::Free(v));
    }
    for &r in d.root_nodes().iter().rev() {
        pending.push(Pending::Node(r));
    }
    let mut x = vec![0usize; d.num_vars()];
    let scale = d.evaluation_scale();
    enumerate_rec(d, e, &mut pending, &mut x, scale, limit, &mut out);
    Ok(out)
}

fn enumerate_rec(
    d: &Aomdd,
    e: &Evidence,
    pending: &mut Vec<Pending>,
    x: &mut Vec<usize>,
    value: f64,
    limit: Option<usize>,
    out: &mut Vec<(Vec<usize>, f64)>,
) {
    if limit.is_some_and(|l| out.len() >= l) {
        return;
    }
    let Some(item) = pending.pop() else {
        out.push((x.clone(), value));
        return;
    };
    match item {
        Pending::Free(v) => {
            for val in 0..d.domains()[v] {
                if !e.allows(v, val) {
                    continue;
                }
                x[v] = val;
                enumerate_rec(d, e, pending, x, value, limit, out);
            }
        }
        Pending::Node(NodeRef::ONE) => enumerate_rec(d, e, pending, x, value, limit, out),
        Pending::Node(NodeRef::ZERO) => {}
        Pending::Node(r) => {
            let n = d.node(r);
            let tree = d.tree();
            for (val, b) in n.branches.iter().enumerate() {
                if b.weight == 0.0 || !e.allows(n.var, val) {
                    continue;
                }
                x[n.var] = val;
                let covered: Vec<Var> = b.children.iter().filter_map(|&c| d.table().var(c)).collect();
                let mark = pending.len();
                for &u in tree.uncovered(Some(n.var), &covered).iter().rev() {
                    pending.push(Pending::Free(u));
                }
                for &c in b.children.iter().rev() {
                    pending.push(Pending::Node(c));
                }
                enumerate_rec(d, e, pending, x, value * b.weight, limit, out);
                pending.truncate(mark);
            }
        }
    }
    pending.push(item);
}

/// Whether two diagrams over the same pseudo tree represent the same
/// function. Diagrams sharing a unique table are compared by root identity.
pub fn equivalent(a: &Aomdd, b: &Aomdd) -> Result<bool> {
    if a.tree() != b.tree() {
        return Err(Error::Structure("equivalence requires the same pseudo tree".into()));
    }
    if Arc::ptr_eq(a.table(), b.table()) {
        let digits = a.table().digits();
        return Ok(a.kind() == b.kind()
            && a.root_nodes() == b.root_nodes()
            && crate::diagram::weights_equal(a.root_constant(), b.root_constant(), digits));
    }
    a.structural_eq(b)
}

/// Whether the diagram is a constraint diagram (0/1 valued).
pub fn is_constraint(d: &Aomdd) -> bool {
    d.kind() == ModelKind::Constraint
}
