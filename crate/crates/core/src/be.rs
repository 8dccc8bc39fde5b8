//! Compilation by bucket elimination with the APPLY operator.
//!
//! Every input function is first turned into a small diagram over the chain
//! of its scope, then buckets are processed bottom-up along the pseudo
//! tree: the contents of a bucket are multiplied together with APPLY and
//! the product is passed to the parent bucket. All diagrams live in one
//! unique table, so intermediate results share nodes.

use std::collections::HashMap;
use std::sync::Arc;

use crate::diagram::{Aomdd, NodeRef, Scaled, UniqueTable};
use crate::error::{Error, Result};
use crate::model::{GraphicalModel, TableFunction, Var};
use crate::structure::{compute_buckets, PrimalGraph, PseudoTree};
use crate::CompileOptions;

/// Memo for [`apply`], keyed by the sorted set of operand nodes.
#[derive(Debug, Default, Clone)]
pub struct ApplyMemo {
    map: HashMap<Vec<NodeRef>, Scaled>,
    hits: usize,
}

impl ApplyMemo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn hits(&self) -> usize {
        self.hits
    }
}

/// Diagram of one function over the chain of its scope, ordered by depth
/// in the table's pseudo tree. The scope must lie on one root-to-leaf path.
pub fn function_to_chain_aomdd(table: &mut UniqueTable, f: &TableFunction) -> Result<Scaled> {
    let tree = Arc::clone(table.tree());
    let mut order: Vec<usize> = (0..f.arity()).collect();
    order.sort_by_key(|&i| tree.depth(f.scope()[i]));
    for w in order.windows(2) {
        let (a, b) = (f.scope()[w[0]], f.scope()[w[1]]);
        if !tree.is_proper_ancestor(a, b) {
            return Err(Error::Structure(format!(
                "function scope variables {a} and {b} are on different pseudo-tree branches"
            )));
        }
    }
    let mut tuple = vec![0usize; f.arity()];
    chain_level(table, f, &order, 0, &mut tuple)
}

fn chain_level(
    table: &mut UniqueTable,
    f: &TableFunction,
    order: &[usize],
    level: usize,
    tuple: &mut Vec<usize>,
) -> Result<Scaled> {
    if level == order.len() {
        let w = f.value(tuple);
        return Ok(if w == 0.0 { Scaled::zero() } else { Scaled { nodes: vec![NodeRef::ONE], factor: w } });
    }
    let pos = order[level];
    let var = f.scope()[pos];
    let mut arcs = Vec::with_capacity(f.domains()[pos]);
    for x in 0..f.domains()[pos] {
        tuple[pos] = x;
        let s = chain_level(table, f, order, level + 1, tuple)?;
        arcs.push((s.factor, s.nodes));
    }
    tuple[pos] = 0;
    table.make_node(var, arcs)
}

/// Groups `vars` by pseudo-tree ancestry. Each group lists indices into
/// `vars`, the shallowest first, followed by the entries in its subtree.
/// Entries must form at most two antichains (one per operand list).
pub fn group_descendants(tree: &PseudoTree, vars: &[Var]) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..vars.len()).collect();
    idx.sort_by_key(|&i| (tree.preorder(vars[i]), i));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match groups.last_mut() {
            Some(g) if tree.is_ancestor_or_self(vars[g[0]], vars[i]) => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Product of two AND lists, each made of nodes over disjoint subtrees.
pub fn apply_lists(table: &mut UniqueTable, memo: &mut ApplyMemo, a: &[NodeRef], b: &[NodeRef]) -> Result<Scaled> {
    if a.contains(&NodeRef::ZERO) || b.contains(&NodeRef::ZERO) {
        return Ok(Scaled::zero());
    }
    let items: Vec<NodeRef> = a.iter().chain(b).copied().filter(|&r| r != NodeRef::ONE).collect();
    let vars: Vec<Var> = items.iter().map(|&r| table.var(r).expect("non-terminal")).collect();
    let tree = Arc::clone(table.tree());
    let mut nodes = Vec::new();
    let mut factor = 1.0;
    for g in group_descendants(&tree, &vars) {
        let rest: Vec<NodeRef> = g[1..].iter().map(|&i| items[i]).collect();
        let s = apply(table, memo, items[g[0]], &rest)?;
        if s.is_zero() {
            return Ok(Scaled::zero());
        }
        factor *= s.factor;
        nodes.extend(s.nodes);
    }
    Ok(Scaled { nodes: table.canonical_list(nodes), factor })
}

/// Product of the diagram rooted at `v1` with the AND list `zs`, whose
/// nodes all sit at or below the variable of `v1`.
pub fn apply(table: &mut UniqueTable, memo: &mut ApplyMemo, v1: NodeRef, zs: &[NodeRef]) -> Result<Scaled> {
    if v1 == NodeRef::ZERO || zs.contains(&NodeRef::ZERO) {
        return Ok(Scaled::zero());
    }
    if v1 == NodeRef::ONE {
        return Ok(Scaled { nodes: table.canonical_list(zs.to_vec()), factor: 1.0 });
    }
    let zs: Vec<NodeRef> = zs.iter().copied().filter(|&r| r != NodeRef::ONE).collect();
    if zs.is_empty() {
        return Ok(Scaled { nodes: vec![v1], factor: 1.0 });
    }
    let mut key = zs.clone();
    key.push(v1);
    key.sort_unstable();
    if let Some(hit) = memo.map.get(&key) {
        memo.hits += 1;
        return Ok(hit.clone());
    }

    let x = table.var(v1).expect("non-terminal");
    let tree = Arc::clone(table.tree());
    let mut same: Option<NodeRef> = None;
    let mut rest = Vec::with_capacity(zs.len());
    for &z in &zs {
        let zv = table.var(z).expect("non-terminal");
        if zv == x {
            if same.replace(z).is_some() {
                return Err(Error::Internal(format!("two operands of APPLY rooted at {x}")));
            }
        } else if tree.is_proper_ancestor(x, zv) {
            rest.push(z);
        } else {
            return Err(Error::Internal(format!("APPLY operand at {zv} is not below {x}")));
        }
    }

    let k = table.domains()[x];
    let mut arcs = Vec::with_capacity(k);
    for i in 0..k {
        let (a, ca) = {
            let b = &table.node(v1).branches[i];
            (b.weight, b.children.to_vec())
        };
        let (b, cb) = match same {
            Some(w) => {
                let br = &table.node(w).branches[i];
                (br.weight, br.children.to_vec())
            }
            None => (1.0, vec![NodeRef::ONE]),
        };
        if a == 0.0 || b == 0.0 {
            arcs.push((0.0, vec![NodeRef::ZERO]));
            continue;
        }
        let s1 = apply_lists(table, memo, &ca, &cb)?;
        if s1.is_zero() {
            arcs.push((0.0, vec![NodeRef::ZERO]));
            continue;
        }
        let s2 = apply_lists(table, memo, &s1.nodes, &rest)?;
        arcs.push((a * b * s1.factor * s2.factor, s2.nodes));
    }
    let out = table.make_node(x, arcs)?;
    memo.map.insert(key, out.clone());
    Ok(out)
}

/// What happened in one bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketReport {
    pub var: Var,
    pub functions: usize,
    pub messages: usize,
    /// Meta-nodes reachable from the bucket's product.
    pub result_nodes: usize,
    /// Unique-table size after the bucket was processed.
    pub table_size: usize,
}

/// Runs bucket elimination inside `table` and returns the finished root.
pub fn compile_be_in(
    table: &mut UniqueTable,
    model: &GraphicalModel,
    memo: &mut ApplyMemo,
) -> Result<(Scaled, Vec<BucketReport>)> {
    let tree = Arc::clone(table.tree());
    if tree.universe() != model.num_vars() || tree.len() != model.num_vars() {
        return Err(Error::Structure("pseudo tree does not cover the model's variables".into()));
    }
    if !tree.has_backarc_property(&PrimalGraph::from_model(model)) {
        return Err(Error::Structure("pseudo tree violates the backarc property for this model".into()));
    }
    let buckets = compute_buckets(&tree, model)?;
    let mut inbox: Vec<Vec<Scaled>> = vec![Vec::new(); model.num_vars()];
    let mut reports = Vec::with_capacity(model.num_vars());
    let mut root = Scaled::one();
    for &v in tree.dfs_order().iter().rev() {
        let messages = std::mem::take(&mut inbox[v]);
        let mut acc = Scaled::one();
        let mut items = Vec::with_capacity(buckets[v].len() + messages.len());
        for &fi in &buckets[v] {
            items.push(function_to_chain_aomdd(table, &model.functions()[fi])?);
        }
        let n_messages = messages.len();
        items.extend(messages);
        for s in items {
            if acc.is_zero() {
                break;
            }
            if s.is_zero() {
                acc = Scaled::zero();
                break;
            }
            let p = apply_lists(table, memo, &acc.nodes, &s.nodes)?;
            acc = Scaled { nodes: p.nodes, factor: acc.factor * s.factor * p.factor };
        }
        if acc.is_zero() {
            acc = Scaled::zero();
        }
        reports.push(BucketReport {
            var: v,
            functions: buckets[v].len(),
            messages: n_messages,
            result_nodes: table.postorder(&acc.nodes).len(),
            table_size: table.len(),
        });
        match tree.parent(v) {
            Some(p) => inbox[p].push(acc),
            None => root = acc,
        }
    }
    Ok((table.finish_root(root), reports))
}

/// Compiles `model` along `tree` by bucket elimination.
pub fn compile_be(
    model: &GraphicalModel,
    tree: Arc<PseudoTree>,
    opts: &CompileOptions,
) -> Result<(Aomdd, Vec<BucketReport>)> {
    let mut table = opts.table_for(model, tree);
    let (root, reports) = compile_be_in(&mut table, model, &mut ApplyMemo::new())?;
    Ok((Aomdd::new(Arc::new(table), root), reports))
}
