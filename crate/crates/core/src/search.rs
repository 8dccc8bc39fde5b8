//! Compilation by depth-first AND/OR search with context-based caching.
//!
//! Meta-nodes are reduced as the search backtracks out of each OR node, so
//! the trace never has to be stored. [`context_minimal_graph`] and
//! [`bottom_up_reduction`] provide the two-phase variant (build the full
//! context-minimal graph, then reduce it level by level) for comparison.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::diagram::{Aomdd, NodeRef, Scaled, UniqueTable};
use crate::error::{Error, Result};
use crate::model::{Assignment, GraphicalModel, Var};
use crate::structure::{compute_buckets, compute_contexts, PrimalGraph, PseudoTree};
use crate::CompileOptions;

/// Consistency test run before expanding an AND node.
///
/// Implementations must be sound: never report an assignment inconsistent
/// when it extends to a nonzero-weight assignment of the subproblem below
/// `var`. The result may depend only on `var`, `value` and the values of
/// the context of `var`, or cached subproblems would be wrong.
pub trait PruningHook {
    /// Called once per compilation before the search starts.
    fn bind(&mut self, _tree: &PseudoTree, _buckets: &[Vec<usize>]) {}

    /// `partial` already holds `var = value`.
    fn consistent(&mut self, var: Var, value: usize, partial: &Assignment) -> bool;
}

/// Only the zero-weight check, which the search always performs.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoPruning;

impl PruningHook for NoPruning {
    fn consistent(&mut self, _var: Var, _value: usize, _partial: &Assignment) -> bool {
        true
    }
}

/// Unit propagation over the zero tuples of the model's functions, each
/// read as a nogood clause `not (X1 = a1 and ... and Xr = ar)`.
#[derive(Debug, Clone)]
pub struct UnitPropagation {
    domains: Vec<usize>,
    nogoods: Vec<Vec<(Var, usize)>>,
    by_function: Vec<Vec<usize>>,
    // per variable, the nogoods of functions in buckets of its subtree
    scoped: Vec<Vec<usize>>,
}

/// Builds the unit-propagation hook for `model`.
pub fn bcp_hook(model: &GraphicalModel) -> UnitPropagation {
    UnitPropagation::new(model)
}

impl UnitPropagation {
    pub fn new(model: &GraphicalModel) -> Self {
        let mut nogoods = Vec::new();
        let mut by_function = Vec::with_capacity(model.functions().len());
        for f in model.functions() {
            let mut ids = Vec::new();
            for tuple in f.zero_tuples() {
                ids.push(nogoods.len());
                nogoods.push(f.scope().iter().copied().zip(tuple).collect());
            }
            by_function.push(ids);
        }
        UnitPropagation { domains: model.domains().to_vec(), nogoods, by_function, scoped: Vec::new() }
    }

    pub fn num_clauses(&self) -> usize {
        self.nogoods.len()
    }

    /// Propagates the given nogoods (all of them when `clauses` is `None`)
    /// under `partial`. Returns the surviving values per variable, or
    /// `None` when some nogood is violated or a domain empties.
    pub fn propagate(&self, partial: &Assignment, clauses: Option<&[usize]>) -> Option<Vec<Vec<bool>>> {
        let mut live: Vec<Vec<bool>> = self
            .domains
            .iter()
            .enumerate()
            .map(|(v, &k)| match partial.get(v) {
                Some(x) => (0..k).map(|i| i == x).collect(),
                None => vec![true; k],
            })
            .collect();
        let mut count: Vec<usize> = live.iter().map(|d| d.iter().filter(|&&b| b).count()).collect();
        let all: Vec<usize>;
        let ids: &[usize] = match clauses {
            Some(c) => c,
            None => {
                all = (0..self.nogoods.len()).collect();
                &all
            }
        };
        loop {
            let mut changed = false;
            for &ci in ids {
                let ng = &self.nogoods[ci];
                let mut open: Option<(Var, usize)> = None;
                let mut n_open = 0;
                let mut satisfied = false;
                for &(v, a) in ng {
                    if !live[v][a] {
                        satisfied = true;
                        break;
                    }
                    if count[v] > 1 {
                        n_open += 1;
                        open = Some((v, a));
                    }
                }
                if satisfied {
                    continue;
                }
                match n_open {
                    0 => return None,
                    1 => {
                        let (v, a) = open.expect("one open literal");
                        live[v][a] = false;
                        count[v] -= 1;
                        if count[v] == 0 {
                            return None;
                        }
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return Some(live);
            }
        }
    }
}

impl PruningHook for UnitPropagation {
    fn bind(&mut self, tree: &PseudoTree, buckets: &[Vec<usize>]) {
        self.scoped = vec![Vec::new(); tree.universe()];
        for &v in tree.dfs_order() {
            let mut ids: Vec<usize> = tree
                .subtree(v)
                .iter()
                .flat_map(|&u| buckets[u].iter())
                .flat_map(|&f| self.by_function[f].iter().copied())
                .collect();
            ids.sort_unstable();
            self.scoped[v] = ids;
        }
    }

    fn consistent(&mut self, var: Var, _value: usize, partial: &Assignment) -> bool {
        let ids = if self.scoped.is_empty() { None } else { Some(self.scoped[var].as_slice()) };
        self.propagate(partial, ids).is_some()
    }
}

/// Per-variable search counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// OR nodes expanded (cache misses).
    pub or_expansions: Vec<usize>,
    /// AND nodes expanded (values that passed the weight and hook checks).
    pub and_expansions: Vec<usize>,
    pub cache_hits: Vec<usize>,
    /// Values rejected by the pruning hook after a nonzero weight.
    pub pruned: Vec<usize>,
}

impl SearchStats {
    fn new(n: usize) -> Self {
        SearchStats {
            or_expansions: vec![0; n],
            and_expansions: vec![0; n],
            cache_hits: vec![0; n],
            pruned: vec![0; n],
        }
    }

    /// One line per variable: `var or and hits pruned`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# var or_expansions and_expansions cache_hits pruned\n");
        for v in 0..self.or_expansions.len() {
            let _ = writeln!(
                out,
                "{v} {} {} {} {}",
                self.or_expansions[v], self.and_expansions[v], self.cache_hits[v], self.pruned[v]
            );
        }
        out
    }
}

/// Product of the bucket functions of `var` at `partial`, which must
/// assign every scope variable (including `var`).
pub fn arc_weight(model: &GraphicalModel, bucket: &[usize], partial: &Assignment) -> Result<f64> {
    let mut w = 1.0;
    for &fi in bucket {
        let f = &model.functions()[fi];
        w *= f.eval(partial).ok_or_else(|| {
            Error::Internal(format!("bucket function {fi} evaluated with an unassigned scope variable"))
        })?;
        if w == 0.0 {
            break;
        }
    }
    Ok(w)
}

/// Reduces a level of candidate meta-nodes for one variable, each given as
/// its `(weight, children)` arcs. Deeper levels must already be reduced.
pub fn reduce_level(
    table: &mut UniqueTable,
    var: Var,
    candidates: Vec<Vec<(f64, Vec<NodeRef>)>>,
) -> Result<Vec<Scaled>> {
    candidates.into_iter().map(|arcs| table.make_node(var, arcs)).collect()
}

pub(crate) struct Plan {
    pub contexts: Vec<Vec<Var>>,
    pub buckets: Vec<Vec<usize>>,
}

pub(crate) fn plan(model: &GraphicalModel, tree: &PseudoTree) -> Result<Plan> {
    if tree.universe() != model.num_vars() || tree.len() != model.num_vars() {
        return Err(Error::Structure("pseudo tree does not cover the model's variables".into()));
    }
    let g = PrimalGraph::from_model(model);
    if !tree.has_backarc_property(&g) {
        return Err(Error::Structure("pseudo tree violates the backarc property for this model".into()));
    }
    let contexts = compute_contexts(tree, &g);
    let buckets = compute_buckets(tree, model)?;
    // the cache key (context values) must determine every arc weight
    for (v, b) in buckets.iter().enumerate() {
        for &fi in b {
            for &s in model.functions()[fi].scope() {
                if s != v && !contexts[v].contains(&s) {
                    return Err(Error::Internal(format!(
                        "function {fi} in bucket of {v} mentions {s}, which is outside its context"
                    )));
                }
            }
        }
    }
    Ok(Plan { contexts, buckets })
}

struct OrFrame {
    var: Var,
    key: Vec<usize>,
    arcs: Vec<(f64, Vec<NodeRef>)>,
    next: usize,
}

struct AndFrame {
    var: Var,
    weight: f64,
    children: Vec<NodeRef>,
    next: usize,
}

enum Frame {
    Or(OrFrame),
    And(AndFrame),
}

enum Ret {
    Or(Scaled),
    And(f64, Vec<NodeRef>),
}

/// Runs the search inside `table` and returns the finished root.
pub fn compile_search_in(
    table: &mut UniqueTable,
    model: &GraphicalModel,
    hook: &mut dyn PruningHook,
) -> Result<(Scaled, SearchStats)> {
    let tree = Arc::clone(table.tree());
    let Plan { contexts, buckets } = plan(model, &tree)?;
    hook.bind(&tree, &buckets);
    let n = model.num_vars();
    let mut stats = SearchStats::new(n);
    let mut cache: Vec<HashMap<Vec<usize>, Scaled>> = vec![HashMap::new(); n];
    let mut partial = Assignment::empty(n);

    let key_of = |v: Var, partial: &Assignment| -> Vec<usize> {
        contexts[v].iter().map(|&c| partial.get(c).expect("context assigned")).collect()
    };

    let mut stack: Vec<Frame> = Vec::new();
    let mut ret: Option<Ret> = None;
    let root = tree.root();
    stack.push(Frame::Or(OrFrame { var: root, key: Vec::new(), arcs: Vec::new(), next: 0 }));
    stats.or_expansions[root] += 1;

    while let Some(top) = stack.last_mut() {
        match top {
            Frame::Or(f) => {
                if let Some(r) = ret.take() {
                    match r {
                        Ret::And(w, ch) => f.arcs.push((w, ch)),
                        Ret::Or(_) => return Err(Error::Internal("OR result delivered to an OR node".into())),
                    }
                }
                let k = model.domain_size(f.var);
                if f.next < k {
                    let (var, x) = (f.var, f.next);
                    f.next += 1;
                    partial.set(var, x);
                    let w = arc_weight(model, &buckets[var], &partial)?;
                    if w == 0.0 {
                        f.arcs.push((0.0, vec![NodeRef::ZERO]));
                        continue;
                    }
                    if !hook.consistent(var, x, &partial) {
                        stats.pruned[var] += 1;
                        f.arcs.push((0.0, vec![NodeRef::ZERO]));
                        continue;
                    }
                    stats.and_expansions[var] += 1;
                    stack.push(Frame::And(AndFrame { var, weight: w, children: Vec::new(), next: 0 }));
                } else {
                    let Some(Frame::Or(f)) = stack.pop() else { unreachable!() };
                    partial.unset(f.var);
                    let reduced = table.make_node(f.var, f.arcs)?;
                    cache[f.var].insert(f.key, reduced.clone());
                    ret = Some(Ret::Or(reduced));
                }
            }
            Frame::And(f) => {
                if let Some(r) = ret.take() {
                    match r {
                        Ret::Or(s) => {
                            if s.is_zero() {
                                // dead end: remaining siblings need not be expanded
                                stack.pop();
                                ret = Some(Ret::And(0.0, vec![NodeRef::ZERO]));
                                continue;
                            }
                            f.weight *= s.factor;
                            f.children.extend(s.nodes);
                        }
                        Ret::And(..) => return Err(Error::Internal("AND result delivered to an AND node".into())),
                    }
                }
                let kids = tree.children(f.var);
                if f.next < kids.len() {
                    let y = kids[f.next];
                    f.next += 1;
                    let key = key_of(y, &partial);
                    if let Some(hit) = cache[y].get(&key) {
                        stats.cache_hits[y] += 1;
                        ret = Some(Ret::Or(hit.clone()));
                    } else {
                        stats.or_expansions[y] += 1;
                        stack.push(Frame::Or(OrFrame { var: y, key, arcs: Vec::new(), next: 0 }));
                    }
                } else {
                    let Some(Frame::And(f)) = stack.pop() else { unreachable!() };
                    let children = if f.children.is_empty() { vec![NodeRef::ONE] } else { f.children };
                    ret = Some(Ret::And(f.weight, children));
                }
            }
        }
    }
    match ret {
        Some(Ret::Or(s)) => Ok((table.finish_root(s), stats)),
        _ => Err(Error::Internal("search finished without a root".into())),
    }
}

/// Compiles `model` along `tree` by AND/OR search.
pub fn compile_search(
    model: &GraphicalModel,
    tree: Arc<PseudoTree>,
    hook: &mut dyn PruningHook,
    opts: &CompileOptions,
) -> Result<(Aomdd, SearchStats)> {
    let mut table = opts.table_for(model, tree);
    let (root, stats) = compile_search_in(&mut table, model, hook)?;
    Ok((Aomdd::new(Arc::new(table), root), stats))
}

/// An unreduced meta-node of the context-minimal graph. Children index
/// into [`ContextMinimalGraph::nodes`]; `None` stands for terminal 1.
#[derive(Debug, Clone)]
pub struct RawNode {
    pub var: Var,
    pub arcs: Vec<(f64, Vec<usize>)>,
}

/// The explored context-minimal AND/OR graph with per-variable levels.
#[derive(Debug, Clone)]
pub struct ContextMinimalGraph {
    pub nodes: Vec<RawNode>,
    pub levels: Vec<Vec<usize>>,
    pub root: usize,
}

/// Explores the full context-minimal graph (merging only nodes with equal
/// contexts) without any reduction. Zero-weight arcs get no children.
pub fn context_minimal_graph(model: &GraphicalModel, tree: &PseudoTree) -> Result<ContextMinimalGraph> {
    let Plan { contexts, buckets } = plan(model, tree)?;
    let n = model.num_vars();
    let mut g = ContextMinimalGraph { nodes: Vec::new(), levels: vec![Vec::new(); n], root: 0 };
    let mut cache: Vec<HashMap<Vec<usize>, usize>> = vec![HashMap::new(); n];
    let mut partial = Assignment::empty(n);
    g.root = explore(model, tree, &contexts, &buckets, tree.root(), &mut partial, &mut cache, &mut g)?;
    Ok(g)
}

#[allow(clippy::too_many_arguments)]
fn explore(
    model: &GraphicalModel,
    tree: &PseudoTree,
    contexts: &[Vec<Var>],
    buckets: &[Vec<usize>],
    var: Var,
    partial: &mut Assignment,
    cache: &mut [HashMap<Vec<usize>, usize>],
    g: &mut ContextMinimalGraph,
) -> Result<usize> {
    let key: Vec<usize> = contexts[var].iter().map(|&c| partial.get(c).expect("context assigned")).collect();
    if let Some(&id) = cache[var].get(&key) {
        return Ok(id);
    }
    let mut arcs = Vec::with_capacity(model.domain_size(var));
    for x in 0..model.domain_size(var) {
        partial.set(var, x);
        let w = arc_weight(model, &buckets[var], partial)?;
        let mut kids = Vec::new();
        if w != 0.0 {
            for &y in tree.children(var) {
                kids.push(explore(model, tree, contexts, buckets, y, partial, cache, g)?);
            }
        }
        arcs.push((w, kids));
    }
    partial.unset(var);
    let id = g.nodes.len();
    g.nodes.push(RawNode { var, arcs });
    g.levels[var].push(id);
    cache[var].insert(key, id);
    Ok(id)
}

/// Reduces a context-minimal graph level by level, deepest variables first
/// in reverse depth-first order.
pub fn bottom_up_reduction(table: &mut UniqueTable, g: &ContextMinimalGraph) -> Result<Scaled> {
    let tree = Arc::clone(table.tree());
    let mut reduced: Vec<Option<Scaled>> = vec![None; g.nodes.len()];
    for &v in tree.dfs_order().iter().rev() {
        let ids = &g.levels[v];
        let mut candidates = Vec::with_capacity(ids.len());
        for &id in ids {
            let raw = &g.nodes[id];
            let mut arcs = Vec::with_capacity(raw.arcs.len());
            for (w, kids) in &raw.arcs {
                let mut weight = *w;
                let mut children = Vec::new();
                for &c in kids {
                    let s = reduced[c].as_ref().ok_or_else(|| Error::Internal("child level not reduced".into()))?;
                    weight *= s.factor;
                    children.extend(s.nodes.iter().copied());
                }
                if children.is_empty() {
                    children.push(NodeRef::ONE);
                }
                arcs.push((weight, children));
            }
            candidates.push(arcs);
        }
        for (&id, s) in ids.iter().zip(reduce_level(table, v, candidates)?) {
            reduced[id] = Some(s);
        }
    }
    let root = reduced[g.root].take().ok_or_else(|| Error::Internal("root not reduced".into()))?;
    Ok(table.finish_root(root))
}
