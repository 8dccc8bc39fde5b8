//! Meta-nodes, the unique table and the reduced diagram type.
//!
//! Every node is built through [`UniqueTable::make_node`], which normalizes
//! arc weights (weighted mode), removes redundant nodes and merges
//! isomorphic ones, so a table only ever contains reduced nodes.
//!
//! Weighted normalization accounts for don't-care variables: an arc whose
//! children skip part of the pseudo-tree subtree counts each skipped
//! variable's domain size, so a normalized node sums to one over all
//! assignments of its subtree. With that convention each arc weight is a
//! conditional mass and the root constant is the total mass of the model.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{ModelKind, Var};
use crate::structure::PseudoTree;

/// Default number of significant decimal digits used to compare weights.
pub const DEFAULT_DIGITS: u32 = 12;

/// Reference to a meta-node or to one of the two terminals.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct NodeRef(u32);

impl NodeRef {
    pub const ZERO: NodeRef = NodeRef(0);
    pub const ONE: NodeRef = NodeRef(1);

    pub fn is_terminal(self) -> bool {
        self.0 < 2
    }

    pub fn raw(self) -> u32 {
        self.0
    }

    fn slot(self) -> usize {
        (self.0 - 2) as usize
    }
}

/// One value of a meta-node: the OR-to-AND weight and the AND list of children.
#[derive(Clone, Debug)]
pub struct Branch {
    pub weight: f64,
    pub children: Box<[NodeRef]>,
}

impl PartialEq for Branch {
    fn eq(&self, other: &Self) -> bool {
        self.weight.to_bits() == other.weight.to_bits() && self.children == other.children
    }
}

impl Eq for Branch {}

impl Hash for Branch {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.weight.to_bits().hash(state);
        self.children.hash(state);
    }
}

/// An OR node fused with its value children.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MetaNode {
    pub var: Var,
    pub branches: Box<[Branch]>,
}

/// An AND list of nodes scaled by a constant. Used both for the value a
/// reduction promotes to its caller and for diagram roots.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaled {
    pub nodes: Vec<NodeRef>,
    pub factor: f64,
}

impl Scaled {
    pub fn zero() -> Self {
        Scaled { nodes: vec![NodeRef::ZERO], factor: 0.0 }
    }

    pub fn one() -> Self {
        Scaled { nodes: vec![NodeRef::ONE], factor: 1.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.factor == 0.0 || self.nodes.first() == Some(&NodeRef::ZERO)
    }
}

/// Rounds to `digits` significant decimal digits. Equality and hashing of
/// weights both go through this function.
pub fn quantize(w: f64, digits: u32) -> f64 {
    if w == 0.0 || !w.is_finite() {
        return if w == 0.0 { 0.0 } else { w };
    }
    let s = format!("{:.*e}", digits.saturating_sub(1) as usize, w);
    s.parse().expect("formatted float parses")
}

pub fn weights_equal(a: f64, b: f64, digits: u32) -> bool {
    quantize(a, digits).to_bits() == quantize(b, digits).to_bits()
}

/// Divides each weight by `s = sum(w_i * dont_care_i)` and returns `s`.
/// An all-zero set is left untouched and yields 0.
pub fn normalize_weights(weights: &mut [f64], dont_care: &[f64]) -> f64 {
    let s: f64 = weights.iter().zip(dont_care).map(|(w, d)| w * d).sum();
    if s > 0.0 {
        for w in weights.iter_mut() {
            *w /= s;
        }
    }
    s
}

/// Hash-consing store for meta-nodes of one pseudo tree.
#[derive(Debug, Clone)]
pub struct UniqueTable {
    tree: Arc<PseudoTree>,
    domains: Vec<usize>,
    kind: ModelKind,
    digits: u32,
    node_cap: Option<usize>,
    nodes: Vec<MetaNode>,
    index: HashMap<MetaNode, NodeRef>,
    // product of domain sizes over each variable's pseudo-tree subtree
    space: Vec<f64>,
    total_space: f64,
    created: Vec<usize>,
}

impl UniqueTable {
    pub fn new(tree: Arc<PseudoTree>, domains: Vec<usize>, kind: ModelKind) -> Self {
        assert_eq!(tree.universe(), domains.len(), "tree and domains disagree");
        let mut space = vec![1.0; domains.len()];
        for &v in tree.dfs_order().iter().rev() {
            space[v] = domains[v] as f64 * tree.children(v).iter().map(|&c| space[c]).product::<f64>();
        }
        let total_space = domains.iter().map(|&k| k as f64).product();
        let created = vec![0; domains.len()];
        UniqueTable {
            tree,
            domains,
            kind,
            digits: DEFAULT_DIGITS,
            node_cap: None,
            nodes: Vec::new(),
            index: HashMap::new(),
            space,
            total_space,
            created,
        }
    }

    pub fn with_digits(mut self, digits: u32) -> Self {
        self.digits = digits.clamp(1, 15);
        self
    }

    pub fn with_node_cap(mut self, cap: Option<usize>) -> Self {
        self.node_cap = cap;
        self
    }

    pub fn tree(&self) -> &Arc<PseudoTree> {
        &self.tree
    }

    pub fn domains(&self) -> &[usize] {
        &self.domains
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of distinct meta-nodes ever stored for `v`.
    pub fn created(&self, v: Var) -> usize {
        self.created[v]
    }

    pub fn node(&self, r: NodeRef) -> &MetaNode {
        &self.nodes[r.slot()]
    }

    pub fn var(&self, r: NodeRef) -> Option<Var> {
        (!r.is_terminal()).then(|| self.nodes[r.slot()].var)
    }

    pub fn quantize(&self, w: f64) -> f64 {
        quantize(w, self.digits)
    }

    /// Canonical AND list: a zero anywhere collapses the list to `[0]`,
    /// terminal 1 entries are dropped, the rest sorted by pseudo-tree
    /// preorder, and an empty list becomes `[1]`.
    pub fn canonical_list(&self, mut list: Vec<NodeRef>) -> Vec<NodeRef> {
        if list.contains(&NodeRef::ZERO) {
            return vec![NodeRef::ZERO];
        }
        list.retain(|&r| r != NodeRef::ONE);
        if list.is_empty() {
            return vec![NodeRef::ONE];
        }
        list.sort_by_key(|&r| self.tree.preorder(self.nodes[r.slot()].var));
        debug_assert!(list.windows(2).all(|w| w[0] != w[1]), "duplicate child in AND list");
        list
    }

    /// Product of domain sizes of the variables below `top` (or of all
    /// variables when `top` is `None`) not covered by `children`.
    pub fn dont_care_factor(&self, top: Option<Var>, children: &[NodeRef]) -> f64 {
        let mut f = match top {
            Some(v) => self.space[v] / self.domains[v] as f64,
            None => self.total_space,
        };
        for &c in children {
            if !c.is_terminal() {
                f /= self.space[self.nodes[c.slot()].var];
            }
        }
        f
    }

    /// Builds the reduced form of a meta-node for `var` with one
    /// `(weight, children)` pair per value. Returns the AND list and scalar
    /// the caller should splice into its own arc: the fresh or existing node
    /// with its normalization constant, or for a redundant node its common
    /// children with the common weight.
    pub fn make_node(&mut self, var: Var, arcs: Vec<(f64, Vec<NodeRef>)>) -> Result<Scaled> {
        let k = self.domains[var];
        if arcs.len() != k {
            return Err(Error::Internal(format!(
                "meta-node for variable {var} has {} arcs, domain size is {k}",
                arcs.len()
            )));
        }
        let mut weights = Vec::with_capacity(k);
        let mut lists = Vec::with_capacity(k);
        for (w, children) in arcs {
            let list = self.canonical_list(children);
            if w == 0.0 || list[0] == NodeRef::ZERO {
                weights.push(0.0);
                lists.push(vec![NodeRef::ZERO]);
            } else {
                weights.push(w);
                lists.push(list);
            }
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Ok(Scaled::zero());
        }
        let raw0 = weights[0];
        let constant = match self.kind {
            ModelKind::Weighted => {
                let dc: Vec<f64> = lists.iter().map(|l| self.dont_care_factor(Some(var), l)).collect();
                normalize_weights(&mut weights, &dc)
            }
            ModelKind::Constraint => {
                if weights.iter().any(|&w| w != 0.0 && w != 1.0) {
                    return Err(Error::Internal(format!("non-binary weight on constraint node of {var}")));
                }
                1.0
            }
        };
        let redundant = lists.windows(2).all(|p| p[0] == p[1])
            && weights.windows(2).all(|p| weights_equal(p[0], p[1], self.digits));
        if redundant {
            let factor = match self.kind {
                ModelKind::Weighted => raw0,
                ModelKind::Constraint => 1.0,
            };
            return Ok(Scaled { nodes: lists.swap_remove(0), factor });
        }
        let node = MetaNode {
            var,
            branches: weights
                .into_iter()
                .zip(lists)
                .map(|(weight, children)| Branch { weight, children: children.into_boxed_slice() })
                .collect(),
        };
        let r = self.intern(node)?;
        Ok(Scaled { nodes: vec![r], factor: constant })
    }

    fn key(&self, node: &MetaNode) -> MetaNode {
        MetaNode {
            var: node.var,
            branches: node
                .branches
                .iter()
                .map(|b| Branch { weight: self.quantize(b.weight), children: b.children.clone() })
                .collect(),
        }
    }

    /// Stored weights keep full precision; lookup goes through the
    /// quantized key, so the first node built for a key represents it.
    fn intern(&mut self, node: MetaNode) -> Result<NodeRef> {
        let key = self.key(&node);
        if let Some(&r) = self.index.get(&key) {
            return Ok(r);
        }
        if let Some(cap) = self.node_cap {
            if self.nodes.len() >= cap {
                return Err(Error::Resource(format!("unique table reached its cap of {cap} meta-nodes")));
            }
        }
        let r = NodeRef(u32::try_from(self.nodes.len() + 2).map_err(|_| Error::Resource("node id overflow".into()))?);
        self.created[node.var] += 1;
        self.nodes.push(node);
        self.index.insert(key, r);
        Ok(r)
    }

    /// Inserts an already reduced node as read from storage, rejecting
    /// anything that would violate the table invariants.
    pub(crate) fn insert_stored(&mut self, node: MetaNode) -> Result<NodeRef> {
        let k = self.domains[node.var];
        if node.branches.len() != k {
            return Err(Error::Structure(format!("stored node for {} has wrong arity", node.var)));
        }
        if self.index.contains_key(&self.key(&node)) {
            return Err(Error::Structure(format!("stored node for {} duplicates an earlier node", node.var)));
        }
        let first = &node.branches[0];
        if node.branches.iter().all(|b| b == first) {
            return Err(Error::Structure(format!("stored node for {} is redundant", node.var)));
        }
        for b in node.branches.iter() {
            let canon = self.canonical_list(b.children.to_vec());
            if canon.as_slice() != &*b.children {
                return Err(Error::Structure(format!("stored node for {} has a non-canonical child list", node.var)));
            }
            for &c in b.children.iter() {
                if let Some(cv) = self.var(c) {
                    if !self.tree.is_proper_ancestor(node.var, cv) {
                        return Err(Error::Structure(format!("child {cv} is not below {}", node.var)));
                    }
                }
            }
        }
        self.intern(node)
    }

    /// Canonical top-level form of a compiled result: the AND list plus the
    /// root constant. Weighted roots carry the total mass; constraint roots
    /// carry 1.
    pub fn finish_root(&self, s: Scaled) -> Scaled {
        let nodes = self.canonical_list(s.nodes);
        if s.factor == 0.0 || nodes[0] == NodeRef::ZERO {
            let factor = match self.kind {
                ModelKind::Weighted => 0.0,
                ModelKind::Constraint => 1.0,
            };
            return Scaled { nodes: vec![NodeRef::ZERO], factor };
        }
        let factor = match self.kind {
            ModelKind::Weighted => s.factor * self.dont_care_factor(None, &nodes),
            ModelKind::Constraint => 1.0,
        };
        Scaled { nodes, factor }
    }

    /// Nodes reachable from `roots`, children before parents, visiting
    /// branches and children in stored order. Deterministic for a given
    /// diagram regardless of creation history.
    pub fn postorder(&self, roots: &[NodeRef]) -> Vec<NodeRef> {
        let mut seen = vec![false; self.nodes.len()];
        let mut out = Vec::new();
        let mut stack: Vec<(NodeRef, usize, usize)> = Vec::new();
        for &r in roots {
            if r.is_terminal() || seen[r.slot()] {
                continue;
            }
            seen[r.slot()] = true;
            stack.push((r, 0, 0));
            while let Some(&mut (u, ref mut bi, ref mut ci)) = stack.last_mut() {
                let node = &self.nodes[u.slot()];
                let mut next = None;
                while *bi < node.branches.len() {
                    let ch = &node.branches[*bi].children;
                    if *ci < ch.len() {
                        let c = ch[*ci];
                        *ci += 1;
                        if !c.is_terminal() && !seen[c.slot()] {
                            next = Some(c);
                            break;
                        }
                    } else {
                        *bi += 1;
                        *ci = 0;
                    }
                }
                match next {
                    Some(c) => {
                        seen[c.slot()] = true;
                        stack.push((c, 0, 0));
                    }
                    None => {
                        out.push(u);
                        stack.pop();
                    }
                }
            }
        }
        out
    }
}

/// Size report: meta-nodes per variable, total meta-nodes, and edges
/// (AND-arc to child references, terminals included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagramStats {
    pub per_var: Vec<usize>,
    pub meta_nodes: usize,
    pub edges: usize,
}

/// A compiled, completely reduced diagram over a pseudo tree.
#[derive(Debug, Clone)]
pub struct Aomdd {
    table: Arc<UniqueTable>,
    root: Scaled,
}

impl Aomdd {
    /// Wraps a root produced by a compiler working in `table`. The root is
    /// expected to be in [`UniqueTable::finish_root`] form.
    pub fn new(table: Arc<UniqueTable>, root: Scaled) -> Self {
        Aomdd { table, root }
    }

    pub fn table(&self) -> &Arc<UniqueTable> {
        &self.table
    }

    pub fn tree(&self) -> &PseudoTree {
        &self.table.tree
    }

    pub fn kind(&self) -> ModelKind {
        self.table.kind
    }

    pub fn domains(&self) -> &[usize] {
        &self.table.domains
    }

    pub fn num_vars(&self) -> usize {
        self.table.domains.len()
    }

    pub fn root_nodes(&self) -> &[NodeRef] {
        &self.root.nodes
    }

    /// Total mass for weighted diagrams; 1 for constraint diagrams.
    pub fn root_constant(&self) -> f64 {
        self.root.factor
    }

    pub fn node(&self, r: NodeRef) -> &MetaNode {
        self.table.node(r)
    }

    pub fn is_zero(&self) -> bool {
        self.root.nodes[0] == NodeRef::ZERO
    }

    /// Scalar applied to the product of arc weights when reading off the
    /// value of one full assignment.
    pub fn evaluation_scale(&self) -> f64 {
        match self.table.kind {
            ModelKind::Weighted => self.root.factor / self.table.dont_care_factor(None, &self.root.nodes),
            ModelKind::Constraint => self.root.factor,
        }
    }

    /// Reachable meta-nodes, children first.
    pub fn postorder(&self) -> Vec<NodeRef> {
        self.table.postorder(&self.root.nodes)
    }

    pub fn stats(&self) -> DiagramStats {
        let mut per_var = vec![0; self.num_vars()];
        let mut edges = 0;
        let nodes = self.postorder();
        for &r in &nodes {
            let n = self.node(r);
            per_var[n.var] += 1;
            edges += n.branches.iter().map(|b| b.children.len()).sum::<usize>();
        }
        DiagramStats { per_var, meta_nodes: nodes.len(), edges }
    }

    /// Isomorphism check. Diagrams sharing one table compare by root
    /// identity; otherwise a memoized recursive comparison is used.
    pub fn structural_eq(&self, other: &Aomdd) -> Result<bool> {
        if self.tree() != other.tree() || self.domains() != other.domains() {
            return Err(Error::Structure("diagrams are built over different pseudo trees".into()));
        }
        if self.kind() != other.kind() {
            return Ok(false);
        }
        let digits = self.table.digits.min(other.table.digits);
        if !weights_equal(self.root.factor, other.root.factor, digits) {
            return Ok(false);
        }
        if Arc::ptr_eq(&self.table, &other.table) {
            return Ok(self.root.nodes == other.root.nodes);
        }
        let mut memo: HashMap<(NodeRef, NodeRef), bool> = HashMap::new();
        Ok(lists_iso(&self.table, &other.table, &self.root.nodes, &other.root.nodes, digits, &mut memo))
    }
}

fn lists_iso(
    ta: &UniqueTable,
    tb: &UniqueTable,
    a: &[NodeRef],
    b: &[NodeRef],
    digits: u32,
    memo: &mut HashMap<(NodeRef, NodeRef), bool>,
) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(&x, &y)| nodes_iso(ta, tb, x, y, digits, memo))
}

fn nodes_iso(
    ta: &UniqueTable,
    tb: &UniqueTable,
    a: NodeRef,
    b: NodeRef,
    digits: u32,
    memo: &mut HashMap<(NodeRef, NodeRef), bool>,
) -> bool {
    if a.is_terminal() || b.is_terminal() {
        return a == b;
    }
    if let Some(&v) = memo.get(&(a, b)) {
        return v;
    }
    let (na, nb) = (ta.node(a), tb.node(b));
    let eq = na.var == nb.var
        && na.branches.len() == nb.branches.len()
        && na.branches.iter().zip(nb.branches.iter()).all(|(x, y)| {
            weights_equal(x.weight, y.weight, digits) && lists_iso(ta, tb, &x.children, &y.children, digits, memo)
        });
    memo.insert((a, b), eq);
    eq
}
