//! Primal graphs, variable orderings, pseudo trees, contexts and buckets.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{GraphicalModel, Var};

/// Undirected graph over variable ids with an edge between every pair of
/// variables sharing a function scope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimalGraph {
    adj: Vec<BTreeSet<Var>>,
}

impl PrimalGraph {
    pub fn new(n: usize) -> Self {
        PrimalGraph { adj: vec![BTreeSet::new(); n] }
    }

    pub fn from_model(model: &GraphicalModel) -> Self {
        let mut g = PrimalGraph::new(model.num_vars());
        for f in model.functions() {
            let s = f.scope();
            for (i, &u) in s.iter().enumerate() {
                for &v in &s[i + 1..] {
                    g.add_edge(u, v);
                }
            }
        }
        g
    }

    pub fn num_vars(&self) -> usize {
        self.adj.len()
    }

    pub fn add_edge(&mut self, u: Var, v: Var) {
        if u != v {
            self.adj[u].insert(v);
            self.adj[v].insert(u);
        }
    }

    pub fn has_edge(&self, u: Var, v: Var) -> bool {
        self.adj[u].contains(&v)
    }

    pub fn neighbors(&self, v: Var) -> impl Iterator<Item = Var> + '_ {
        self.adj[v].iter().copied()
    }

    pub fn degree(&self, v: Var) -> usize {
        self.adj[v].len()
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(Var, Var)> {
        let mut out = Vec::new();
        for (u, ns) in self.adj.iter().enumerate() {
            out.extend(ns.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }
}

/// A permutation of the variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ordering {
    order: Vec<Var>,
    position: Vec<usize>,
}

impl Ordering {
    pub fn new(order: Vec<Var>) -> Result<Self> {
        let n = order.len();
        let mut position = vec![usize::MAX; n];
        for (i, &v) in order.iter().enumerate() {
            if v >= n || position[v] != usize::MAX {
                return Err(Error::Precondition(format!("ordering is not a permutation of 0..{n}")));
            }
            position[v] = i;
        }
        Ok(Ordering { order, position })
    }

    pub fn identity(n: usize) -> Self {
        Ordering { order: (0..n).collect(), position: (0..n).collect() }
    }

    pub fn as_slice(&self) -> &[Var] {
        &self.order
    }

    pub fn position(&self, v: Var) -> usize {
        self.position[v]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Greedy min-fill ordering. The vertex whose elimination adds the fewest
/// fill edges is eliminated next, ties broken by a generator seeded with
/// `seed`. The first eliminated vertex is placed last in the result.
pub fn min_fill_ordering(g: &PrimalGraph, seed: u64) -> Ordering {
    let n = g.num_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj: Vec<BTreeSet<Var>> = (0..n).map(|v| g.adj[v].clone()).collect();
    let mut alive = vec![true; n];
    let mut order = vec![0; n];
    for slot in (0..n).rev() {
        let mut best = usize::MAX;
        let mut ties: Vec<Var> = Vec::new();
        for v in (0..n).filter(|&v| alive[v]) {
            let ns: Vec<Var> = adj[v].iter().copied().collect();
            let mut fill = 0;
            for (i, &a) in ns.iter().enumerate() {
                for &b in &ns[i + 1..] {
                    if !adj[a].contains(&b) {
                        fill += 1;
                    }
                }
            }
            if fill < best {
                best = fill;
                ties.clear();
            }
            if fill == best {
                ties.push(v);
            }
        }
        let v = *ties.choose(&mut rng).expect("at least one live vertex");
        let ns: Vec<Var> = adj[v].iter().copied().collect();
        for (i, &a) in ns.iter().enumerate() {
            for &b in &ns[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        for &a in &ns {
            adj[a].remove(&v);
        }
        adj[v].clear();
        alive[v] = false;
        order[slot] = v;
    }
    Ordering::new(order).expect("min-fill produces a permutation")
}

/// Induced width of `g` along `d`: sweep from last to first, connecting the
/// earlier neighbors of each node into a clique; the largest earlier-neighbor
/// set seen is the width.
pub fn induced_width(g: &PrimalGraph, d: &Ordering) -> usize {
    let mut adj: Vec<BTreeSet<Var>> = g.adj.clone();
    let mut width = 0;
    for &v in d.as_slice().iter().rev() {
        let earlier: Vec<Var> = adj[v].iter().copied().filter(|&u| d.position(u) < d.position(v)).collect();
        width = width.max(earlier.len());
        for (i, &a) in earlier.iter().enumerate() {
            for &b in &earlier[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
    }
    width
}

const NONE: usize = usize::MAX;

/// A rooted tree over a set of variables such that every primal edge joins
/// a node to one of its ancestors or descendants.
///
/// The tree may cover only a subset of `0..universe` (used for restricted
/// trees in embedding checks); compiled diagrams always use trees over all
/// variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoTree {
    root: Var,
    parent: Vec<usize>,
    children: Vec<Vec<Var>>,
    depth: Vec<usize>,
    dfs: Vec<Var>,
    pre: Vec<usize>,
    size: Vec<usize>,
}

impl PseudoTree {
    /// Builds the tree from a parent array; `children_order` lists the
    /// variables in the order siblings should appear (typically the
    /// generating ordering). Variables with `None` in `parent` and that are
    /// not the unique root are treated as absent when `members` says so.
    pub fn from_parents(parent: &[Option<Var>], members: &[Var], children_order: &[Var]) -> Result<Self> {
        let universe = parent.len();
        let mut is_member = vec![false; universe];
        for &v in members {
            if v >= universe || is_member[v] {
                return Err(Error::Structure(format!("bad member list entry {v}")));
            }
            is_member[v] = true;
        }
        let roots: Vec<Var> = members.iter().copied().filter(|&v| parent[v].is_none()).collect();
        if members.is_empty() {
            return Err(Error::Structure("pseudo tree needs at least one variable".into()));
        }
        if roots.len() != 1 {
            return Err(Error::Structure(format!("pseudo tree must have exactly one root, found {}", roots.len())));
        }
        let mut rank = vec![usize::MAX; universe];
        for (i, &v) in children_order.iter().enumerate() {
            if v < universe {
                rank[v] = i;
            }
        }
        let mut children = vec![Vec::new(); universe];
        let mut par = vec![NONE; universe];
        for &v in members {
            if let Some(p) = parent[v] {
                if p >= universe || !is_member[p] {
                    return Err(Error::Structure(format!("parent {p} of {v} is not in the tree")));
                }
                children[p].push(v);
                par[v] = p;
            }
        }
        for ch in &mut children {
            ch.sort_by_key(|&c| (rank[c], c));
        }
        let mut t = PseudoTree {
            root: roots[0],
            parent: par,
            children,
            depth: vec![NONE; universe],
            dfs: Vec::with_capacity(members.len()),
            pre: vec![NONE; universe],
            size: vec![0; universe],
        };
        t.index()?;
        if t.dfs.len() != members.len() {
            return Err(Error::Structure("parent array contains a cycle".into()));
        }
        Ok(t)
    }

    fn index(&mut self) -> Result<()> {
        let mut stack = vec![(self.root, 0usize, false)];
        while let Some((v, d, done)) = stack.pop() {
            if done {
                self.size[v] = 1 + self.children[v].iter().map(|&c| self.size[c]).sum::<usize>();
                continue;
            }
            if self.pre[v] != NONE {
                return Err(Error::Structure("parent array contains a cycle".into()));
            }
            self.pre[v] = self.dfs.len();
            self.depth[v] = d;
            self.dfs.push(v);
            stack.push((v, d, true));
            for &c in self.children[v].iter().rev() {
                stack.push((c, d + 1, false));
            }
        }
        Ok(())
    }

    /// Recursive conditioning along `d`: the first variable becomes the
    /// root, and each connected component of the remaining graph becomes a
    /// child subtree rooted at its first variable in `d`. Components that
    /// were already disconnected hang under the root as well.
    pub fn generate(g: &PrimalGraph, d: &Ordering) -> Self {
        let n = g.num_vars();
        assert_eq!(n, d.len(), "ordering and graph disagree on variable count");
        assert!(n > 0, "pseudo tree needs at least one variable");
        let mut parent: Vec<Option<Var>> = vec![None; n];
        // member[v] == stamp: v belongs to the component being split
        let mut member = vec![0usize; n];
        let mut seen = vec![0usize; n];
        // (component vertices, parent of the component root)
        let mut work: Vec<(Vec<Var>, Option<Var>)> = vec![((0..n).collect(), None)];
        let mut stamp = 0;
        while let Some((comp, par)) = work.pop() {
            let root = *comp.iter().min_by_key(|&&v| d.position(v)).expect("nonempty component");
            parent[root] = par;
            stamp += 1;
            for &v in &comp {
                member[v] = stamp;
            }
            seen[root] = stamp;
            let mut comps: Vec<Vec<Var>> = Vec::new();
            for &s in &comp {
                if seen[s] == stamp {
                    continue;
                }
                seen[s] = stamp;
                let mut sub = vec![s];
                let mut i = 0;
                while i < sub.len() {
                    let u = sub[i];
                    i += 1;
                    for w in g.neighbors(u) {
                        if member[w] == stamp && seen[w] != stamp {
                            seen[w] = stamp;
                            sub.push(w);
                        }
                    }
                }
                comps.push(sub);
            }
            for c in comps {
                work.push((c, Some(root)));
            }
        }
        let members: Vec<Var> = (0..n).collect();
        PseudoTree::from_parents(&parent, &members, d.as_slice()).expect("generated tree is well formed")
    }

    /// The chain pseudo tree `d[0] -> d[1] -> ... -> d[n-1]` (the MDD case).
    pub fn chain(d: &Ordering) -> Self {
        let n = d.len();
        let mut parent = vec![None; n];
        for w in d.as_slice().windows(2) {
            parent[w[1]] = Some(w[0]);
        }
        let members: Vec<Var> = (0..n).collect();
        PseudoTree::from_parents(&parent, &members, d.as_slice()).expect("chain is well formed")
    }

    /// Size of the id space the tree lives in.
    pub fn universe(&self) -> usize {
        self.parent.len()
    }

    pub fn len(&self) -> usize {
        self.dfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dfs.is_empty()
    }

    pub fn contains(&self, v: Var) -> bool {
        v < self.pre.len() && self.pre[v] != NONE
    }

    pub fn root(&self) -> Var {
        self.root
    }

    pub fn parent(&self, v: Var) -> Option<Var> {
        (self.parent[v] != NONE).then_some(self.parent[v])
    }

    pub fn children(&self, v: Var) -> &[Var] {
        &self.children[v]
    }

    pub fn depth(&self, v: Var) -> usize {
        self.depth[v]
    }

    /// Number of variables on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        self.dfs.iter().map(|&v| self.depth[v] + 1).max().unwrap_or(0)
    }

    /// Depth-first preorder, children visited in their stored order.
    pub fn dfs_order(&self) -> &[Var] {
        &self.dfs
    }

    /// Position of `v` in [`dfs_order`](Self::dfs_order).
    #[inline]
    pub fn preorder(&self, v: Var) -> usize {
        self.pre[v]
    }

    /// Variables of the subtree rooted at `v`, in preorder.
    pub fn subtree(&self, v: Var) -> &[Var] {
        let s = self.pre[v];
        &self.dfs[s..s + self.size[v]]
    }

    /// True when `a` is an ancestor of `b` or equal to it.
    #[inline]
    pub fn is_ancestor_or_self(&self, a: Var, b: Var) -> bool {
        let (pa, pb) = (self.pre[a], self.pre[b]);
        pa <= pb && pb < pa + self.size[a]
    }

    pub fn is_proper_ancestor(&self, a: Var, b: Var) -> bool {
        a != b && self.is_ancestor_or_self(a, b)
    }

    /// Ancestors of `v`, closest first.
    pub fn ancestors(&self, v: Var) -> Vec<Var> {
        let mut out = Vec::new();
        let mut cur = self.parent(v);
        while let Some(p) = cur {
            out.push(p);
            cur = self.parent(p);
        }
        out
    }

    /// Variables below `top` (or the whole tree when `top` is `None`) that
    /// lie in none of the subtrees rooted at `covered`.
    pub fn uncovered(&self, top: Option<Var>, covered: &[Var]) -> Vec<Var> {
        let range: &[Var] = match top {
            Some(t) => &self.subtree(t)[1..],
            None => &self.dfs,
        };
        range.iter().copied().filter(|&v| !covered.iter().any(|&c| self.is_ancestor_or_self(c, v))).collect()
    }

    /// Parent array with `-1` for the root and absent variables, one line;
    /// followed by the preorder on a second line.
    pub fn to_text(&self) -> String {
        let parents: Vec<String> =
            (0..self.universe()).map(|v| self.parent(v).map_or("-1".to_string(), |p| p.to_string())).collect();
        let order: Vec<String> = self.dfs.iter().map(|v| v.to_string()).collect();
        format!("{}\n{}\n", parents.join(" "), order.join(" "))
    }

    /// Reads the format written by [`to_text`](Self::to_text) for a tree
    /// over all of `0..universe`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let parse_line = |l: Option<&str>, what: &str| -> Result<Vec<i64>> {
            let l = l.ok_or_else(|| Error::parse(1, format!("missing {what} line")))?;
            l.split_whitespace()
                .map(|t| t.parse::<i64>().map_err(|_| Error::parse(1, format!("bad {what} entry {t:?}"))))
                .collect()
        };
        let parents = parse_line(lines.next(), "parent")?;
        let order = parse_line(lines.next(), "order")?;
        let parent: Vec<Option<Var>> = parents.iter().map(|&p| (p >= 0).then_some(p as usize)).collect();
        let order: Vec<Var> = order.iter().map(|&v| v as usize).collect();
        let members: Vec<Var> = (0..parent.len()).collect();
        let t = PseudoTree::from_parents(&parent, &members, &order)?;
        if t.dfs != order {
            return Err(Error::Structure("stored preorder does not match the parent array".into()));
        }
        Ok(t)
    }

    /// Graphviz rendering with an optional label per variable.
    pub fn to_dot(&self, names: impl Fn(Var) -> String) -> String {
        let mut out = String::from("digraph pseudotree {\n  node [shape=circle];\n");
        for &v in &self.dfs {
            let _ = writeln!(out, "  v{v} [label=\"{}\"];", names(v));
        }
        for &v in &self.dfs {
            for &c in &self.children[v] {
                let _ = writeln!(out, "  v{v} -> v{c};");
            }
        }
        out.push_str("}\n");
        out
    }

    /// True when every primal edge joins a node to an ancestor or descendant.
    pub fn has_backarc_property(&self, g: &PrimalGraph) -> bool {
        g.edges().iter().all(|&(u, v)| self.is_ancestor_or_self(u, v) || self.is_ancestor_or_self(v, u))
    }
}

/// Per variable, the ancestors connected in `g` to the variable or to one of
/// its descendants, closest ancestor first.
pub fn compute_contexts(t: &PseudoTree, g: &PrimalGraph) -> Vec<Vec<Var>> {
    let n = t.universe();
    let mut sets: Vec<BTreeSet<Var>> = vec![BTreeSet::new(); n];
    for &v in t.dfs_order() {
        for u in g.neighbors(v) {
            if t.contains(u) && t.is_proper_ancestor(u, v) {
                let mut cur = v;
                while cur != u {
                    if !sets[cur].insert(u) {
                        break;
                    }
                    cur = t.parent(cur).expect("u is an ancestor");
                }
            }
        }
    }
    sets.into_iter()
        .map(|s| {
            let mut c: Vec<Var> = s.into_iter().collect();
            c.sort_by_key(|&a| std::cmp::Reverse(t.depth(a)));
            c
        })
        .collect()
}

/// Places each function in the bucket of its deepest scope variable; a
/// scope not lying on one root-to-leaf path is an error. Constant functions
/// go to the root.
pub fn compute_buckets(t: &PseudoTree, model: &GraphicalModel) -> Result<Vec<Vec<usize>>> {
    let mut buckets = vec![Vec::new(); t.universe()];
    for (i, f) in model.functions().iter().enumerate() {
        let scope = f.scope();
        if let Some(&v) = scope.iter().find(|&&v| !t.contains(v)) {
            return Err(Error::Structure(format!("function {i} mentions variable {v} outside the pseudo tree")));
        }
        let deepest = scope.iter().copied().max_by_key(|&v| t.depth(v)).unwrap_or(t.root());
        if let Some(&bad) = scope.iter().find(|&&v| !t.is_ancestor_or_self(v, deepest)) {
            return Err(Error::Structure(format!(
                "scope of function {i} is not on a root-to-leaf path ({bad} and {deepest} are unrelated)"
            )));
        }
        buckets[deepest].push(i);
    }
    Ok(buckets)
}

/// True iff the smaller tree is the larger one with the extra nodes deleted
/// and their parents reconnected to their descendants.
pub fn embed_check(t1: &PseudoTree, t2: &PseudoTree) -> bool {
    let (small, big) = if t1.len() <= t2.len() { (t1, t2) } else { (t2, t1) };
    for &v in small.dfs_order() {
        if !big.contains(v) {
            return false;
        }
    }
    for &v in small.dfs_order() {
        // nearest ancestor of v in `big` that belongs to `small`
        let mut cur = big.parent(v);
        while let Some(p) = cur {
            if small.contains(p) {
                break;
            }
            cur = big.parent(p);
        }
        if cur != small.parent(v) {
            return false;
        }
    }
    true
}
