//! AND/OR multi-valued decision diagrams (AOMDDs) for graphical models.
//!
//! A model is compiled along a pseudo tree either by AND/OR search with
//! context caching ([`search`]) or by bucket elimination with the APPLY
//! operator ([`be`]). Both produce the same canonical diagram in a
//! [`UniqueTable`], which [`query`] then answers questions about.
//!
//! ```
//! use std::sync::Arc;
//! use aomdd::*;
//!
//! let model = parse_dimacs_cnf("p cnf 3 2\n1 2 0\n-2 3 0\n").unwrap();
//! let g = PrimalGraph::from_model(&model);
//! let tree = Arc::new(PseudoTree::generate(&g, &min_fill_ordering(&g, 0)));
//! let (d, _) = compile_search(&model, tree, &mut NoPruning, &CompileOptions::default()).unwrap();
//! assert_eq!(count_solutions(&d, &Evidence::none(3)).unwrap().to_string(), "4");
//! ```

pub mod be;
pub mod diagram;
pub mod error;
pub mod io;
pub mod model;
pub mod query;
pub mod search;
pub mod structure;

use std::sync::Arc;

pub use be::{
    apply, apply_lists, compile_be, compile_be_in, function_to_chain_aomdd, group_descendants, ApplyMemo, BucketReport,
};
pub use diagram::{quantize, Aomdd, Branch, DiagramStats, MetaNode, NodeRef, Scaled, UniqueTable, DEFAULT_DIGITS};
pub use error::{Error, Result};
pub use io::{deserialize, serialize, to_dot};
pub use model::{
    all_assignments, parse_dimacs_cnf, parse_evidence, parse_uai, write_uai, Assignment, GraphicalModel, ModelKind,
    TableFunction, Var, Variable,
};
pub use query::{
    belief, count_solutions, enumerate_solutions, equivalent, evaluate, mpe, sum_over, sum_traversal, Evidence,
};
pub use search::{
    bcp_hook, bottom_up_reduction, compile_search, compile_search_in, context_minimal_graph, NoPruning, PruningHook,
    SearchStats, UnitPropagation,
};
pub use structure::{
    compute_buckets, compute_contexts, embed_check, induced_width, min_fill_ordering, Ordering, PrimalGraph, PseudoTree,
};

/// Settings shared by both compilers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileOptions {
    /// Significant decimal digits kept in stored weights.
    pub digits: u32,
    /// Maximum number of meta-nodes in the unique table.
    pub node_cap: Option<usize>,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { digits: DEFAULT_DIGITS, node_cap: None }
    }
}

impl CompileOptions {
    /// An empty unique table for `model` over `tree`.
    pub fn table_for(&self, model: &GraphicalModel, tree: Arc<PseudoTree>) -> UniqueTable {
        UniqueTable::new(tree, model.domains().to_vec(), model.kind())
            .with_digits(self.digits)
            .with_node_cap(self.node_cap)
    }
}
