//! Independent reference implementations used to cross-check the analysis.

pub mod differential;
pub mod dom;
pub mod graph;
pub mod inline;
pub mod interp;

pub use graph::{random_graph, ExplicitGraph, GraphShape};
pub use inline::{inline_expand, inline_expand_traced, Inlined};
pub use interp::{interpret, Outcome, Trap, Val};

use dfi_core::clients::ClientAnalysis;
use dfi_core::dft::build_graph;
use dfi_core::ir::Module;

/// Value-flow graph of every function of `m` under `client`, as explicit
/// adjacency lists.
pub fn explicit_graphs(m: &Module, client: &dyn ClientAnalysis) -> Vec<ExplicitGraph> {
    m.functions
        .iter()
        .map(|f| ExplicitGraph::from_vf(&build_graph(f, m, client).expect("client edges stay in the function")))
        .collect()
}
