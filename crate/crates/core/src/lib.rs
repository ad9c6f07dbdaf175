//! Sparse data-flow analysis over a mini SSA IR using DFS-tree interval
//! labelling, with interprocedural summaries and two reference clients.

pub mod clients;
pub mod dft;
pub mod interproc;
pub mod interval;
pub mod ir;
pub mod preprocess;
pub mod stats;
pub mod synth;
