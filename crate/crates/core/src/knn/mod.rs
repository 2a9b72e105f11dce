//! kNN-sparsified bipartite matching for grid layouts.
//!
//! Step 1 joins each projected point to its `k` nearest grid cells. Step 2
//! ([`repair`]) rebalances the grid side until every vertex has degree exactly
//! `k`; a k-regular bipartite graph always has a perfect matching, so the
//! sparse JV solver cannot fail on the result.

mod approx;
pub mod bench;
mod graph;
mod repair;

pub use approx::{approx_layout, approx_layout_padded, cost_ratio, dense_baseline, dense_costs, ApproxReport};
pub use graph::{build_knn_graph, build_padded_knn_graph, Edge, SparseBipartiteGraph};
pub use repair::{repair, repair_traced, RepairTrace};

pub(crate) use graph::CenterIndex;
