//! Maximum common subgraph detection via branch-and-bound search with
//! pluggable node-pair selection policies.
//!
//! The solver grows a node-node mapping between two input graphs one pair at
//! a time, maintaining the McSplit-style bidomain partition of the unmatched
//! nodes. Selection policies range from the classic degree heuristic to a
//! GNN-based deep Q-network trained by the three-stage pipeline in
//! [`train`]. The [`bench`] module runs policy comparisons and emits anytime
//! solution-size curves.

pub mod bench;
pub mod bidomain;
pub mod graph;
pub mod neural;
pub mod policy;
pub mod search;
pub mod train;
pub mod verify;

pub use bidomain::{Bidomain, SearchState};
pub use graph::{Graph, NodeFeatures};
pub use search::{complete_search, mcs_oracle, search, Budget, SearchResult};
