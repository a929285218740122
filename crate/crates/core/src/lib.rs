//! Range-cover indexes for one-dimensional data.
//!
//! This crate builds two data-dependent index structures over sorted
//! integer datasets — the binary 1D-Tree and its overlapping c-DAG
//! augmentation — and answers range queries approximately with
//! single-range-cover (SRC) search: the query is answered by one node
//! whose canonical interval fully contains it, inclusion-minimal among
//! all nodes.
//!
//! Around the structures sit:
//!
//! - [`analytics`]: exact closed forms for the level-difference
//!   distribution between the two structures, the additive search-time
//!   and multiplicative false-positive bounds, an L2 fitting procedure
//!   for skewed data, and Shannon entropy of returned levels;
//! - [`oracle`]: independent brute-force search and an exact rational
//!   sweep over query starts, used to validate both the structures and
//!   the closed forms;
//! - [`experiments`]: a seeded, reproducible benchmark harness with a
//!   batch-stabilization stopping rule and CSV/JSON reporting;
//! - [`ingest`]: timestamp-file loading with normalization plus uniform
//!   and clustered synthetic generators.

pub mod analytics;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod ingest;
pub mod ldd;
pub mod oracle;
pub mod rng;
pub mod structures;
pub mod types;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use ldd::{kappa_of, LevelDifferenceDistribution, Probability};
pub use structures::{build_cdag, build_tree, IndexStructure, SearchResult};
pub use types::{Coord, DagConfig, Interval, NodeRecord, QueryRange};
