//! Product manifold filter: dense bijective correspondences between two
//! discretized shapes from a sparse or noisy set of input matches.
//!
//! The pipeline builds a kernel density estimate on the product of the two
//! shapes, extracts a bijection by linear assignment and repeats with the new
//! matches. A coarse-to-fine variant restricts each level's assignment to the
//! vicinity of the previous level's map, so memory stays far below `n²`.

pub mod assignment;
pub mod density;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod geometry;
pub mod matrix;
pub mod metric;
pub mod pmf;
pub mod sampling;

pub use assignment::{AuctionConfig, Permutation, Solution};
pub use density::{KernelParams, MatchSet, PayoffMatrix, WeightMask};
pub use error::{Error, Infeasibility, Result};
pub use exec::Exec;
pub use geometry::TriMesh;
pub use matrix::{DenseMatrix, SparseMatrix};
pub use metric::MetricSpace;
pub use pmf::{PmfConfig, PmfResult};
pub use sampling::SamplingHierarchy;
