//! Unsupervised alignment of two graphs' node sets.
//!
//! The pipeline: embed each graph independently with random-walk skip-gram,
//! learn a linear map between the embedding spaces by adversarial training
//! with an orthogonality pull-back, refine the map with Procrustes on
//! hubness-corrected (CGSS) mutual-nearest-neighbor pseudo anchors, and
//! optionally iterate by extending both graphs with pseudo user links.
//!
//! Centrality-based aligners and a common-neighbor link predictor are
//! included as baselines, plus Precision@N evaluation and report plumbing.

pub mod adversarial;
pub mod baselines;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod exec;
pub mod graph;
pub mod incremental;
pub mod linalg;
pub mod refinement;

pub use error::{Error, Result};
pub use exec::Execution;
