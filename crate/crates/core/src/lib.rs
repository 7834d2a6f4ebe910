//! Building blocks for segmenting bank customers by their yearly transaction
//! behaviour: profile construction from raw transaction logs, interchangeable
//! dimensionality-reduction techniques, agglomerative hierarchical clustering,
//! and the internal validation indices used to compare segmentations.
//!
//! The modules are layered bottom-up:
//!
//! * [`linalg`] - dense matrices, a Jacobi eigensolver, SVD, and the
//!   generalized symmetric eigenproblem;
//! * [`profiling`] - transaction parsing, per-customer yearly profiles,
//!   z-score standardization;
//! * [`drt`] - ICA, kernel PCA, truncated SVD, and locality preserving
//!   projections behind one `reduce` entry point;
//! * [`cluster`] - agglomerative hierarchical clustering (Lance-Williams)
//!   with deterministic tie-breaking;
//! * [`validate`] - silhouette, Calinski-Harabasz, and Davies-Bouldin
//!   scores with explicit degeneracy flags;
//! * [`harness`] - the seeded synthetic generator and the method x
//!   components x segments experiment grid;
//! * [`io`] - the CSV / plain-text interchange formats shared by the
//!   library and the CLI.

pub mod cluster;
pub mod drt;
pub mod harness;
pub mod io;
mod kv;
pub mod linalg;
pub mod profiling;
pub mod validate;

pub use cluster::{ahc_fit, cut, ClusterAssignment, Dendrogram, Linkage};
pub use drt::{reduce, ReducedEmbedding, ReducerConfig, ReducerMethod};
pub use harness::{
    emit_report, run_grid, run_grid_with_workers, summarize, synth_dataset, GridCellResult,
    GridConfig, ReportFormat, SynthSpec,
};
pub use linalg::Matrix;
pub use profiling::{
    build_profiles, parse_transactions, standardize, ProfileMatrix, ProfileSchema,
};
pub use validate::{validate_all, ValidationReport};
