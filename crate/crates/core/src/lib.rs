//! White-box backdoor signal analysis for transformer code-model checkpoints.
//!
//! The crate is organised around the analyses it performs:
//!
//! - [`tensor_io`]: reading tensor-store checkpoints and NPY array files.
//! - [`schema`]: mapping attention Query/Key/Value addresses onto tensor names.
//! - [`stats`]: raw and fine-tuned minus pre-trained parameter distributions,
//!   Gaussian KDE smoothing and two-sample comparisons.
//! - [`embedding`]: exact t-SNE, k-means, silhouette scoring and the
//!   clustering-based backdoor verdict for context embeddings.
//! - [`poison`]: variable-renaming trigger injection for C corpora and
//!   accuracy / attack-success-rate scoring.
//! - [`report`]: report fragments, CSV/SVG artifacts and the merged report.
//! - [`cli`]: the `trojanscope` command-line front end.
//!
//! Hot numerical loops run through [`exec::Exec`], which dispatches to rayon
//! when the `parallel` feature is enabled and falls back to plain iteration
//! otherwise. Both paths produce bit-identical results.

// `!(x > 0.0)` is used throughout to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod embedding;
pub mod exec;
pub mod matrix;
pub mod poison;
pub mod report;
pub mod schema;
pub mod stats;
pub mod synthetic;
pub mod tensor_io;

pub use exec::Exec;
pub use matrix::DenseMatrix;
