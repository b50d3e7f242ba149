//! Kernelized Bayesian matrix factorization with twin multiple kernel learning.
//!
//! The crate factorizes a bipartite target matrix Y (rows from one object
//! domain, columns from another) through low-dimensional latent components
//! driven by per-domain kernel stacks. Inference is closed-form coordinate
//! ascent on a variational bound; learned kernel weights expose which side
//! information sources matter. Out-of-matrix (cold-start) rows and columns are
//! scored by projecting their kernel columns through the fitted posteriors.
//!
//! Modules:
//! - [`kernels`]: kernel construction, validation, and the Gram-sum cache.
//! - [`distributions`]: normal/truncated-normal/Gamma building blocks.
//! - [`vb`]: the variational inference engine (three model variants).
//! - [`predict`]: cold-start prediction and class probabilities.
//! - [`eval`]: cross-validation protocols, metrics, and reports.
//! - [`toy`]: the synthetic benchmark generator.
//! - [`io`]: matrix and manifest file formats.

pub mod distributions;
pub mod error;
pub mod eval;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod predict;
pub mod toy;
pub mod vb;

pub use error::{KbmfError, Result};
