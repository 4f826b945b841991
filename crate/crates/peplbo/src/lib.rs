//! Latent Bayesian optimization over decodable peptide design spaces.
//!
//! The crate is organized around a small pipeline:
//!
//! - [`peptides`] — sequence parsing and physicochemical descriptors
//!   (Boman index, net charge, Kyte-Doolittle hydrophobicity).
//! - [`latent`] — a pluggable encoder/decoder abstraction plus a
//!   deterministic reference latent model whose geometry is organized by
//!   descriptors with tunable strength.
//! - [`projection`] — PCA fitting, forward/inverse projection and
//!   component-property correlation reports.
//! - [`gp`] — exact Gaussian process regression with an ARD RBF kernel,
//!   marginal-likelihood hyperparameter fitting and posterior sampling.
//! - [`acquisition`] — numerically stable log expected improvement and
//!   box-constrained acquisition maximization.
//! - [`lbo`] — the optimization loop over the full latent space or a PCA
//!   subspace, with run logging and best-so-far difference series.
//! - [`oracle`] — objective construction: mutual information, mRMR
//!   screening, dummy-feature LASSO selection, epsilon-SVR with
//!   cross-validated grid search, and a closed-form desk oracle.
//! - [`diagnostics`] — exploration metrics (hypervolume, score variance,
//!   path length, distance to a reference set) and basic statistics.
//! - [`distortion`] — projection faithfulness metrics (trustworthiness,
//!   continuity, steadiness, cohesiveness) with subsample uncertainty.
//! - [`experiment`] — experiment orchestration producing run logs,
//!   summaries and plot scripts; drives the `peplbo` command-line tool.
//!
//! Every randomized operation takes an explicit seed and is reproducible
//! bit-for-bit across runs. See the `examples/` directory for one runnable
//! example per capability.

pub mod acquisition;
pub mod diagnostics;
pub mod distortion;
pub mod experiment;
pub mod gp;
pub mod io;
pub mod lbo;
pub mod oracle;
pub mod latent;
pub mod peptides;
pub mod projection;

mod norm;
mod optim;
mod rng;

pub use peptides::{DescriptorVector, Sequence};
