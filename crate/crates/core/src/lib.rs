//! Technological convergence index for patents.
//!
//! The crate turns a patent corpus and a table of semantic IPC embeddings into
//! per-patent convergence scores:
//!
//! 1. [`corpus`] parses and validates records (or synthesizes a corpus with
//!    planted structure),
//! 2. [`hgraph`] builds the Patent/IPC/Topic/Applicant graph,
//! 3. [`hgt`] learns structural node embeddings by relation-aware attention,
//! 4. [`embed`] fuses structural and semantic IPC vectors,
//! 5. [`metrics`] computes Depth-1, Depth-2, Shannon and Rao-Stirling breadth
//!    and the co-occurrence baselines,
//! 6. [`index`] weights the components with the entropy weight method and
//!    assembles the index and its variants,
//! 7. [`stats`] validates the result with correlations, OLS with year fixed
//!    effects, densities and trends.
//!
//! [`pipeline`] chains the stages and persists every artifact.

// `!(x > 0.0)` is used on purpose so that NaN takes the degenerate branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod embed;
pub mod hgraph;
pub mod hgt;
pub mod index;
pub mod metrics;
pub mod pipeline;
pub mod stats;
