//! Tree-directed topic models.
//!
//! A corpus-level admixture model in which each document draws one maximal
//! path of a directed rooted tree (DRT) and then mixes the topics sitting on
//! that path, LDA-style. The crate provides:
//!
//! - [`drt`]: DRT combinatorics — validation, path enumeration, membership
//!   counts, isomorphism and reconstruction of a tree from its path node-sets;
//! - [`geometry`]: the metric suite on topic hierarchies — polytope
//!   projections, Hausdorff and minimal-matching distances, the
//!   permutation-optimal tree metric, union-Hausdorff estimates and
//!   model-selection diagnostics;
//! - [`model`]: the generative model, exact and Monte-Carlo document
//!   likelihoods, exact total-variation/KL oracles on small instances and
//!   closed-form first/second moments;
//! - [`gibbs`]: the collapsed Gibbs sampler over path and depth labels with
//!   parameter estimation and held-out evaluation;
//! - [`experiments`]: desk-scale simulation harnesses (estimation rate, model
//!   selection, diagnostics, PCA projections);
//! - [`io`]: file formats for trees, corpora, parameters, fits and run
//!   manifests.

pub mod drt;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod gibbs;
pub mod io;
pub mod model;
