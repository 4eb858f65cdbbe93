//! Normalize-then-propagate node classification.
//!
//! The pipeline encodes node features with a two-layer MLP, projects every
//! embedding onto the unit hypersphere, and smooths the result with `K` steps
//! of the renormalized adjacency `D̃^{-1/2}(A + I)D̃^{-1/2}`. Nodes are
//! classified by cosine similarity to fixed, maximally separated class
//! prototypes. Because every propagated row is a nonnegative combination of
//! unit vectors, its norm is bounded by `[P^K 1]_i`; the ratio of the two
//! (the consistent metric) drives an unsupervised regularizer on confident
//! unlabeled nodes.
//!
//! Module map:
//! - [`tensor`]: dense/sparse kernels, row normalization, Adam, RNG, dropout
//! - [`graph`]: graph model, propagation operator, homophily, SBM generator,
//!   split sampling, JSON I/O
//! - [`prototypes`]: hyperspherical prototype solver
//! - [`model`]: forward pipeline, hand-derived backward pass, prediction
//! - [`loss`]: classification loss, regularizer, warm-up loss, diagnostics
//! - [`train`]: trainer, experiment runner, propagation benchmark
//! - [`cli`]: command-line entry point

pub mod cli;
pub mod error;
pub mod graph;
pub mod loss;
pub mod model;
pub mod prototypes;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
