//! Instantiation-level structure learning for Bayesian Knowledge Bases (BKBs).
//!
//! A BKB is a directed bipartite graph of instantiation nodes (I-nodes, one per
//! `variable = state` pair) and support nodes (S-nodes, weighted rules from a
//! set of parent I-nodes to a head I-node). Unlike a Bayesian network, which
//! commits every instantiation of a variable to the same parent set, a BKB may
//! give each instantiation its own parents, which lets it represent knowledge
//! that is cyclic at the variable level and incomplete at the distribution
//! level.
//!
//! The crate provides:
//!
//! - [`core`]: domain types (datasets, worlds, I-nodes, S-nodes, BKBs,
//!   fragments) and the BKB semantic validators;
//! - [`prob`]: a memoized empirical joint-probability engine with unique-call
//!   accounting, and the instantiated entropy / mutual-information quantities;
//! - [`scores`]: MDL model- and data-encoding lengths for BKBs and Bayesian
//!   networks, plus cross-entropy utilities;
//! - [`daglearn`]: per-world exact minimal-entropy inference-graph learning
//!   (subset-DP solver, brute-force oracle in tests, greedy fallback);
//! - [`fusion`]: the source-node fusion algorithm joining per-world fragments
//!   into one mutex-valid BKB;
//! - [`bkbsl`]: the end-to-end learner (dedupe worlds, learn one fragment per
//!   unique world, fuse, score);
//! - [`bnlearn`]: exact MDL Bayesian-network learning, BN-to-BKB conversion,
//!   and the rule-reorientation improvement pass;
//! - [`reason`]: world probability, bounded marginals, and classification with
//!   abstention over fused BKBs;
//! - [`harness`]: dataset ingestion, entropy-MDL discretization,
//!   cross-validation, MDL comparison, cycle analysis, and DOT export.

pub mod bkbsl;
pub mod bnlearn;
pub mod core;
pub mod daglearn;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod prob;
pub mod reason;
pub mod scores;

pub use error::{Error, Result};
