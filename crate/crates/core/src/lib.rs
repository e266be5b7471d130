//! Broadcasting of ±1 spins on unrooted binary trees under the symmetric
//! two-state channel model (CFN).
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! * [`tree`]: unrooted binary topologies, rooted descendant-subtree views and
//!   generators for random and experiment trees.
//! * [`model`]: edge parameters, parameter boxes, broadcast sampling and exact
//!   enumeration of leaf laws on small trees.
//! * [`magnetization`]: the posterior root bias recursion, all directed
//!   messages of a tree, a brute-force oracle and the reconstruction
//!   trichotomy.
//! * [`likelihood`]: leaf log-likelihood by pruning, its per-edge gradient
//!   through magnetizations and a finite-difference checker.
//! * [`estimator`]: branch-length fitting by cyclic coordinate maximization.
//!
//! IO, file formats, Monte Carlo harnesses and the command line live in the
//! `cfn` companion crate.

#![no_std]
#![deny(unsafe_code)]
// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod estimator;
pub mod likelihood;
pub mod magnetization;
pub mod model;
pub mod tree;

pub use error::{Error, Result};
pub use estimator::{
    coordinate_sweep, edge_derivative, edge_profile_products, fit, optimize_edge, EdgeProfile,
    FitConfig, FitResult, SweepOrder, Termination,
};
pub use likelihood::{
    finite_difference_grad, grad_all, grad_edge, log_likelihood, log_likelihood_dataset,
    population_gradient_closed_form, Dataset, GradientVector,
};
pub use magnetization::{
    all_messages, brute_force_magnetization, classify_trichotomy, default_constants, q_combine,
    root_magnetization, Endpoints, MessageTable, Tier, TrichotomyConstants,
};
pub use model::{
    broadcast_sample, broadcast_view, convert, enumerate_leaf_distribution, in_box,
    sample_parameters, stream_rng, EdgeParameters, LeafDistribution, ParameterBox, Scale, Scope,
    SpinConfig,
};
pub use tree::{
    descendant_subtree, experiment_tree, random_binary_tree, whole_tree_view, DfsEdgeOrder, EdgeId,
    ExperimentKind, NodeId, RootedView, TreeTopology,
};
