//! Belief-propagation community detection for sparse stochastic block
//! models with unequal group sizes and degrees.
//!
//! The crate provides, in rough dependency order:
//!
//! * [`model`] — block-model parametrization: group priors, affinity
//!   matrices, and the two-parameter family (mean degree `c`, structure
//!   strength `epsilon`, asymmetry `delta`), including the fully
//!   disassortative (planted coloring) case;
//! * [`graph`] — O(m) sampling of networks with planted labels, plus a
//!   plain-text file format;
//! * [`bp`] — cavity message passing with an external field: asynchronous
//!   convergence runs, exact finite-step (synchronous) mode, edge marginals,
//!   and the converged log-likelihood / Bethe free energy;
//! * [`classify`] — closed-form Bayes-optimal classifiers from radius-1
//!   (degree) and radius-2 (neighbor-degree) information;
//! * [`oracle`] — brute-force exact posteriors on small instances;
//! * [`metrics`] — overlap, marginal overlap, permutation-corrected overlap,
//!   and weak-structure baselines;
//! * [`sweep`], [`diagnose`], [`adiabatic`] — the experiment harness:
//!   seeded parameter grids, discontinuity/coexistence/condensation
//!   diagnosis, and warm-started hysteresis trajectories.
//!
//! Runnable walkthroughs of each capability live in `examples/`; the
//! `blockbp` binary exposes the same operations as subcommands.

pub mod adiabatic;
pub mod bp;
pub mod classify;
pub mod config;
pub mod diagnose;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod seed;
pub mod sweep;

pub use bp::{
    bp_sweep, compute_field, edge_marginal, init_messages, log_likelihood, run_finite,
    run_to_convergence, BpOptions, ConvergenceReport, InitMode, MessageSet,
};
pub use classify::{degree_classifier, first_order_messages, radius2_classifier, LocalPosterior};
pub use error::{Error, Result};
pub use graph::{
    parse_network, parse_network_file, sample_labeled_tree, sample_network, sample_network_with,
    write_network, write_network_file, LabelMode, Network,
};
pub use metrics::{
    marginal_overlap, overlap, overlap_report, permutation_max_overlap, weak_limits, OverlapReport,
};
pub use model::{
    affinity_from_strength, degree_profile, disassortative_affinity, equally_spaced_offsets,
    group_sizes, AffinityMatrix, BlockModelSpec, GroupPrior, SymmetricFamily,
};
pub use oracle::{exact_log_evidence, exact_marginals, exact_posterior, WeightModel};
