//! Bayesian causal structure learning for linear non-Gaussian structural
//! equation models, acyclic or cyclic.
//!
//! The workflow is: sample a posterior with [`sampler::run_dag_chain`] or
//! [`sampler::run_dcg_chain`], then summarize it with [`summary`]: edge
//! inclusion probabilities, a weighted-medoid point estimate under SHD, SID
//! or a custom distance, credible intervals for coefficients and motif
//! probabilities.

mod dist;
pub mod error;
pub mod graph;
pub mod io;
pub mod likelihood;
pub mod noise;
pub mod sampler;
pub mod summary;

pub use error::{Error, Result};
pub use graph::{
    contains_motif, shd, sid, Graph, GraphDistance, MotifMode, MotifSpec, ShdMode,
};
pub use likelihood::{
    collapsed_node_log_marginal, cyclic_log_likelihood, simulate_sem, DataMatrix, Simulation,
    Standardization, WeightedSem,
};
pub use noise::{GaussianMixture, MixtureHyper, NoiseModel};
pub use sampler::{
    run_chains, run_dag_chain, run_dcg_chain, ChainConfig, ChainState, ModelKind, PriorHyper,
    Sample, Trace, TraceMeta,
};
pub use summary::{
    edge_inclusion_probs, motif_probability, point_est_graph, posterior_interval,
    CredibleInterval, IntervalMethod, IntervalScope, MedoidReport, UniqueGraphSet,
};
