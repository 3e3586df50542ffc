//! Information-theoretic loss terms computed from mini-batch soft outputs.
//!
//! Marginals and pairwise joints are always estimated from the batch at hand.

mod cluster;
mod entropy;
mod hash;
mod sat;

pub use cluster::{clustering_loss, ClusterObjective, ClusterTerms};
pub use entropy::{
    conditional_entropy, kl_divergence, marginal_estimate, shannon_entropy, PROB_CEIL, PROB_FLOOR,
};
pub use hash::{
    hash_loss, mutual_information_from_joint, pairwise_joint, HashObjective, HashTerms, Joint2, PairCounting,
};
pub use sat::{sat_loss, sat_loss_grad};
