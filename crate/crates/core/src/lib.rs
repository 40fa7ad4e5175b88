//! Core of the hierarchical Dirichlet process latent position clustering
//! model (HDP-LPCM) for dynamic networks.
//!
//! A dynamic network is a sequence of undirected binary adjacency matrices
//! over a fixed actor set. Every actor carries a latent position at each time
//! step; edges form with probability `logistic(beta0 - distance)`. Positions
//! follow an autoregressive hidden Markov model whose hidden states are
//! communities, and the time-varying transition matrices share a sticky HDP
//! prior under the weak-limit (truncation level `L`) approximation.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every algorithmic
//! piece:
//!
//! * [`network`]: the [`DynamicNetwork`] container plus windowing and degree
//!   filtering.
//! * [`model`]: state types, the network likelihood, emission densities and
//!   the unnormalized log posterior.
//! * [`labels`]: blocked forward-backward sampling of label sequences.
//! * [`hdp`]: Chinese restaurant franchise auxiliary variables, Dirichlet
//!   updates and hyperparameter samplers.
//! * [`gibbs`]: the Metropolis-Hastings-within-Gibbs sweep, initialization,
//!   step-size tuning and chain orchestration.
//! * [`summary`]: co-assignment, VI partition selection, Procrustes
//!   alignment, group-count posteriors, ESS and evaluation metrics.
//! * [`sim`]: synthetic benchmark generators and forward simulation.
//!
//! File formats, chain persistence and the command-line tool live in the
//! `hdp-lpcm` crate.
//!
//! Indices are zero-based everywhere in this crate: actors `0..n`, times
//! `0..T` and labels `0..L`. Text outputs produced by the companion crate are
//! one-based.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dist;
mod error;
pub mod gibbs;
pub mod hdp;
pub mod labels;
pub mod linalg;
pub mod model;
pub mod network;
pub mod sim;
pub mod summary;

pub use error::{Error, Result};
pub use gibbs::{Chain, ChainRunner, SamplerConfig};
pub use model::{GroupParams, Hyperparams, LabelSequences, LatentPositions, ModelState, TransitionStructure};
pub use network::DynamicNetwork;

/// Identifier of the pseudo-random generator used for every draw.
pub const RNG_ALGORITHM: &str = "chacha8";

/// The generator behind all sampling in this crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Creates the crate generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
