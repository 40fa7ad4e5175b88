//! Blocked Metropolis-Hastings within Gibbs sampler.
//!
//! One sweep updates, in order: latent positions (per-site random walk),
//! the optional joint moves (relabel-and-move, then the blending coefficient
//! and the group centers each shifted together with the trajectories), the
//! intercept, label sequences (forward-backward), CRF auxiliary counts,
//! `beta`, `pi0`, the transition rows, group centers, group variances,
//! the blending coefficient and the hyperparameters.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // float methods come from std when a dependency links it
use num_traits::Float;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::dist::{dirichlet, inv_gamma, normal_ln_pdf, open_uniform, standard_normal, truncated_normal};
use crate::hdp::{
    compute_transition_counts, sample_aux_tables, sample_beta, sample_hyperparams, sample_initial_distribution,
    sample_overrides, sample_transition_rows, TransitionCounts,
};
use crate::labels::sample_all_labels;
use crate::linalg::{apply_rotation, center_in_place, classical_mds, kmeans, procrustes_rotation, shortest_path_dissimilarities};
use crate::model::{
    dyad_log_likelihood, emission_unchecked, euclidean, log_posterior_parts_given_likelihood, GroupParams, HyperToggles,
    Hyperparams, LabelSequences, LatentPositions, ModelState, TransitionStructure,
};
use crate::network::DynamicNetwork;
use crate::{Error, Result, Rng, RNG_ALGORITHM};

/// What each kept sample stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageMode {
    /// Positions, labels and transition matrices as well as the group
    /// parameters and hyperparameters.
    #[default]
    Full,
    /// Group parameters and hyperparameters only.
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_tune: usize,
    pub n_burn: usize,
    pub n_keep: usize,
    pub thin: usize,
    /// Random-walk scale of the position proposals.
    pub step_x: f64,
    /// Random-walk scale of the intercept proposals.
    pub step_beta0: f64,
    /// Initial random-walk scale of the blending-coefficient shifts.
    pub step_lambda: f64,
    /// Initial random-walk scale of the group-center shifts.
    pub step_mu: f64,
    pub target_accept_low: f64,
    pub target_accept_high: f64,
    /// Sweeps per tuning window.
    pub tune_window: usize,
    pub seed: u64,
    /// Truncation level `L`.
    pub n_groups: usize,
    /// Latent dimension `p`.
    pub dim: usize,
    pub toggles: HyperToggles,
    /// Position and intercept sweeps of the cluster-free warm start.
    pub n_init_sweeps: usize,
    pub storage: StorageMode,
    /// Sweeps between checkpoints; 0 disables checkpointing.
    pub checkpoint_every: usize,
    /// Leading sweeps during which the blending coefficient stays at its
    /// initial value; capped at `n_tune`.
    pub lambda_warmup: usize,
    /// Adds the joint relabel-and-move proposals to every sweep.
    pub relocation_moves: bool,
    /// Adds the residual-preserving shifts of the blending coefficient and
    /// of every group center to every sweep.
    pub shift_moves: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_tune: 5_000,
            n_burn: 5_000,
            n_keep: 10_000,
            thin: 1,
            step_x: 0.5,
            step_beta0: 0.1,
            step_lambda: 0.01,
            step_mu: 0.05,
            target_accept_low: 0.25,
            target_accept_high: 0.40,
            tune_window: 100,
            seed: 0,
            n_groups: 10,
            dim: 2,
            toggles: HyperToggles::ALL,
            n_init_sweeps: 1_000,
            storage: StorageMode::Full,
            checkpoint_every: 0,
            lambda_warmup: 1_000,
            relocation_moves: true,
            shift_moves: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Argument("thin must be at least 1".into()));
        }
        if self.tune_window == 0 {
            return Err(Error::Argument("tune_window must be at least 1".into()));
        }
        if self.n_groups == 0 || self.dim == 0 {
            return Err(Error::Argument("L and p must be at least 1".into()));
        }
        let steps = [("step_x", self.step_x), ("step_beta0", self.step_beta0), ("step_lambda", self.step_lambda), ("step_mu", self.step_mu)];
        for (name, v) in steps {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} must be a finite non-negative number")));
            }
        }
        let (lo, hi) = (self.target_accept_low, self.target_accept_high);
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::Argument(format!("acceptance band ({lo}, {hi}) must satisfy 0 < low < high < 1")));
        }
        Ok(())
    }

    pub fn total_sweeps(&self) -> usize {
        self.n_tune + self.n_burn + self.n_keep
    }

    pub fn n_samples(&self) -> usize {
        self.n_keep / self.thin.max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub x: f64,
    pub beta0: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl StepSizes {
    pub fn initial(config: &SamplerConfig) -> Self {
        Self { x: config.step_x, beta0: config.step_beta0, lambda: config.step_lambda, mu: config.step_mu }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub accepted: u64,
    pub proposed: u64,
}

impl Tally {
    pub fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
    fn add(&mut self, other: Tally) {
        self.accepted += other.accepted;
        self.proposed += other.proposed;
    }
}

/// Acceptance tallies of the Metropolis blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BlockTallies {
    pub positions: Tally,
    pub intercept: Tally,
    /// Joint relabel-and-move proposals; not tuned.
    #[serde(default)]
    pub relocations: Tally,
    #[serde(default)]
    pub lambda_shifts: Tally,
    #[serde(default)]
    pub mu_shifts: Tally,
}

impl BlockTallies {
    fn add(&mut self, other: BlockTallies) {
        self.positions.add(other.positions);
        self.intercept.add(other.intercept);
        self.relocations.add(other.relocations);
        self.lambda_shifts.add(other.lambda_shifts);
        self.mu_shifts.add(other.mu_shifts);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AcceptStats {
    pub tune: BlockTallies,
    pub burn: BlockTallies,
    pub keep: BlockTallies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Tune,
    Burn,
    Keep,
}

/// One kept draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Zero-based index of the sweep that produced the draw.
    pub sweep: usize,
    pub log_post: f64,
    pub log_likelihood: f64,
    pub groups: GroupParams,
    pub hyper: Hyperparams,
    pub trans: Option<TransitionStructure>,
    pub labels: Option<LabelSequences>,
    pub positions: Option<LatentPositions>,
}

/// A finished (or interrupted) chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub config: SamplerConfig,
    pub rng_algorithm: String,
    pub seed: u64,
    pub n_actors: usize,
    pub n_times: usize,
    pub samples: Vec<Sample>,
    pub accept: AcceptStats,
    pub final_steps: StepSizes,
    pub sweeps_done: usize,
    pub interrupted: bool,
}

impl Chain {
    pub fn log_post(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.log_post).collect()
    }
}

/// Full generator state so a run can continue bit-exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngCheckpoint {
    pub algorithm: String,
    pub seed: [u8; 32],
    pub stream: u64,
    /// Word position as `[high, low]` 64-bit halves.
    pub word_pos: [u64; 2],
}

impl RngCheckpoint {
    pub fn capture(rng: &Rng) -> Self {
        let pos = rng.get_word_pos();
        Self {
            algorithm: RNG_ALGORITHM.into(),
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: [(pos >> 64) as u64, pos as u64],
        }
    }

    pub fn restore(&self) -> Result<Rng> {
        if self.algorithm != RNG_ALGORITHM {
            return Err(Error::Argument(format!("checkpoint uses generator {}", self.algorithm)));
        }
        let mut rng = Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos((u128::from(self.word_pos[0]) << 64) | u128::from(self.word_pos[1]));
        Ok(rng)
    }
}

/// Per-dyad distances and log-likelihood terms, kept in sync with the
/// positions and intercept so single-site moves cost `O(n)`.
#[derive(Debug, Clone)]
struct LikelihoodCache {
    n: usize,
    dist: Vec<f64>,
    ll: Vec<f64>,
    scratch_dist: Vec<f64>,
    scratch_ll: Vec<f64>,
}

impl LikelihoodCache {
    fn build(net: &DynamicNetwork, positions: &LatentPositions, beta0: f64) -> Self {
        let (n, n_times) = (net.n_actors(), net.n_times());
        let mut dist = vec![0.0; n_times * n * n];
        let mut ll = vec![0.0; n_times * n * n];
        for t in 0..n_times {
            for i in 0..n {
                let row = net.row(t, i);
                for j in 0..i {
                    let d = euclidean(positions.get(t, i), positions.get(t, j));
                    let v = dyad_log_likelihood(row[j] == 1, beta0 - d);
                    for (a, b) in [(i, j), (j, i)] {
                        dist[(t * n + a) * n + b] = d;
                        ll[(t * n + a) * n + b] = v;
                    }
                }
            }
        }
        Self { n, dist, ll, scratch_dist: vec![0.0; n], scratch_ll: vec![0.0; n] }
    }

    /// Sum over `j < i` in the same order as the slice log-likelihood.
    fn total(&self) -> f64 {
        let n = self.n;
        let n_times = if n == 0 { 0 } else { self.ll.len() / (n * n) };
        let mut total = 0.0;
        for t in 0..n_times {
            for i in 1..n {
                total += self.ll[(t * n + i) * n..(t * n + i) * n + i].iter().sum::<f64>();
            }
        }
        total
    }
}

/// The prior on one position used by the per-site Metropolis step.
#[derive(Debug, Clone, Copy)]
enum PositionPrior {
    /// The autoregressive HMM emissions of the current state.
    Model,
    /// Cluster-free warm start: `X_1 ~ N(0, v1 I)`, `X_t ~ N(X_{t-1}, v I)`.
    RandomWalk { first: f64, step: f64 },
}

fn local_log_prior(prior: PositionPrior, state: &ModelState, t: usize, i: usize, x: &[f64]) -> f64 {
    let pos = &state.positions;
    let n_times = pos.n_times();
    match prior {
        PositionPrior::Model => {
            let prev = (t > 0).then(|| pos.get(t - 1, i));
            let mut lp = emission_unchecked(x, prev, state.labels.get(t, i), &state.groups);
            if t + 1 < n_times {
                lp += emission_unchecked(pos.get(t + 1, i), Some(x), state.labels.get(t + 1, i), &state.groups);
            }
            lp
        }
        PositionPrior::RandomWalk { first, step } => {
            let iso = |a: &[f64], b: Option<&[f64]>, v: f64| -> f64 {
                a.iter().enumerate().map(|(d, &ad)| normal_ln_pdf(ad, b.map_or(0.0, |b| b[d]), v)).sum()
            };
            let mut lp = if t == 0 { iso(x, None, first) } else { iso(x, Some(pos.get(t - 1, i)), step) };
            if t + 1 < n_times {
                lp += iso(pos.get(t + 1, i), Some(x), step);
            }
            lp
        }
    }
}

fn position_sweep(
    state: &mut ModelState,
    net: &DynamicNetwork,
    cache: &mut LikelihoodCache,
    prior: PositionPrior,
    step: f64,
    rng: &mut Rng,
    mut record: impl FnMut(usize, usize, bool),
) -> Tally {
    let (n, n_times, p) = (state.n_actors(), state.n_times(), state.dim());
    let beta0 = state.groups.beta0;
    let mut current = vec![0.0; p];
    let mut proposal = vec![0.0; p];
    let mut tally = Tally::default();
    for t in 0..n_times {
        for i in 0..n {
            current.copy_from_slice(state.positions.get(t, i));
            for (q, c) in proposal.iter_mut().zip(&current) {
                *q = c + step * standard_normal(rng);
            }
            let row = net.row(t, i);
            let base = (t * n + i) * n;
            let mut delta = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = euclidean(&proposal, state.positions.get(t, j));
                let v = dyad_log_likelihood(row[j] == 1, beta0 - d);
                cache.scratch_dist[j] = d;
                cache.scratch_ll[j] = v;
                delta += v - cache.ll[base + j];
            }
            delta += local_log_prior(prior, state, t, i, &proposal) - local_log_prior(prior, state, t, i, &current);
            let accept = open_uniform(rng).ln() < delta;
            tally.proposed += 1;
            if accept {
                tally.accepted += 1;
                state.positions.get_mut(t, i).copy_from_slice(&proposal);
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let (d, v) = (cache.scratch_dist[j], cache.scratch_ll[j]);
                    cache.dist[base + j] = d;
                    cache.ll[base + j] = v;
                    cache.dist[(t * n + j) * n + i] = d;
                    cache.ll[(t * n + j) * n + i] = v;
                }
            }
            record(t, i, accept);
        }
    }
    tally
}

/// Joint relabel-and-move proposals, one per actor. A block of times
/// `t..t + m` that shares one label is proposed to move to another label
/// with fresh positions drawn from that group's emissions. Later positions
/// shift by `(1 - lambda)^s` times the last displacement, which leaves their
/// emission residuals unchanged. The emission densities cancel against the
/// proposal, so the acceptance ratio is the network likelihood ratio times
/// the transition ratio at the block edges.
fn relocation_sweep(state: &mut ModelState, net: &DynamicNetwork, cache: &mut LikelihoodCache, rng: &mut Rng) -> Tally {
    use rand::Rng as _;
    let (n, n_times, p, l) = (state.n_actors(), state.n_times(), state.dim(), state.n_groups());
    let mut tally = Tally::default();
    if l < 2 {
        return tally;
    }
    let (beta0, lam) = (state.groups.beta0, state.groups.lambda);
    let mut moved = vec![0.0; n_times * p];
    let mut new_dist = vec![0.0; n_times * n];
    let mut new_ll = vec![0.0; n_times * n];
    for i in 0..n {
        let t = rng.random_range(0..n_times);
        let m = rng.random_range(1..=n_times - t);
        let old = state.labels.get(t, i);
        let mut new = rng.random_range(0..l - 1);
        if new >= old {
            new += 1;
        }
        let end = t + m;
        if (t..end).any(|s| state.labels.get(s, i) != old) {
            continue;
        }
        let sd = state.groups.sigma2[new].sqrt();
        for s in t..n_times {
            for d in 0..p {
                let current = state.positions.get(s, i)[d];
                moved[s * p + d] = if s < end {
                    let mu = state.groups.center(new)[d];
                    let mean = match s {
                        0 => mu,
                        _ if s == t => lam * mu + (1.0 - lam) * state.positions.get(s - 1, i)[d],
                        _ => lam * mu + (1.0 - lam) * moved[(s - 1) * p + d],
                    };
                    mean + sd * standard_normal(rng)
                } else {
                    current + (1.0 - lam) * (moved[(s - 1) * p + d] - state.positions.get(s - 1, i)[d])
                };
            }
        }
        let mut delta = 0.0;
        for s in t..n_times {
            let x = &moved[s * p..(s + 1) * p];
            let row = net.row(s, i);
            let base = (s * n + i) * n;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = euclidean(x, state.positions.get(s, j));
                let v = dyad_log_likelihood(row[j] == 1, beta0 - d);
                new_dist[s * n + j] = d;
                new_ll[s * n + j] = v;
                delta += v - cache.ll[base + j];
            }
        }
        let trans = &state.trans;
        let ln_ratio = |a: f64, b: f64| a.ln() - b.ln();
        delta += if t == 0 {
            ln_ratio(trans.pi0[new], trans.pi0[old])
        } else {
            let prev = state.labels.get(t - 1, i);
            ln_ratio(trans.prob(t, prev, new), trans.prob(t, prev, old))
        };
        for s in t + 1..end {
            delta += ln_ratio(trans.prob(s, new, new), trans.prob(s, old, old));
        }
        if end < n_times {
            let next = state.labels.get(end, i);
            delta += ln_ratio(trans.prob(end, new, next), trans.prob(end, old, next));
        }
        tally.proposed += 1;
        if open_uniform(rng).ln() < delta {
            tally.accepted += 1;
            for s in t..n_times {
                state.positions.get_mut(s, i).copy_from_slice(&moved[s * p..(s + 1) * p]);
                if s < end {
                    state.labels.set(s, i, new);
                }
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let (d, v) = (new_dist[s * n + j], new_ll[s * n + j]);
                    cache.dist[(s * n + i) * n + j] = d;
                    cache.ll[(s * n + i) * n + j] = v;
                    cache.dist[(s * n + j) * n + i] = d;
                    cache.ll[(s * n + j) * n + i] = v;
                }
            }
        }
    }
    tally
}

/// Random-walk proposal for the blending coefficient that rebuilds every
/// trajectory with its emission residuals held fixed. The map has unit
/// Jacobian and leaves the emission densities unchanged, so the acceptance
/// ratio is the network likelihood ratio times the prior ratio.
fn lambda_shift_step(state: &mut ModelState, net: &DynamicNetwork, cache: &mut LikelihoodCache, step: f64, rng: &mut Rng) -> Tally {
    let (n, n_times, p) = (state.n_actors(), state.n_times(), state.dim());
    let current = state.groups.lambda;
    let proposal = current + step * standard_normal(rng);
    let mut tally = Tally { accepted: 0, proposed: 1 };
    if !(proposal > 0.0 && proposal < 1.0) {
        return tally;
    }
    let mut shifted = state.positions.clone();
    for i in 0..n {
        for t in 1..n_times {
            let mu = state.groups.center(state.labels.get(t, i));
            for d in 0..p {
                let prev = state.positions.get(t - 1, i)[d];
                let residual = state.positions.get(t, i)[d] - current * mu[d] - (1.0 - current) * prev;
                let moved_prev = shifted.get(t - 1, i)[d];
                shifted.get_mut(t, i)[d] = proposal * mu[d] + (1.0 - proposal) * moved_prev + residual;
            }
        }
    }
    let beta0 = state.groups.beta0;
    let mut new_dist = cache.dist.clone();
    let mut new_ll = cache.ll.clone();
    let mut delta = 0.0;
    for t in 1..n_times {
        for i in 1..n {
            let row = net.row(t, i);
            for j in 0..i {
                let d = euclidean(shifted.get(t, i), shifted.get(t, j));
                let v = dyad_log_likelihood(row[j] == 1, beta0 - d);
                let (a, b) = ((t * n + i) * n + j, (t * n + j) * n + i);
                delta += v - cache.ll[a];
                (new_dist[a], new_dist[b], new_ll[a], new_ll[b]) = (d, d, v, v);
            }
        }
    }
    let (m, v) = (state.hyper.mu_lambda, state.hyper.sigma2_lambda);
    delta += normal_ln_pdf(proposal, m, v) - normal_ln_pdf(current, m, v);
    if open_uniform(rng).ln() < delta {
        tally.accepted = 1;
        state.groups.lambda = proposal;
        state.positions = shifted;
        cache.dist = new_dist;
        cache.ll = new_ll;
    }
    tally
}

/// Random-walk proposals for each group center that carry along every
/// trajectory through the group. Positions move by the displacement the
/// emissions propagate, `D_t = c_t delta + (1 - lambda) D_{t-1}` with `c_t`
/// equal to 1 at the first time, `lambda` later and 0 outside the group, so
/// every residual is kept and the acceptance ratio is the network
/// likelihood ratio times the prior ratio of the center.
fn mu_shift_sweep(state: &mut ModelState, net: &DynamicNetwork, cache: &mut LikelihoodCache, step: f64, rng: &mut Rng) -> Tally {
    let (n, n_times, p, l) = (state.n_actors(), state.n_times(), state.dim(), state.n_groups());
    let (beta0, lam) = (state.groups.beta0, state.groups.lambda);
    let mut tally = Tally::default();
    let mut delta_mu = vec![0.0; p];
    let mut shift = vec![0.0; n_times * n * p];
    let mut moved = vec![false; n_times * n];
    let mut changes: Vec<(usize, usize, usize, f64, f64)> = Vec::new();
    let (mut xi, mut xj) = (vec![0.0; p], vec![0.0; p]);
    for g in 0..l {
        for d in delta_mu.iter_mut() {
            *d = step * standard_normal(rng);
        }
        for i in 0..n {
            let mut active = false;
            for t in 0..n_times {
                let in_group = state.labels.get(t, i) == g;
                active |= in_group;
                let k = t * n + i;
                moved[k] = active;
                if active {
                    let gain = match (in_group, t) {
                        (false, _) => 0.0,
                        (true, 0) => 1.0,
                        (true, _) => lam,
                    };
                    let carried = t > 0 && moved[k - n];
                    for d in 0..p {
                        let prev = if carried { shift[(k - n) * p + d] } else { 0.0 };
                        shift[k * p + d] = gain * delta_mu[d] + (1.0 - lam) * prev;
                    }
                }
            }
        }
        changes.clear();
        let mut delta = 0.0;
        for t in 0..n_times {
            for i in 0..n {
                if !moved[t * n + i] {
                    continue;
                }
                let row = net.row(t, i);
                for (d, x) in xi.iter_mut().enumerate() {
                    *x = state.positions.get(t, i)[d] + shift[(t * n + i) * p + d];
                }
                for j in 0..n {
                    let j_moved = moved[t * n + j];
                    // Pairs of moved actors are visited once, from the larger index.
                    if j == i || (j_moved && j > i) {
                        continue;
                    }
                    for (d, x) in xj.iter_mut().enumerate() {
                        *x = state.positions.get(t, j)[d] + if j_moved { shift[(t * n + j) * p + d] } else { 0.0 };
                    }
                    let dist = euclidean(&xi, &xj);
                    let v = dyad_log_likelihood(row[j] == 1, beta0 - dist);
                    delta += v - cache.ll[(t * n + i) * n + j];
                    changes.push((t, i, j, dist, v));
                }
            }
        }
        let (mu0, tau2) = (&state.hyper.mu0, state.hyper.tau2);
        for (d, (&m, &step_d)) in state.groups.center(g).iter().zip(&delta_mu).enumerate() {
            delta += normal_ln_pdf(m + step_d, mu0[d], tau2) - normal_ln_pdf(m, mu0[d], tau2);
        }
        tally.proposed += 1;
        if open_uniform(rng).ln() < delta {
            tally.accepted += 1;
            for (c, step_d) in state.groups.center_mut(g).iter_mut().zip(&delta_mu) {
                *c += step_d;
            }
            for t in 0..n_times {
                for i in 0..n {
                    if moved[t * n + i] {
                        for (d, x) in state.positions.get_mut(t, i).iter_mut().enumerate() {
                            *x += shift[(t * n + i) * p + d];
                        }
                    }
                }
            }
            for &(t, i, j, dist, v) in &changes {
                for (a, b) in [(i, j), (j, i)] {
                    cache.dist[(t * n + a) * n + b] = dist;
                    cache.ll[(t * n + a) * n + b] = v;
                }
            }
        }
    }
    tally
}

fn intercept_step(
    state: &mut ModelState,
    net: &DynamicNetwork,
    cache: &mut LikelihoodCache,
    prior_mean: f64,
    prior_var: f64,
    step: f64,
    rng: &mut Rng,
) -> bool {
    let n = cache.n;
    let current = state.groups.beta0;
    let proposal = current + step * standard_normal(rng);
    let mut proposed_ll = cache.ll.clone();
    let mut new_total = 0.0;
    for t in 0..net.n_times() {
        for i in 1..n {
            let row = net.row(t, i);
            for j in 0..i {
                let v = dyad_log_likelihood(row[j] == 1, proposal - cache.dist[(t * n + i) * n + j]);
                proposed_ll[(t * n + i) * n + j] = v;
                proposed_ll[(t * n + j) * n + i] = v;
                new_total += v;
            }
        }
    }
    let delta = new_total - cache.total() + normal_ln_pdf(proposal, prior_mean, prior_var)
        - normal_ln_pdf(current, prior_mean, prior_var);
    let accept = open_uniform(rng).ln() < delta;
    if accept {
        state.groups.beta0 = proposal;
        cache.ll = proposed_ll;
    }
    accept
}

/// One Metropolis pass over every `(time, actor)` position. Returns the
/// acceptance indicators in time-major order.
pub fn mh_update_positions(state: &mut ModelState, net: &DynamicNetwork, step_x: f64, rng: &mut Rng) -> Result<Vec<bool>> {
    check_network(state, net)?;
    let mut cache = LikelihoodCache::build(net, &state.positions, state.groups.beta0);
    let mut accepted = Vec::with_capacity(state.n_actors() * state.n_times());
    position_sweep(state, net, &mut cache, PositionPrior::Model, step_x, rng, |_, _, a| accepted.push(a));
    Ok(accepted)
}

/// One joint relabel-and-move proposal per actor.
pub fn relocation_update(state: &mut ModelState, net: &DynamicNetwork, rng: &mut Rng) -> Result<Tally> {
    check_network(state, net)?;
    let mut cache = LikelihoodCache::build(net, &state.positions, state.groups.beta0);
    Ok(relocation_sweep(state, net, &mut cache, rng))
}

/// One residual-preserving shift proposal for the blending coefficient.
pub fn lambda_shift_update(state: &mut ModelState, net: &DynamicNetwork, step: f64, rng: &mut Rng) -> Result<bool> {
    check_network(state, net)?;
    let mut cache = LikelihoodCache::build(net, &state.positions, state.groups.beta0);
    Ok(lambda_shift_step(state, net, &mut cache, step, rng).accepted == 1)
}

/// One residual-preserving shift proposal per group center.
pub fn mu_shift_update(state: &mut ModelState, net: &DynamicNetwork, step: f64, rng: &mut Rng) -> Result<Tally> {
    check_network(state, net)?;
    let mut cache = LikelihoodCache::build(net, &state.positions, state.groups.beta0);
    Ok(mu_shift_sweep(state, net, &mut cache, step, rng))
}

/// One random-walk Metropolis step on the intercept.
pub fn mh_update_intercept(state: &mut ModelState, net: &DynamicNetwork, step_beta0: f64, rng: &mut Rng) -> Result<bool> {
    check_network(state, net)?;
    let mut cache = LikelihoodCache::build(net, &state.positions, state.groups.beta0);
    let (m, v) = (state.hyper.mu_beta0, state.hyper.sigma2_beta0);
    Ok(intercept_step(state, net, &mut cache, m, v, step_beta0, rng))
}

fn check_network(state: &ModelState, net: &DynamicNetwork) -> Result<()> {
    if net.n_actors() != state.n_actors() || net.n_times() != state.n_times() {
        return Err(Error::Dimension("network and state sizes differ".into()));
    }
    Ok(())
}

/// Conjugate normal update of every group center.
pub fn sample_group_means(state: &mut ModelState, counts: &TransitionCounts, rng: &mut Rng) {
    let (n, n_times, p, l) = (state.n_actors(), state.n_times(), state.dim(), state.n_groups());
    let lam = state.groups.lambda;
    let mut sum_first = vec![0.0; l * p];
    let mut sum_rest = vec![0.0; l * p];
    for t in 0..n_times {
        for i in 0..n {
            let g = state.labels.get(t, i);
            let x = state.positions.get(t, i);
            if t == 0 {
                for d in 0..p {
                    sum_first[g * p + d] += x[d];
                }
            } else {
                let prev = state.positions.get(t - 1, i);
                for d in 0..p {
                    sum_rest[g * p + d] += x[d] - (1.0 - lam) * prev[d];
                }
            }
        }
    }
    let hyper = &state.hyper;
    for g in 0..l {
        let s2 = state.groups.sigma2[g];
        let later: usize = (1..n_times).map(|t| counts.occupancy(t, g)).sum();
        let first = counts.occupancy(0, g) as f64;
        let var = 1.0 / ((first + lam * lam * later as f64) / s2 + 1.0 / hyper.tau2);
        let sd = var.sqrt();
        for d in 0..p {
            let mean = var * (sum_first[g * p + d] / s2 + lam / s2 * sum_rest[g * p + d] + hyper.mu0[d] / hyper.tau2);
            state.groups.center_mut(g)[d] = mean + sd * standard_normal(rng);
        }
    }
}

/// Conjugate inverse-gamma update of every group variance.
pub fn sample_group_variances(state: &mut ModelState, counts: &TransitionCounts, rng: &mut Rng) {
    let (n, n_times, p, l) = (state.n_actors(), state.n_times(), state.dim(), state.n_groups());
    let lam = state.groups.lambda;
    let mut ss = vec![0.0; l];
    for t in 0..n_times {
        for i in 0..n {
            let g = state.labels.get(t, i);
            let x = state.positions.get(t, i);
            let mu = state.groups.center(g);
            ss[g] += if t == 0 {
                x.iter().zip(mu).map(|(a, m)| (a - m) * (a - m)).sum::<f64>()
            } else {
                let prev = state.positions.get(t - 1, i);
                (0..p)
                    .map(|d| {
                        let r = x[d] - lam * mu[d] - (1.0 - lam) * prev[d];
                        r * r
                    })
                    .sum::<f64>()
            };
        }
    }
    let (a, b) = (state.hyper.a, state.hyper.b);
    for g in 0..l {
        let shape = (counts.total_occupancy(g) * p) as f64 + a;
        state.groups.sigma2[g] = inv_gamma(rng, shape / 2.0, (b + ss[g]) / 2.0);
    }
}

/// Parameters `(mean, variance)` of the truncated-normal conditional of the
/// blending coefficient.
pub fn lambda_conditional(state: &ModelState) -> (f64, f64) {
    let (n, n_times) = (state.n_actors(), state.n_times());
    let mut cross = 0.0;
    let mut quad = 0.0;
    for t in 1..n_times {
        for i in 0..n {
            let g = state.labels.get(t, i);
            let s2 = state.groups.sigma2[g];
            let (x, prev, mu) = (state.positions.get(t, i), state.positions.get(t - 1, i), state.groups.center(g));
            for d in 0..x.len() {
                let u = mu[d] - prev[d];
                cross += (x[d] - prev[d]) * u / s2;
                quad += u * u / s2;
            }
        }
    }
    let (m, v) = (state.hyper.mu_lambda, state.hyper.sigma2_lambda);
    ((m + v * cross) / (1.0 + v * quad), 1.0 / (1.0 / v + quad))
}

/// Truncated-normal update of the blending coefficient on `(0, 1)`.
pub fn sample_lambda(state: &mut ModelState, rng: &mut Rng) -> Result<()> {
    let (mean, var) = lambda_conditional(state);
    state.groups.lambda = truncated_normal(rng, mean, var, 0.0, 1.0)?;
    Ok(())
}

/// The CRF auxiliary variables followed by `beta`, `pi0` and the
/// transition rows. Returns the counts and auxiliary counts used.
pub fn update_transitions(state: &mut ModelState, rng: &mut Rng) -> Result<(TransitionCounts, crate::hdp::AuxCounts)> {
    let counts = compute_transition_counts(&state.labels, state.n_groups())?;
    let h = &state.hyper;
    let mut aux = sample_aux_tables(&counts, &state.trans.beta, h.alpha0, h.alpha, h.kappa, rng);
    sample_overrides(&mut aux, &state.trans.beta, h.rho(), rng);
    let beta = sample_beta(&aux, h.gamma, rng);
    let pi0 = sample_initial_distribution(&counts, &beta, h.alpha0, rng);
    let rows = sample_transition_rows(&counts, &beta, h.alpha, h.kappa, rng);
    state.trans.beta = beta;
    state.trans.pi0 = pi0;
    state.trans.set_matrices(rows)?;
    Ok((counts, aux))
}

/// Multiplies a step by 1.1 above the band and by 0.9 below it.
pub fn tune_step(step: f64, acceptance: f64, low: f64, high: f64) -> f64 {
    if acceptance > high {
        step * 1.1
    } else if acceptance < low {
        step * 0.9
    } else {
        step
    }
}

/// Applies [`tune_step`] to every random-walk block given its window
/// acceptance rate. Blocks without proposals keep their step.
pub fn tune_step_sizes(window: BlockTallies, steps: StepSizes, low: f64, high: f64) -> StepSizes {
    let tune = |tally: Tally, step: f64| tally.rate().map_or(step, |r| tune_step(step, r, low, high));
    StepSizes {
        x: tune(window.positions, steps.x),
        beta0: tune(window.intercept, steps.beta0),
        lambda: tune(window.lambda_shifts, steps.lambda),
        mu: tune(window.mu_shifts, steps.mu),
    }
}

/// Holds the likelihood cache between sweeps.
#[derive(Debug, Clone)]
pub struct Sweeper {
    cache: LikelihoodCache,
    relocate: bool,
    shift: bool,
}

impl Sweeper {
    pub fn new(net: &DynamicNetwork, state: &ModelState) -> Result<Self> {
        check_network(state, net)?;
        Ok(Self { cache: LikelihoodCache::build(net, &state.positions, state.groups.beta0), relocate: true, shift: true })
    }

    /// Enables or disables the joint relabel-and-move proposals.
    pub fn with_relocation(mut self, on: bool) -> Self {
        self.relocate = on;
        self
    }

    /// Enables or disables the residual-preserving shifts.
    pub fn with_shifts(mut self, on: bool) -> Self {
        self.shift = on;
        self
    }

    /// Network log-likelihood of the current state.
    pub fn log_likelihood(&self) -> f64 {
        self.cache.total()
    }

    /// One full sweep. The state must be the one the sweeper was built or
    /// last swept with, and `net` the same network.
    pub fn sweep(
        &mut self,
        state: &mut ModelState,
        net: &DynamicNetwork,
        steps: StepSizes,
        toggles: HyperToggles,
        rng: &mut Rng,
    ) -> Result<BlockTallies> {
        self.sweep_inner(state, net, steps, toggles, true, rng)
    }

    fn sweep_inner(
        &mut self,
        state: &mut ModelState,
        net: &DynamicNetwork,
        steps: StepSizes,
        toggles: HyperToggles,
        update_lambda: bool,
        rng: &mut Rng,
    ) -> Result<BlockTallies> {
        let positions = position_sweep(state, net, &mut self.cache, PositionPrior::Model, steps.x, rng, |_, _, _| {});
        let relocations = if self.relocate { relocation_sweep(state, net, &mut self.cache, rng) } else { Tally::default() };
        let lambda_shifts = if self.shift && update_lambda {
            lambda_shift_step(state, net, &mut self.cache, steps.lambda, rng)
        } else {
            Tally::default()
        };
        let mu_shifts = if self.shift { mu_shift_sweep(state, net, &mut self.cache, steps.mu, rng) } else { Tally::default() };
        let (m, v) = (state.hyper.mu_beta0, state.hyper.sigma2_beta0);
        let accepted = intercept_step(state, net, &mut self.cache, m, v, steps.beta0, rng);
        sample_all_labels(state, rng)?;
        let (counts, aux) = update_transitions(state, rng)?;
        sample_group_means(state, &counts, rng);
        sample_group_variances(state, &counts, rng);
        if update_lambda {
            sample_lambda(state, rng)?;
        }
        if toggles.any() {
            state.hyper = sample_hyperparams(state, &counts, &aux, toggles, rng)?;
        }
        let intercept = Tally { accepted: u64::from(accepted), proposed: 1 };
        Ok(BlockTallies { positions, intercept, relocations, lambda_shifts, mu_shifts })
    }
}

/// Convenience wrapper running one sweep with a freshly built cache.
pub fn sweep(
    state: &mut ModelState,
    net: &DynamicNetwork,
    steps: StepSizes,
    toggles: HyperToggles,
    rng: &mut Rng,
) -> Result<BlockTallies> {
    Sweeper::new(net, state)?.sweep(state, net, steps, toggles, rng)
}

/// Intercept solving `sum logistic(beta0 - d) = #edges` by bisection.
fn matching_intercept(net: &DynamicNetwork, positions: &LatentPositions) -> f64 {
    let (n, n_times) = (net.n_actors(), net.n_times());
    let mut dists = Vec::new();
    let mut edges = 0usize;
    for t in 0..n_times {
        for i in 1..n {
            for j in 0..i {
                dists.push(positions.distance(t, i, j));
                edges += usize::from(net.edge(t, i, j));
            }
        }
    }
    if dists.is_empty() {
        return 0.0;
    }
    let target = edges as f64;
    let (mut lo, mut hi) = (-20.0, 20.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let expected: f64 = dists.iter().map(|d| crate::dist::logistic(mid - d)).sum();
        if expected < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Per-time classical scaling of hop distances, aligned to the previous
/// time by orthogonal Procrustes.
pub fn mds_positions(net: &DynamicNetwork, dim: usize) -> Result<LatentPositions> {
    let (n, n_times) = (net.n_actors(), net.n_times());
    let mut data = Vec::with_capacity(n * n_times * dim);
    let mut previous: Option<Vec<f64>> = None;
    for t in 0..n_times {
        let d = shortest_path_dissimilarities(net, t);
        let mut y = classical_mds(&d, n, dim)?;
        center_in_place(&mut y, dim);
        if let Some(prev) = &previous {
            if let Some(q) = procrustes_rotation(&y, prev, dim) {
                apply_rotation(&mut y, &q, dim);
            }
        }
        data.extend_from_slice(&y);
        previous = Some(y);
    }
    LatentPositions::from_vec(n_times, n, dim, data)
}

/// Builds the starting state: scaled hop distances refined by a short
/// cluster-free Metropolis run (best visited state kept), k-means on the
/// stacked trajectories for labels and group parameters, and prior draws
/// for the transition structure.
pub fn initialize_state(net: &DynamicNetwork, config: &SamplerConfig, rng: &mut Rng) -> Result<ModelState> {
    config.validate()?;
    net.validate()?;
    let (n, n_times, p, l) = (net.n_actors(), net.n_times(), config.dim, config.n_groups);
    if n == 0 || n_times == 0 {
        return Err(Error::Empty("network has no actors or no time points".into()));
    }
    let mut hyper = Hyperparams::with_defaults(n, p);
    let positions = mds_positions(net, p)?;
    let beta0 = matching_intercept(net, &positions);

    // Cluster-free warm start.
    let groups = GroupParams::new(p, vec![0.0; l * p], vec![1.0; l], 0.9, beta0)?;
    let mut state = ModelState {
        positions,
        labels: LabelSequences::constant(n_times, n, 0),
        trans: TransitionStructure::uniform(l, n_times),
        groups,
        hyper: hyper.clone(),
    };
    let (first_var, step_var) = (hyper.tau2, hyper.tau2 / 10.0);
    let prior = PositionPrior::RandomWalk { first: first_var, step: step_var };
    let mut cache = LikelihoodCache::build(net, &state.positions, beta0);
    let objective = |state: &ModelState, cache: &LikelihoodCache| -> f64 {
        let mut total = cache.total();
        for t in 0..n_times {
            for i in 0..n {
                let x = state.positions.get(t, i);
                total += match t {
                    0 => x.iter().map(|&v| normal_ln_pdf(v, 0.0, first_var)).sum::<f64>(),
                    _ => x.iter().zip(state.positions.get(t - 1, i)).map(|(&v, &q)| normal_ln_pdf(v, q, step_var)).sum(),
                };
            }
        }
        total
    };
    let mut best = (objective(&state, &cache), state.positions.clone(), state.groups.beta0);
    let mut steps = StepSizes::initial(config);
    let mut window = BlockTallies::default();
    for sweep in 0..config.n_init_sweeps {
        let pos = position_sweep(&mut state, net, &mut cache, prior, steps.x, rng, |_, _, _| {});
        let acc = intercept_step(&mut state, net, &mut cache, beta0, 100.0, steps.beta0, rng);
        window.add(BlockTallies { positions: pos, intercept: Tally { accepted: u64::from(acc), proposed: 1 }, ..Default::default() });
        if (sweep + 1) % config.tune_window == 0 {
            steps = tune_step_sizes(window, steps, config.target_accept_low, config.target_accept_high);
            window = BlockTallies::default();
        }
        let value = objective(&state, &cache);
        if value > best.0 {
            best = (value, state.positions.clone(), state.groups.beta0);
        }
    }
    let (_, positions, beta0) = best;

    // Clustering of stacked trajectories.
    let mut stacked = Vec::with_capacity(n * n_times * p);
    for i in 0..n {
        stacked.extend(positions.trajectory(i));
    }
    let (assign, _) = kmeans(&stacked, n_times * p, l.min(n), 100, rng)?;
    let mut mu = vec![0.0; l * p];
    let mut sigma2 = vec![0.0; l];
    let mut sizes = vec![0usize; l];
    for i in 0..n {
        let g = assign[i];
        sizes[g] += n_times;
        for t in 0..n_times {
            for d in 0..p {
                mu[g * p + d] += positions.get(t, i)[d];
            }
        }
    }
    let overall = crate::linalg::centroid(positions.as_slice(), p);
    for g in 0..l {
        for d in 0..p {
            mu[g * p + d] = if sizes[g] > 0 { mu[g * p + d] / sizes[g] as f64 } else { overall[d] };
        }
    }
    let mut overall_ss = 0.0;
    for i in 0..n {
        let g = assign[i];
        for t in 0..n_times {
            let x = positions.get(t, i);
            for d in 0..p {
                sigma2[g] += (x[d] - mu[g * p + d]).powi(2);
                overall_ss += (x[d] - overall[d]).powi(2);
            }
        }
    }
    let overall_var = (overall_ss / (n * n_times * p) as f64).max(1e-3);
    for g in 0..l {
        sigma2[g] = if sizes[g] > 0 { (sigma2[g] / (sizes[g] * p) as f64).max(1e-3) } else { overall_var };
    }
    let labels = LabelSequences::from_vec(n_times, n, (0..n_times).flat_map(|_| assign.iter().copied()).collect())?;

    hyper.mu_beta0 = beta0;
    hyper.sigma2_beta0 = 2.0;
    hyper.mu_lambda = 0.9;
    hyper.sigma2_lambda = 0.01;
    let lf = l as f64;
    let beta = dirichlet(rng, &vec![hyper.gamma / lf; l]);
    let pi0 = dirichlet(rng, &beta.iter().map(|b| hyper.alpha0 * b).collect::<Vec<_>>());
    let mut rows = Vec::with_capacity(n_times.saturating_sub(1) * l * l);
    for _ in 1..n_times {
        for k in 0..l {
            let conc: Vec<f64> =
                (0..l).map(|j| hyper.alpha * beta[j] + if j == k { hyper.kappa } else { 0.0 }).collect();
            rows.extend(dirichlet(rng, &conc));
        }
    }
    let state = ModelState {
        positions,
        labels,
        trans: TransitionStructure::new(l, n_times, beta, pi0, rows)?,
        groups: GroupParams::new(p, mu, sigma2, 0.9, beta0)?,
        hyper,
    };
    state.validate()?;
    Ok(state)
}

/// Everything needed to continue an unfinished chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: SamplerConfig,
    pub state: ModelState,
    pub rng: RngCheckpoint,
    pub sweeps_done: usize,
    pub steps: StepSizes,
    pub window: BlockTallies,
    pub accept: AcceptStats,
    pub samples: Vec<Sample>,
}

/// A resumable chain.
#[derive(Debug, Clone)]
pub struct ChainRunner {
    config: SamplerConfig,
    state: ModelState,
    rng: Rng,
    sweeper: Sweeper,
    sweeps_done: usize,
    steps: StepSizes,
    window: BlockTallies,
    accept: AcceptStats,
    samples: Vec<Sample>,
    n_actors: usize,
    n_times: usize,
}

impl ChainRunner {
    /// Validates the configuration and initializes the state from the
    /// configured seed.
    pub fn new(net: &DynamicNetwork, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = crate::rng_from_seed(config.seed);
        let state = initialize_state(net, &config, &mut rng)?;
        Self::assemble(net, config, state, rng)
    }

    /// Starts from a caller-supplied state instead of the default
    /// initialization.
    pub fn with_state(net: &DynamicNetwork, config: SamplerConfig, state: ModelState) -> Result<Self> {
        config.validate()?;
        state.validate()?;
        let rng = crate::rng_from_seed(config.seed);
        Self::assemble(net, config, state, rng)
    }

    fn assemble(net: &DynamicNetwork, config: SamplerConfig, state: ModelState, rng: Rng) -> Result<Self> {
        if state.n_groups() != config.n_groups || state.dim() != config.dim {
            return Err(Error::Dimension("state does not match the configured L and p".into()));
        }
        let sweeper = Sweeper::new(net, &state)?.with_relocation(config.relocation_moves).with_shifts(config.shift_moves);
        let lp = log_posterior_parts_given_likelihood(&state, sweeper.log_likelihood(), config.toggles)?.total();
        if !lp.is_finite() {
            return Err(Error::Numerical("non-finite log posterior after initialization".into()));
        }
        let steps = StepSizes::initial(&config);
        Ok(Self {
            n_actors: net.n_actors(),
            n_times: net.n_times(),
            samples: Vec::with_capacity(config.n_samples()),
            config,
            state,
            rng,
            sweeper,
            sweeps_done: 0,
            steps,
            window: BlockTallies::default(),
            accept: AcceptStats::default(),
        })
    }

    pub fn resume(net: &DynamicNetwork, checkpoint: Checkpoint) -> Result<Self> {
        checkpoint.config.validate()?;
        checkpoint.state.validate()?;
        let sweeper = Sweeper::new(net, &checkpoint.state)?
            .with_relocation(checkpoint.config.relocation_moves)
            .with_shifts(checkpoint.config.shift_moves);
        Ok(Self {
            n_actors: net.n_actors(),
            n_times: net.n_times(),
            rng: checkpoint.rng.restore()?,
            config: checkpoint.config,
            state: checkpoint.state,
            sweeper,
            sweeps_done: checkpoint.sweeps_done,
            steps: checkpoint.steps,
            window: checkpoint.window,
            accept: checkpoint.accept,
            samples: checkpoint.samples,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            state: self.state.clone(),
            rng: RngCheckpoint::capture(&self.rng),
            sweeps_done: self.sweeps_done,
            steps: self.steps,
            window: self.window,
            accept: self.accept,
            samples: self.samples.clone(),
        }
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }
    pub fn state(&self) -> &ModelState {
        &self.state
    }
    pub fn steps(&self) -> StepSizes {
        self.steps
    }
    pub fn sweeps_done(&self) -> usize {
        self.sweeps_done
    }
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }
    pub fn is_done(&self) -> bool {
        self.sweeps_done >= self.config.total_sweeps()
    }

    pub fn phase(&self) -> Phase {
        if self.sweeps_done < self.config.n_tune {
            Phase::Tune
        } else if self.sweeps_done < self.config.n_tune + self.config.n_burn {
            Phase::Burn
        } else {
            Phase::Keep
        }
    }

    /// Runs one sweep with tuning and recording. No-op once done.
    pub fn step(&mut self, net: &DynamicNetwork) -> Result<()> {
        if self.is_done() {
            return Ok(());
        }
        let phase = self.phase();
        let update_lambda = self.sweeps_done >= self.config.lambda_warmup.min(self.config.n_tune);
        let tallies =
            self.sweeper.sweep_inner(&mut self.state, net, self.steps, self.config.toggles, update_lambda, &mut self.rng)?;
        let c = &self.config;
        match phase {
            Phase::Tune => {
                self.accept.tune.add(tallies);
                self.window.add(tallies);
                if (self.sweeps_done + 1) % c.tune_window == 0 {
                    self.steps = tune_step_sizes(self.window, self.steps, c.target_accept_low, c.target_accept_high);
                    self.window = BlockTallies::default();
                }
            }
            Phase::Burn => self.accept.burn.add(tallies),
            Phase::Keep => {
                self.accept.keep.add(tallies);
                let kept = self.sweeps_done - c.n_tune - c.n_burn;
                if (kept + 1) % c.thin == 0 {
                    self.record()?;
                }
            }
        }
        self.sweeps_done += 1;
        Ok(())
    }

    fn record(&mut self) -> Result<()> {
        let ll = self.sweeper.log_likelihood();
        let lp = log_posterior_parts_given_likelihood(&self.state, ll, self.config.toggles)?.total();
        if !lp.is_finite() {
            return Err(Error::Numerical(format!("non-finite log posterior at sweep {}", self.sweeps_done)));
        }
        let full = self.config.storage == StorageMode::Full;
        self.samples.push(Sample {
            sweep: self.sweeps_done,
            log_post: lp,
            log_likelihood: ll,
            groups: self.state.groups.clone(),
            hyper: self.state.hyper.clone(),
            trans: full.then(|| self.state.trans.clone()),
            labels: full.then(|| self.state.labels.clone()),
            positions: full.then(|| self.state.positions.clone()),
        });
        Ok(())
    }

    /// Sweeps until done or until `keep_going` returns false (checked before
    /// every sweep). Returns whether the chain completed.
    pub fn run_while(&mut self, net: &DynamicNetwork, mut keep_going: impl FnMut(&Self) -> bool) -> Result<bool> {
        while !self.is_done() {
            if !keep_going(self) {
                return Ok(false);
            }
            self.step(net)?;
        }
        Ok(true)
    }

    /// The chain so far; flagged as interrupted when sweeps remain.
    pub fn finish(self) -> Chain {
        Chain {
            rng_algorithm: RNG_ALGORITHM.into(),
            seed: self.config.seed,
            n_actors: self.n_actors,
            n_times: self.n_times,
            samples: self.samples,
            accept: self.accept,
            final_steps: self.steps,
            interrupted: self.sweeps_done < self.config.total_sweeps(),
            sweeps_done: self.sweeps_done,
            config: self.config,
        }
    }
}

/// Initializes and runs a full chain.
pub fn run_chain(net: &DynamicNetwork, config: SamplerConfig) -> Result<Chain> {
    let mut runner = ChainRunner::new(net, config)?;
    runner.run_while(net, |_| true)?;
    Ok(runner.finish())
}
