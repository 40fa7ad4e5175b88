//! Synthetic dynamic networks: the two benchmark generators and forward
//! simulation from the full model.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // float methods come from std when a dependency links it
use num_traits::Float;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dist::{dirichlet, inv_gamma, standard_normal, truncated_normal};
use crate::model::{
    edge_logit, edge_probability, euclidean, GroupParams, Hyperparams, LabelSequences, LatentPositions, ModelState,
    TransitionStructure,
};
use crate::network::DynamicNetwork;
use crate::{Error, Result, Rng};

/// The six benchmark group locations in the plane.
pub const BENCHMARK_LOCATIONS: [[f64; 2]; 6] = [[-1.5, 0.0], [1.5, 0.0], [-3.0, 0.0], [3.0, 0.0], [0.0, -2.0], [0.0, 2.0]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub n_actors: usize,
    pub n_times: usize,
    pub dim: usize,
    /// Row-major `G x p`.
    pub group_locations: Vec<f64>,
    /// Inverse-gamma shape of the group spread.
    pub sigma_shape: f64,
    /// Inverse-gamma scale of the group spread.
    pub sigma_scale: f64,
    /// Whether the inverse-gamma draw is the variance (`true`) or the
    /// standard deviation (`false`, the default).
    pub sigma_draw_is_variance: bool,
    pub lambda: f64,
    pub beta0: f64,
    /// Self-transition constant for moves into each time; entry 0 unused.
    pub const_per_time: Vec<f64>,
    /// Zero-based active groups per time.
    pub active_sets: Vec<Vec<usize>>,
    /// Symmetric Dirichlet weight of the initial distribution over the
    /// first active set.
    pub initial_concentration: f64,
    pub seed: u64,
    /// Extra attempts allowed when a draw is degenerate.
    pub max_retries: usize,
}

impl SimSpec {
    fn benchmark_base(n_times: usize, seed: u64) -> Self {
        Self {
            n_actors: 120,
            n_times,
            dim: 2,
            group_locations: BENCHMARK_LOCATIONS.iter().flatten().copied().collect(),
            sigma_shape: 6.0,
            sigma_scale: 0.05,
            sigma_draw_is_variance: false,
            lambda: 0.8,
            beta0: 1.0,
            const_per_time: vec![20.0; n_times],
            active_sets: vec![(0..6).collect(); n_times],
            initial_concentration: 10.0,
            seed,
            max_retries: 10,
        }
    }

    /// Six groups shared by every time point.
    pub fn homogeneous(seed: u64) -> Self {
        Self::benchmark_base(6, seed)
    }

    /// Two groups split into six at the fourth time point and merge into
    /// four at the seventh.
    pub fn inhomogeneous(seed: u64) -> Self {
        let mut spec = Self::benchmark_base(9, seed);
        spec.active_sets = (0..9)
            .map(|t| match t {
                0..=2 => vec![0, 1],
                3..=5 => (0..6).collect(),
                _ => vec![2, 3, 4, 5],
            })
            .collect();
        spec.const_per_time[3] = 1.0;
        spec
    }

    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "homogeneous" => Some(Self::homogeneous(seed)),
            "inhomogeneous" => Some(Self::inhomogeneous(seed)),
            _ => None,
        }
    }

    pub fn n_groups(&self) -> usize {
        self.group_locations.len() / self.dim.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.n_groups();
        if self.n_actors < 2 || self.n_times == 0 || self.dim == 0 {
            return Err(Error::Argument("need n >= 2, T >= 1 and p >= 1".into()));
        }
        if g == 0 || self.group_locations.len() != g * self.dim {
            return Err(Error::Dimension("group locations must be G x p".into()));
        }
        if self.active_sets.len() != self.n_times || self.const_per_time.len() != self.n_times {
            return Err(Error::Dimension("one active set and one constant per time point".into()));
        }
        for (t, set) in self.active_sets.iter().enumerate() {
            if set.is_empty() || set.iter().any(|&k| k >= g) {
                return Err(Error::Argument(format!("active set at time {t} is empty or out of range")));
            }
        }
        for a in 0..g {
            for b in 0..a {
                if euclidean(self.location(a), self.location(b)) == 0.0 {
                    return Err(Error::Degenerate(format!("groups {a} and {b} share a location")));
                }
            }
        }
        if !(self.sigma_shape > 0.0 && self.sigma_scale > 0.0 && self.initial_concentration > 0.0) {
            return Err(Error::Parameter("spread and Dirichlet parameters must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) || self.const_per_time.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Parameter("lambda must lie in [0, 1] and constants must be positive".into()));
        }
        Ok(())
    }

    fn location(&self, g: usize) -> &[f64] {
        &self.group_locations[g * self.dim..(g + 1) * self.dim]
    }
}

/// Transition probabilities out of group `g` into the groups `active`,
/// proportional to inverse distance with a boosted self-weight.
pub fn transition_row_from_locations(g: usize, locations: &[f64], dim: usize, constant: f64, active: &[usize]) -> Result<Vec<f64>> {
    let n_groups = locations.len() / dim;
    if active.is_empty() {
        return Err(Error::Argument("no active target group".into()));
    }
    if g >= n_groups || active.iter().any(|&k| k >= n_groups) {
        return Err(Error::Label { label: g.max(*active.iter().max().unwrap_or(&0)), n_groups });
    }
    let loc = |k: usize| &locations[k * dim..(k + 1) * dim];
    let mut weights = vec![0.0; n_groups];
    let mut max_inv: f64 = 0.0;
    for &k in active {
        if k == g {
            continue;
        }
        let d = euclidean(loc(k), loc(g));
        if d == 0.0 {
            return Err(Error::Degenerate(format!("groups {g} and {k} share a location")));
        }
        weights[k] = 1.0 / d;
        max_inv = max_inv.max(1.0 / d);
    }
    if active.contains(&g) {
        // With no other active group the row is a point mass at g.
        weights[g] = if max_inv > 0.0 { constant * max_inv } else { 1.0 };
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(weights)
}

/// A simulated network with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub network: DynamicNetwork,
    pub positions: LatentPositions,
    pub labels: LabelSequences,
    /// Group standard deviations.
    pub sigma: Vec<f64>,
    pub pi0: Vec<f64>,
    /// `(T - 1) x G x G` transition matrices.
    pub transitions: Vec<f64>,
    /// Attempts used, counting the successful one.
    pub attempts: usize,
}

fn draw_once(spec: &SimSpec, rng: &mut Rng) -> Result<SimOutput> {
    let (n, n_times, p, g) = (spec.n_actors, spec.n_times, spec.dim, spec.n_groups());
    let sigma: Vec<f64> = (0..g)
        .map(|_| {
            let v = inv_gamma(rng, spec.sigma_shape, spec.sigma_scale);
            if spec.sigma_draw_is_variance {
                v.sqrt()
            } else {
                v
            }
        })
        .collect();
    let first = &spec.active_sets[0];
    let weights = dirichlet(rng, &vec![spec.initial_concentration; first.len()]);
    let mut pi0 = vec![0.0; g];
    for (&k, w) in first.iter().zip(weights) {
        pi0[k] = w;
    }
    let mut transitions = Vec::with_capacity(n_times.saturating_sub(1) * g * g);
    for t in 1..n_times {
        for from in 0..g {
            if spec.active_sets[t - 1].contains(&from) {
                let row = transition_row_from_locations(from, &spec.group_locations, p, spec.const_per_time[t], &spec.active_sets[t])?;
                transitions.extend(row);
            } else {
                // Unreachable origin; keep a valid simplex.
                transitions.extend((0..g).map(|k| if k == from { 1.0 } else { 0.0 }));
            }
        }
    }
    let mut labels = vec![0usize; n_times * n];
    let mut x = vec![0.0; n_times * n * p];
    for t in 0..n_times {
        for i in 0..n {
            let probs: &[f64] = if t == 0 {
                &pi0
            } else {
                let from = labels[(t - 1) * n + i];
                &transitions[((t - 1) * g + from) * g..((t - 1) * g + from + 1) * g]
            };
            let k = categorical(rng, probs);
            labels[t * n + i] = k;
            for d in 0..p {
                let mu = spec.group_locations[k * p + d];
                let mean = if t == 0 { mu } else { spec.lambda * mu + (1.0 - spec.lambda) * x[((t - 1) * n + i) * p + d] };
                x[(t * n + i) * p + d] = mean + sigma[k] * standard_normal(rng);
            }
        }
    }
    let positions = LatentPositions::from_vec(n_times, n, p, x)?;
    let network = sample_network(&positions, spec.beta0, rng)?;
    Ok(SimOutput {
        network,
        positions,
        labels: LabelSequences::from_vec(n_times, n, labels)?,
        sigma,
        pi0,
        transitions,
        attempts: 1,
    })
}

fn categorical(rng: &mut Rng, probs: &[f64]) -> usize {
    let mut u = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = k;
            if u < p {
                return k;
            }
            u -= p;
        }
    }
    last
}

/// Draws `Y` given positions and intercept.
pub fn sample_network(positions: &LatentPositions, beta0: f64, rng: &mut Rng) -> Result<DynamicNetwork> {
    let (n, n_times) = (positions.n_actors(), positions.n_times());
    let mut net = DynamicNetwork::empty(n, n_times)?;
    for t in 0..n_times {
        for i in 1..n {
            for j in 0..i {
                let prob = edge_probability(edge_logit(positions.get(t, i), positions.get(t, j), beta0));
                if rng.random::<f64>() < prob {
                    net.set_edge(t, i, j, true)?;
                }
            }
        }
    }
    Ok(net)
}

fn is_degenerate(out: &SimOutput, spec: &SimSpec) -> bool {
    let n = spec.n_actors;
    let all_pairs = n * (n - 1) / 2;
    (0..spec.n_times).any(|t| {
        let e = out.network.n_edges(t);
        e == 0 || e == all_pairs || out.labels.n_occupied(t) != spec.active_sets[t].len()
    })
}

/// Draws from the spec, retrying on a fresh stream when a slice is empty or
/// complete or an active group ends up unoccupied.
pub fn simulate(spec: &SimSpec) -> Result<SimOutput> {
    spec.validate()?;
    let mut last = None;
    for attempt in 0..=spec.max_retries {
        let mut rng = crate::rng_from_seed(spec.seed);
        rng.set_stream(attempt as u64);
        let mut out = draw_once(spec, &mut rng)?;
        out.attempts = attempt + 1;
        if !is_degenerate(&out, spec) {
            return Ok(out);
        }
        last = Some(out);
    }
    // Out of retries: return the final draw as is.
    last.ok_or_else(|| Error::Degenerate("no simulation attempt".into()))
}

/// The time-homogeneous benchmark.
pub fn simulate_homogeneous(seed: u64) -> Result<SimOutput> {
    simulate(&SimSpec::homogeneous(seed))
}

/// The split-and-merge benchmark.
pub fn simulate_inhomogeneous(seed: u64) -> Result<SimOutput> {
    simulate(&SimSpec::inhomogeneous(seed))
}

/// Exact forward draw of the whole model given fixed hyperparameters:
/// transition structure, group parameters, intercept, blending
/// coefficient, labels, positions and finally the network.
pub fn sample_generative(
    hyper: &Hyperparams,
    n_actors: usize,
    n_times: usize,
    n_groups: usize,
    dim: usize,
    rng: &mut Rng,
) -> Result<(ModelState, DynamicNetwork)> {
    hyper.validate()?;
    if hyper.mu0.len() != dim {
        return Err(Error::Dimension("mu0 must have length p".into()));
    }
    let l = n_groups;
    let beta = dirichlet(rng, &vec![hyper.gamma / l as f64; l]);
    let pi0 = dirichlet(rng, &beta.iter().map(|b| hyper.alpha0 * b).collect::<Vec<_>>());
    let mut rows = Vec::with_capacity(n_times.saturating_sub(1) * l * l);
    for _ in 1..n_times {
        for k in 0..l {
            let conc: Vec<f64> = (0..l).map(|j| hyper.alpha * beta[j] + if j == k { hyper.kappa } else { 0.0 }).collect();
            rows.extend(dirichlet(rng, &conc));
        }
    }
    let trans = TransitionStructure::new(l, n_times, beta, pi0, rows)?;
    let sd_tau = hyper.tau2.sqrt();
    let mu: Vec<f64> = (0..l * dim).map(|k| hyper.mu0[k % dim] + sd_tau * standard_normal(rng)).collect();
    let sigma2: Vec<f64> = (0..l).map(|_| inv_gamma(rng, hyper.a / 2.0, hyper.b / 2.0)).collect();
    let beta0 = hyper.mu_beta0 + hyper.sigma2_beta0.sqrt() * standard_normal(rng);
    let lambda = truncated_normal(rng, hyper.mu_lambda, hyper.sigma2_lambda, 0.0, 1.0)?;
    let groups = GroupParams::new(dim, mu, sigma2, lambda, beta0)?;
    let mut labels = LabelSequences::constant(n_times, n_actors, 0);
    let mut positions = LatentPositions::zeros(n_times, n_actors, dim);
    for i in 0..n_actors {
        for t in 0..n_times {
            let probs = if t == 0 { &trans.pi0[..] } else { trans.row(t, labels.get(t - 1, i)) };
            let k = categorical(rng, probs);
            labels.set(t, i, k);
            let sd = groups.sigma2[k].sqrt();
            for d in 0..dim {
                let m = groups.center(k)[d];
                let mean = if t == 0 { m } else { lambda * m + (1.0 - lambda) * positions.get(t - 1, i)[d] };
                positions.get_mut(t, i)[d] = mean + sd * standard_normal(rng);
            }
        }
    }
    let net = sample_network(&positions, beta0, rng)?;
    let state = ModelState { positions, labels, trans, groups, hyper: hyper.clone() };
    Ok((state, net))
}
