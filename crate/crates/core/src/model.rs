//! Model state types and log densities.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // float methods come from std when a dependency links it
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dist::{
    beta_ln_pdf, dirichlet_ln_pdf, gamma_ln_pdf, inv_gamma_ln_pdf, normal_iso_ln_pdf, normal_ln_pdf, softplus,
    truncated_normal_ln_pdf,
};
use crate::network::DynamicNetwork;
use crate::{Error, Result};

/// Latent coordinates `X[t][i]`, each a `dim`-vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPositions {
    n_times: usize,
    n_actors: usize,
    dim: usize,
    data: Vec<f64>,
}

impl LatentPositions {
    pub fn zeros(n_times: usize, n_actors: usize, dim: usize) -> Self {
        Self { n_times, n_actors, dim, data: vec![0.0; n_times * n_actors * dim] }
    }

    pub fn from_vec(n_times: usize, n_actors: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_times * n_actors * dim {
            return Err(Error::Dimension(format!(
                "{} coordinates for T = {n_times}, n = {n_actors}, p = {dim}",
                data.len()
            )));
        }
        Ok(Self { n_times, n_actors, dim, data })
    }

    #[inline]
    pub fn n_times(&self) -> usize {
        self.n_times
    }
    #[inline]
    pub fn n_actors(&self) -> usize {
        self.n_actors
    }
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, t: usize, i: usize) -> &[f64] {
        let s = (t * self.n_actors + i) * self.dim;
        &self.data[s..s + self.dim]
    }

    #[inline]
    pub fn get_mut(&mut self, t: usize, i: usize) -> &mut [f64] {
        let s = (t * self.n_actors + i) * self.dim;
        &mut self.data[s..s + self.dim]
    }

    /// All positions at time `t` as a row-major `n x dim` block.
    #[inline]
    pub fn slice(&self, t: usize) -> &[f64] {
        let s = t * self.n_actors * self.dim;
        &self.data[s..s + self.n_actors * self.dim]
    }

    #[inline]
    pub fn distance(&self, t: usize, i: usize, j: usize) -> f64 {
        euclidean(self.get(t, i), self.get(t, j))
    }

    /// Actor `i`'s trajectory as a row-major `T x dim` block.
    pub fn trajectory(&self, i: usize) -> Vec<f64> {
        (0..self.n_times).flat_map(|t| self.get(t, i).iter().copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Label sequences `Z[t][i]` in `0..L`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSequences {
    n_times: usize,
    n_actors: usize,
    data: Vec<usize>,
}

impl LabelSequences {
    pub fn constant(n_times: usize, n_actors: usize, label: usize) -> Self {
        Self { n_times, n_actors, data: vec![label; n_times * n_actors] }
    }

    pub fn from_vec(n_times: usize, n_actors: usize, data: Vec<usize>) -> Result<Self> {
        if data.len() != n_times * n_actors {
            return Err(Error::Dimension(format!("{} labels for T = {n_times}, n = {n_actors}", data.len())));
        }
        Ok(Self { n_times, n_actors, data })
    }

    /// Builds from per-time label vectors.
    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let n_actors = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_actors) {
            return Err(Error::Dimension("ragged label rows".into()));
        }
        Ok(Self { n_times: rows.len(), n_actors, data: rows.concat() })
    }

    #[inline]
    pub fn n_times(&self) -> usize {
        self.n_times
    }
    #[inline]
    pub fn n_actors(&self) -> usize {
        self.n_actors
    }
    #[inline]
    pub fn get(&self, t: usize, i: usize) -> usize {
        self.data[t * self.n_actors + i]
    }
    #[inline]
    pub fn set(&mut self, t: usize, i: usize, label: usize) {
        self.data[t * self.n_actors + i] = label;
    }
    /// Labels of every actor at time `t`.
    #[inline]
    pub fn at(&self, t: usize) -> &[usize] {
        &self.data[t * self.n_actors..(t + 1) * self.n_actors]
    }
    /// Actor `i`'s label sequence.
    pub fn sequence(&self, i: usize) -> Vec<usize> {
        (0..self.n_times).map(|t| self.get(t, i)).collect()
    }
    pub fn set_sequence(&mut self, i: usize, seq: &[usize]) {
        for (t, &z) in seq.iter().enumerate() {
            self.set(t, i, z);
        }
    }
    pub fn as_slice(&self) -> &[usize] {
        &self.data
    }

    /// Number of distinct labels used at time `t`.
    pub fn n_occupied(&self, t: usize) -> usize {
        let mut seen: Vec<usize> = self.at(t).to_vec();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    pub fn check_range(&self, n_groups: usize) -> Result<()> {
        match self.data.iter().find(|&&z| z >= n_groups) {
            Some(&label) => Err(Error::Label { label, n_groups }),
            None => Ok(()),
        }
    }
}

/// Group centers and variances, blending coefficient and intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupParams {
    dim: usize,
    /// Row-major `L x dim`.
    mu: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub lambda: f64,
    pub beta0: f64,
}

impl GroupParams {
    pub fn new(dim: usize, mu: Vec<f64>, sigma2: Vec<f64>, lambda: f64, beta0: f64) -> Result<Self> {
        if dim == 0 || mu.len() != sigma2.len() * dim {
            return Err(Error::Dimension(format!(
                "{} center coordinates for {} groups of dimension {dim}",
                mu.len(),
                sigma2.len()
            )));
        }
        Ok(Self { dim, mu, sigma2, lambda, beta0 })
    }

    #[inline]
    pub fn n_groups(&self) -> usize {
        self.sigma2.len()
    }
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    pub fn center(&self, g: usize) -> &[f64] {
        &self.mu[g * self.dim..(g + 1) * self.dim]
    }
    #[inline]
    pub fn center_mut(&mut self, g: usize) -> &mut [f64] {
        &mut self.mu[g * self.dim..(g + 1) * self.dim]
    }
    pub fn centers(&self) -> &[f64] {
        &self.mu
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma2.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Range("group variances must be positive and finite".into()));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::Range(format!("blending coefficient {} outside (0, 1)", self.lambda)));
        }
        if !self.beta0.is_finite() || self.mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::Range("non-finite group parameter".into()));
        }
        Ok(())
    }
}

/// Global weights, initial distribution and time-varying transition matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionStructure {
    n_groups: usize,
    n_times: usize,
    pub beta: Vec<f64>,
    pub pi0: Vec<f64>,
    /// `(T - 1) x L x L`; block `t - 1` holds the matrix into time `t`.
    pi: Vec<f64>,
}

impl TransitionStructure {
    pub fn new(n_groups: usize, n_times: usize, beta: Vec<f64>, pi0: Vec<f64>, pi: Vec<f64>) -> Result<Self> {
        let expected = n_times.saturating_sub(1) * n_groups * n_groups;
        if n_groups == 0 || beta.len() != n_groups || pi0.len() != n_groups || pi.len() != expected {
            return Err(Error::Dimension(format!(
                "transition structure for L = {n_groups}, T = {n_times} has sizes {}, {}, {}",
                beta.len(),
                pi0.len(),
                pi.len()
            )));
        }
        Ok(Self { n_groups, n_times, beta, pi0, pi })
    }

    /// Uniform weights, uniform initial distribution and uniform rows.
    pub fn uniform(n_groups: usize, n_times: usize) -> Self {
        let u = 1.0 / n_groups as f64;
        Self {
            n_groups,
            n_times,
            beta: vec![u; n_groups],
            pi0: vec![u; n_groups],
            pi: vec![u; n_times.saturating_sub(1) * n_groups * n_groups],
        }
    }

    #[inline]
    pub fn n_groups(&self) -> usize {
        self.n_groups
    }
    #[inline]
    pub fn n_times(&self) -> usize {
        self.n_times
    }

    /// Row `from` of the matrix governing the move into time `t >= 1`.
    #[inline]
    pub fn row(&self, t: usize, from: usize) -> &[f64] {
        let l = self.n_groups;
        let s = ((t - 1) * l + from) * l;
        &self.pi[s..s + l]
    }

    #[inline]
    pub fn row_mut(&mut self, t: usize, from: usize) -> &mut [f64] {
        let l = self.n_groups;
        let s = ((t - 1) * l + from) * l;
        &mut self.pi[s..s + l]
    }

    #[inline]
    pub fn prob(&self, t: usize, from: usize, to: usize) -> f64 {
        self.row(t, from)[to]
    }

    pub fn matrices(&self) -> &[f64] {
        &self.pi
    }

    pub fn set_matrices(&mut self, pi: Vec<f64>) -> Result<()> {
        if pi.len() != self.pi.len() {
            return Err(Error::Dimension("transition matrices".into()));
        }
        self.pi = pi;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let check = |v: &[f64], what: &str| -> Result<()> {
            let s: f64 = v.iter().sum();
            if v.iter().any(|&x| !(x >= 0.0)) || (s - 1.0).abs() > 1e-10 {
                return Err(Error::Range(format!("{what} is not a probability vector (sum {s})")));
            }
            Ok(())
        };
        check(&self.beta, "beta")?;
        check(&self.pi0, "initial distribution")?;
        for t in 1..self.n_times {
            for k in 0..self.n_groups {
                check(self.row(t, k), "transition row")?;
            }
        }
        Ok(())
    }
}

/// Hyperparameters, their hyperpriors and the priors on `beta0` and `lambda`.
///
/// Gamma priors on concentrations use shape/rate. The prior on `b` is
/// `Gamma(c / 2, scale = 2 / d)` and `tau2 ~ InvGamma(a_tau / 2, b_tau / 2)`
/// (shape/scale).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub gamma: f64,
    pub alpha0: f64,
    pub alpha: f64,
    pub kappa: f64,
    rho: f64,
    pub tau2: f64,
    /// Shape of the inverse-gamma prior on group variances is `a / 2`.
    pub a: f64,
    /// Scale of the inverse-gamma prior on group variances is `b / 2`.
    pub b: f64,
    pub a_tau: f64,
    pub b_tau: f64,
    pub c: f64,
    pub d: f64,
    pub mu_beta0: f64,
    pub sigma2_beta0: f64,
    pub mu_lambda: f64,
    pub sigma2_lambda: f64,
    pub mu0: Vec<f64>,
    pub a_gamma: f64,
    pub b_gamma: f64,
    pub a_alpha0: f64,
    pub b_alpha0: f64,
    pub a_alpha_kappa: f64,
    pub b_alpha_kappa: f64,
    pub a_rho: f64,
    pub b_rho: f64,
}

impl Hyperparams {
    /// Defaults for `n` actors in `dim` dimensions.
    ///
    /// `tau2` gets mean `n^(2/dim) / 50` and standard deviation four times
    /// that; `b` is set so the mode of the group variance prior equals
    /// `E[tau2]` with standard deviation `4 E[b]`. Both start at their prior
    /// means, and the shape and scale constants are solved by moment matching.
    pub fn with_defaults(n_actors: usize, dim: usize) -> Self {
        let mean_tau2 = (n_actors as f64).powf(2.0 / dim as f64) / 50.0;
        // InvGamma(s, r): mean r / (s - 1), sd / mean = 1 / sqrt(s - 2) = 4.
        let shape_tau = 2.0 + 1.0 / 16.0;
        let scale_tau = mean_tau2 * (shape_tau - 1.0);
        let a = 2.0;
        // Mode of InvGamma(a/2, b/2) is b / (a + 2).
        let mean_b = mean_tau2 * (a + 2.0);
        // Gamma(c/2, scale 2/d): mean c / d and sd sqrt(2c) / d = 4 c / d.
        let c = 1.0 / 8.0;
        let d = c / mean_b;
        let alpha = 1.0;
        let kappa = 4.0;
        Self {
            gamma: 1.0,
            alpha0: 1.0,
            alpha,
            kappa,
            rho: kappa / (alpha + kappa),
            tau2: mean_tau2,
            a,
            b: mean_b,
            a_tau: 2.0 * shape_tau,
            b_tau: 2.0 * scale_tau,
            c,
            d,
            mu_beta0: 0.0,
            sigma2_beta0: 2.0,
            mu_lambda: 0.9,
            sigma2_lambda: 0.01,
            mu0: vec![0.0; dim],
            a_gamma: 1.0,
            b_gamma: 0.1,
            a_alpha0: 1.0,
            b_alpha0: 1.0,
            a_alpha_kappa: 5.0,
            b_alpha_kappa: 0.1,
            a_rho: 8.0,
            b_rho: 2.0,
        }
    }

    #[inline]
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Sets `alpha` and `kappa`, keeping `rho = kappa / (alpha + kappa)`.
    pub fn set_alpha_kappa(&mut self, alpha: f64, kappa: f64) {
        self.alpha = alpha;
        self.kappa = kappa;
        self.rho = if alpha + kappa > 0.0 { kappa / (alpha + kappa) } else { 0.0 };
    }

    /// Sets `alpha + kappa` and `rho` jointly.
    pub fn set_sum_and_rho(&mut self, sum: f64, rho: f64) {
        self.alpha = (1.0 - rho) * sum;
        self.kappa = rho * sum;
        self.rho = rho;
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("alpha0", self.alpha0),
            ("alpha", self.alpha),
            ("tau2", self.tau2),
            ("a", self.a),
            ("b", self.b),
            ("a_tau", self.a_tau),
            ("b_tau", self.b_tau),
            ("c", self.c),
            ("d", self.d),
            ("sigma2_beta0", self.sigma2_beta0),
            ("sigma2_lambda", self.sigma2_lambda),
            ("a_gamma", self.a_gamma),
            ("b_gamma", self.b_gamma),
            ("a_alpha0", self.a_alpha0),
            ("b_alpha0", self.b_alpha0),
            ("a_alpha_kappa", self.a_alpha_kappa),
            ("b_alpha_kappa", self.b_alpha_kappa),
            ("a_rho", self.a_rho),
            ("b_rho", self.b_rho),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::Parameter(format!("kappa = {} must be nonnegative", self.kappa)));
        }
        let rho = self.kappa / (self.alpha + self.kappa);
        if (rho - self.rho).abs() > 1e-12 {
            return Err(Error::Parameter("rho out of sync with alpha and kappa".into()));
        }
        Ok(())
    }
}

/// Which hyperparameters are sampled (and hence carry a hyperprior).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperToggles {
    pub tau2: bool,
    pub b: bool,
    pub gamma: bool,
    pub alpha0: bool,
    pub alpha_kappa: bool,
    pub rho: bool,
}

impl HyperToggles {
    pub const ALL: Self = Self { tau2: true, b: true, gamma: true, alpha0: true, alpha_kappa: true, rho: true };
    pub const NONE: Self = Self { tau2: false, b: false, gamma: false, alpha0: false, alpha_kappa: false, rho: false };

    pub fn any(&self) -> bool {
        self.tau2 || self.b || self.gamma || self.alpha0 || self.alpha_kappa || self.rho
    }
}

impl Default for HyperToggles {
    fn default() -> Self {
        Self::ALL
    }
}

/// One complete MCMC state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub positions: LatentPositions,
    pub labels: LabelSequences,
    pub trans: TransitionStructure,
    pub groups: GroupParams,
    pub hyper: Hyperparams,
}

impl ModelState {
    pub fn n_actors(&self) -> usize {
        self.positions.n_actors()
    }
    pub fn n_times(&self) -> usize {
        self.positions.n_times()
    }
    pub fn dim(&self) -> usize {
        self.positions.dim()
    }
    pub fn n_groups(&self) -> usize {
        self.trans.n_groups()
    }

    /// Checks dimensional agreement and every member's own invariants.
    pub fn validate(&self) -> Result<()> {
        let (t, n, p, l) = (self.n_times(), self.n_actors(), self.dim(), self.n_groups());
        if self.labels.n_times() != t || self.labels.n_actors() != n {
            return Err(Error::Dimension("labels disagree with positions".into()));
        }
        if self.trans.n_times() != t {
            return Err(Error::Dimension("transition structure disagrees with T".into()));
        }
        if self.groups.n_groups() != l || self.groups.dim() != p || self.hyper.mu0.len() != p {
            return Err(Error::Dimension("group parameters disagree with L or p".into()));
        }
        if !self.positions.is_finite() {
            return Err(Error::Range("non-finite latent position".into()));
        }
        self.labels.check_range(l)?;
        self.trans.validate()?;
        self.groups.validate()?;
        self.hyper.validate()
    }
}

/// `beta0 - ||x_i - x_j||`.
#[inline]
pub fn edge_logit(x_i: &[f64], x_j: &[f64], beta0: f64) -> f64 {
    beta0 - euclidean(x_i, x_j)
}

/// Logistic link `exp(eta) / (1 + exp(eta))`.
#[inline]
pub fn edge_probability(eta: f64) -> f64 {
    crate::dist::logistic(eta)
}

/// Log-likelihood contribution `y * eta - log(1 + exp(eta))` of one dyad.
#[inline]
pub fn dyad_log_likelihood(edge: bool, eta: f64) -> f64 {
    if edge {
        eta - softplus(eta)
    } else {
        -softplus(eta)
    }
}

fn check_shapes(net: &DynamicNetwork, positions: &LatentPositions) -> Result<()> {
    if net.n_actors() != positions.n_actors() || net.n_times() != positions.n_times() {
        return Err(Error::Dimension(format!(
            "network is n = {}, T = {} but positions are n = {}, T = {}",
            net.n_actors(),
            net.n_times(),
            positions.n_actors(),
            positions.n_times()
        )));
    }
    Ok(())
}

/// Log-likelihood of the slice at time `t`.
pub fn slice_log_likelihood(net: &DynamicNetwork, positions: &LatentPositions, beta0: f64, t: usize) -> f64 {
    let n = net.n_actors();
    let mut total = 0.0;
    for i in 1..n {
        let row = net.row(t, i);
        let xi = positions.get(t, i);
        for (j, &y) in row.iter().enumerate().take(i) {
            total += dyad_log_likelihood(y == 1, edge_logit(xi, positions.get(t, j), beta0));
        }
    }
    total
}

/// Log-likelihood of the whole network over dyads `j < i` at every time.
pub fn network_log_likelihood(net: &DynamicNetwork, positions: &LatentPositions, beta0: f64) -> Result<f64> {
    check_shapes(net, positions)?;
    Ok((0..net.n_times()).map(|t| slice_log_likelihood(net, positions, beta0, t)).sum())
}

/// Log emission density of `x_t` under group `g`: `N(mu_g, sigma2_g I)` at the
/// first time and `N(lambda mu_g + (1 - lambda) x_prev, sigma2_g I)` after.
pub fn emission_log_density(x_t: &[f64], x_prev: Option<&[f64]>, g: usize, groups: &GroupParams) -> Result<f64> {
    if g >= groups.n_groups() {
        return Err(Error::Label { label: g, n_groups: groups.n_groups() });
    }
    if x_t.len() != groups.dim() || x_prev.is_some_and(|x| x.len() != groups.dim()) {
        return Err(Error::Dimension("emission vector dimension".into()));
    }
    Ok(emission_unchecked(x_t, x_prev, g, groups))
}

#[inline]
pub(crate) fn emission_unchecked(x_t: &[f64], x_prev: Option<&[f64]>, g: usize, groups: &GroupParams) -> f64 {
    let mu = groups.center(g);
    let var = groups.sigma2[g];
    match x_prev {
        None => normal_iso_ln_pdf(x_t, mu, var),
        Some(prev) => {
            let lam = groups.lambda;
            let p = x_t.len() as f64;
            let sq: f64 = x_t
                .iter()
                .zip(mu)
                .zip(prev)
                .map(|((x, m), q)| {
                    let r = x - lam * m - (1.0 - lam) * q;
                    r * r
                })
                .sum();
            -0.5 * p * (1.837_877_066_409_345_5 + var.ln()) - 0.5 * sq / var
        }
    }
}

/// Joint log density of one actor's trajectory `x` (row-major `T x p`) and
/// label sequence `z`.
pub fn trajectory_log_density(x: &[f64], z: &[usize], trans: &TransitionStructure, groups: &GroupParams) -> Result<f64> {
    let p = groups.dim();
    let n_times = z.len();
    if x.len() != n_times * p || n_times != trans.n_times() {
        return Err(Error::Dimension("trajectory length".into()));
    }
    let mut total = trans.pi0[z[0]].ln() + emission_log_density(&x[..p], None, z[0], groups)?;
    for t in 1..n_times {
        let prev = &x[(t - 1) * p..t * p];
        let cur = &x[t * p..(t + 1) * p];
        total += trans.prob(t, z[t - 1], z[t]).ln() + emission_log_density(cur, Some(prev), z[t], groups)?;
    }
    Ok(total)
}

/// The additive pieces of the unnormalized log posterior.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LogPosteriorParts {
    pub likelihood: f64,
    pub trajectories: f64,
    pub transitions: f64,
    pub group_params: f64,
    pub intercept: f64,
    pub blending: f64,
    pub hyperpriors: f64,
}

impl LogPosteriorParts {
    pub fn total(&self) -> f64 {
        self.likelihood
            + self.trajectories
            + self.transitions
            + self.group_params
            + self.intercept
            + self.blending
            + self.hyperpriors
    }
}

/// Log prior of the transition structure given the concentrations.
pub fn transition_log_prior(trans: &TransitionStructure, hyper: &Hyperparams) -> f64 {
    let l = trans.n_groups();
    let lf = l as f64;
    let mut total = dirichlet_ln_pdf(&trans.beta, &vec![hyper.gamma / lf; l]);
    let init: Vec<f64> = trans.beta.iter().map(|b| hyper.alpha0 * b).collect();
    total += dirichlet_ln_pdf(&trans.pi0, &init);
    let mut conc = vec![0.0; l];
    for t in 1..trans.n_times() {
        for k in 0..l {
            for (j, c) in conc.iter_mut().enumerate() {
                *c = hyper.alpha * trans.beta[j] + if j == k { hyper.kappa } else { 0.0 };
            }
            total += dirichlet_ln_pdf(trans.row(t, k), &conc);
        }
    }
    total
}

/// Log prior of the group centers and variances.
pub fn group_log_prior(groups: &GroupParams, hyper: &Hyperparams) -> f64 {
    (0..groups.n_groups())
        .map(|g| {
            normal_iso_ln_pdf(groups.center(g), &hyper.mu0, hyper.tau2)
                + inv_gamma_ln_pdf(groups.sigma2[g], hyper.a / 2.0, hyper.b / 2.0)
        })
        .sum()
}

/// Log hyperprior of the sampled hyperparameters.
pub fn hyper_log_prior(hyper: &Hyperparams, toggles: HyperToggles) -> f64 {
    let mut total = 0.0;
    if toggles.tau2 {
        total += inv_gamma_ln_pdf(hyper.tau2, hyper.a_tau / 2.0, hyper.b_tau / 2.0);
    }
    if toggles.b {
        total += gamma_ln_pdf(hyper.b, hyper.c / 2.0, hyper.d / 2.0);
    }
    if toggles.gamma {
        total += gamma_ln_pdf(hyper.gamma, hyper.a_gamma, hyper.b_gamma);
    }
    if toggles.alpha0 {
        total += gamma_ln_pdf(hyper.alpha0, hyper.a_alpha0, hyper.b_alpha0);
    }
    if toggles.alpha_kappa {
        total += gamma_ln_pdf(hyper.alpha + hyper.kappa, hyper.a_alpha_kappa, hyper.b_alpha_kappa);
    }
    if toggles.rho {
        total += beta_ln_pdf(hyper.rho(), hyper.a_rho, hyper.b_rho);
    }
    total
}

/// Component-wise unnormalized log posterior.
pub fn log_posterior_parts(state: &ModelState, net: &DynamicNetwork, toggles: HyperToggles) -> Result<LogPosteriorParts> {
    let likelihood = network_log_likelihood(net, &state.positions, state.groups.beta0)?;
    log_posterior_parts_given_likelihood(state, likelihood, toggles)
}

/// As [`log_posterior_parts`] with the network log-likelihood supplied by
/// the caller.
pub fn log_posterior_parts_given_likelihood(state: &ModelState, likelihood: f64, toggles: HyperToggles) -> Result<LogPosteriorParts> {
    state.labels.check_range(state.n_groups())?;
    let mut trajectories = 0.0;
    for i in 0..state.n_actors() {
        let x = state.positions.trajectory(i);
        let z = state.labels.sequence(i);
        trajectories += trajectory_log_density(&x, &z, &state.trans, &state.groups)?;
    }
    let hyper = &state.hyper;
    Ok(LogPosteriorParts {
        likelihood,
        trajectories,
        transitions: transition_log_prior(&state.trans, hyper),
        group_params: group_log_prior(&state.groups, hyper),
        intercept: normal_ln_pdf(state.groups.beta0, hyper.mu_beta0, hyper.sigma2_beta0),
        blending: truncated_normal_ln_pdf(state.groups.lambda, hyper.mu_lambda, hyper.sigma2_lambda, 0.0, 1.0),
        hyperpriors: hyper_log_prior(hyper, toggles),
    })
}

/// Unnormalized log joint density of the state and the network.
pub fn log_posterior(state: &ModelState, net: &DynamicNetwork, toggles: HyperToggles) -> Result<f64> {
    Ok(log_posterior_parts(state, net, toggles)?.total())
}
