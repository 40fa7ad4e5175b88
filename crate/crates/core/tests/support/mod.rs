//! Statistical checks shared by the integration tests and the acceptance
//! target. Every expected value here is derived independently of the
//! library code under test.
#![allow(dead_code)]

use hdp_lpcm_core::dist::dirichlet;
use hdp_lpcm_core::gibbs::{self, StepSizes};
use hdp_lpcm_core::hdp::{compute_transition_counts, sample_aux_tables, sample_beta, sample_hyperparams, sample_initial_distribution, sample_overrides, sample_transition_rows};
use hdp_lpcm_core::labels::{backward_pass, brute_force_label_posterior, sample_labels};
use hdp_lpcm_core::model::HyperToggles;
use hdp_lpcm_core::sim::{sample_generative, sample_network};
use hdp_lpcm_core::summary::ess_and_acf;
use hdp_lpcm_core::*;
use rand::Rng as _;
use std::f64::consts::PI;

/// One measured quantity against its acceptance threshold.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value.abs() < bound }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {:.5} (bound {})", if self.pass { "ok " } else { "BAD" }, self.name, self.value, self.bound)
    }
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Mean and its standard error for independent draws.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let (m, v) = mean_var(xs);
    (m, (v / xs.len() as f64).sqrt())
}

/// Mean and its standard error for an autocorrelated series.
pub fn mean_se_mcmc(xs: &[f64]) -> (f64, f64) {
    let (m, v) = mean_var(xs);
    let ess = ess_and_acf(xs, xs.len() / 4).map(|(e, _)| e).unwrap_or(xs.len() as f64);
    (m, (v / ess.min(xs.len() as f64)).sqrt())
}

/// z-score of the difference between an empirical mean and its target.
pub fn z_score(xs: &[f64], target: f64) -> f64 {
    let (m, se) = mean_se(xs);
    (m - target) / se
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Total variation distance between two probability vectors.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// CDF of a density known up to a constant, tabulated on a uniform grid.
pub struct GridCdf {
    lo: f64,
    h: f64,
    cdf: Vec<f64>,
}

impl GridCdf {
    pub fn from_log_density(lo: f64, hi: f64, points: usize, log_density: impl Fn(f64) -> f64) -> Self {
        let h = (hi - lo) / (points - 1) as f64;
        let logs: Vec<f64> = (0..points).map(|k| log_density(lo + k as f64 * h)).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        Self::from_density(lo, h, &dens)
    }

    pub fn from_density(lo: f64, h: f64, dens: &[f64]) -> Self {
        let mut cdf = vec![0.0; dens.len()];
        for k in 1..dens.len() {
            cdf[k] = cdf[k - 1] + 0.5 * h * (dens[k] + dens[k - 1]);
        }
        let total = *cdf.last().unwrap();
        cdf.iter_mut().for_each(|c| *c /= total);
        Self { lo, h, cdf }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.lo) / self.h;
        if u <= 0.0 {
            return 0.0;
        }
        let k = u.floor() as usize;
        if k + 1 >= self.cdf.len() {
            return 1.0;
        }
        let frac = u - k as f64;
        self.cdf[k] * (1.0 - frac) + self.cdf[k + 1] * frac
    }
}

/// Kolmogorov-Smirnov statistic of a sample against a CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Label sampler against exhaustive enumeration.

/// A random trajectory and model with `n_times` steps and `n_groups` groups.
pub fn random_label_instance(rng: &mut Rng, n_times: usize, n_groups: usize, dim: usize) -> (Vec<f64>, TransitionStructure, GroupParams) {
    let l = n_groups;
    let mu: Vec<f64> = (0..l * dim).map(|_| rng.random_range(-1.5..1.5)).collect();
    let sigma2: Vec<f64> = (0..l).map(|_| rng.random_range(0.4..2.0)).collect();
    let groups = GroupParams::new(dim, mu, sigma2, rng.random_range(0.1..0.9), 0.0).unwrap();
    let beta = dirichlet(rng, &vec![1.0; l]);
    let pi0 = dirichlet(rng, &vec![1.0; l]);
    let pi: Vec<f64> = (0..n_times.saturating_sub(1) * l).flat_map(|_| dirichlet(rng, &vec![1.0; l])).collect();
    let trans = TransitionStructure::new(l, n_times, beta, pi0, pi).unwrap();
    let x: Vec<f64> = (0..n_times * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    (x, trans, groups)
}

/// Total variation between sampled label-sequence frequencies and the
/// enumerated posterior for `instances` random models with `T, L <= 3`.
pub fn label_sampler_tv(instances: usize, draws: usize, seed: u64) -> Vec<Check> {
    let mut rng = rng_from_seed(seed);
    (0..instances)
        .map(|k| {
            // Every (T, L) pair with T <= 3 and 2 <= L <= 3, in both dimensions.
            let n_times = 1 + k % 3;
            let l = 2 + (k / 3) % 2;
            let dim = 1 + (k / 6) % 2;
            let (x, trans, groups) = random_label_instance(&mut rng, n_times, l, dim);
            let exact = brute_force_label_posterior(&x, &trans, &groups).unwrap();
            let messages = backward_pass(&x, &trans, &groups).unwrap();
            let mut freq = vec![0.0; exact.probs.len()];
            for _ in 0..draws {
                let z = sample_labels(&x, &messages, &trans, &groups, &mut rng).unwrap();
                freq[exact.index_of(&z)] += 1.0 / draws as f64;
            }
            Check::below(format!("T={n_times} L={l} p={dim}"), total_variation(&freq, &exact.probs), 0.02)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Joint-distribution test.

pub fn geweke_hyper() -> Hyperparams {
    let mut h = Hyperparams::with_defaults(5, 1);
    h.a = 12.0;
    h.b = 12.0;
    h.tau2 = 1.0;
    h.mu0 = vec![0.0];
    h.mu_beta0 = 0.0;
    h.sigma2_beta0 = 1.0;
    h.mu_lambda = 0.6;
    h.sigma2_lambda = 0.05;
    h.gamma = 2.0;
    h.alpha0 = 2.0;
    h.set_alpha_kappa(1.0, 2.0);
    h
}

pub const GEWEKE_STATS: [&str; 8] =
    ["mean beta0", "mean lambda", "mean |mu|^2", "mean sigma^2", "edge density", "mean self-transition", "mean |G_t|", "mean |X|^2"];

pub fn geweke_statistics(state: &ModelState, net: &DynamicNetwork) -> [f64; 8] {
    let g = &state.groups;
    let (l, n, t) = (state.n_groups(), state.n_actors(), state.n_times());
    let mu2 = (0..l).map(|k| g.center(k).iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / l as f64;
    let s2 = g.sigma2.iter().sum::<f64>() / l as f64;
    let mut selfs = 0.0;
    for s in 1..t {
        for k in 0..l {
            selfs += state.trans.prob(s, k, k);
        }
    }
    let selfs = if t > 1 { selfs / ((t - 1) * l) as f64 } else { 0.0 };
    let occ = (0..t).map(|s| state.labels.n_occupied(s) as f64).sum::<f64>() / t as f64;
    let x2 = state.positions.as_slice().iter().map(|v| v * v).sum::<f64>() / (n * t) as f64;
    [g.beta0, g.lambda, mu2, s2, net.density(), selfs, occ, x2]
}

/// Marginal-conditional against successive-conditional simulation at
/// `n = 5, T = 3, L = 3, p = 1`. Returns one z-score check per statistic.
pub fn geweke(samples: usize, thin: usize, seed: u64) -> Vec<Check> {
    let (n, t, l, p) = (5, 3, 3, 1);
    let hyper = geweke_hyper();
    let mut rng = rng_from_seed(seed);
    let mut marginal = vec![Vec::with_capacity(samples); 8];
    for _ in 0..samples {
        let (state, net) = sample_generative(&hyper, n, t, l, p, &mut rng).unwrap();
        for (col, v) in marginal.iter_mut().zip(geweke_statistics(&state, &net)) {
            col.push(v);
        }
    }
    let (mut state, mut net) = sample_generative(&hyper, n, t, l, p, &mut rng).unwrap();
    let steps = StepSizes { x: 1.0, beta0: 0.5, lambda: 0.2, mu: 0.8 };
    let mut successive = vec![Vec::with_capacity(samples); 8];
    for _ in 0..samples {
        for _ in 0..thin {
            gibbs::sweep(&mut state, &net, steps, HyperToggles::NONE, &mut rng).unwrap();
            net = sample_network(&state.positions, state.groups.beta0, &mut rng).unwrap();
        }
        for (col, v) in successive.iter_mut().zip(geweke_statistics(&state, &net)) {
            col.push(v);
        }
    }
    GEWEKE_STATS
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let (m1, se1) = mean_se(&marginal[k]);
            let (m2, se2) = mean_se_mcmc(&successive[k]);
            Check::below(*name, (m1 - m2) / (se1 * se1 + se2 * se2).sqrt(), 4.0)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Conditional updates.

/// A small state with every actor labelled, for the conjugate checks.
pub fn conjugate_fixture(rng: &mut Rng, n: usize, n_times: usize, l: usize, p: usize) -> ModelState {
    let mut hyper = Hyperparams::with_defaults(n, p);
    hyper.tau2 = 1.7;
    hyper.mu0 = (0..p).map(|d| 0.3 * d as f64 - 0.2).collect();
    hyper.a = 3.0;
    hyper.b = 1.4;
    hyper.mu_lambda = 0.7;
    hyper.sigma2_lambda = 0.2;
    let mu: Vec<f64> = (0..l * p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let sigma2: Vec<f64> = (0..l).map(|_| rng.random_range(0.3..1.2)).collect();
    let groups = GroupParams::new(p, mu, sigma2, 0.6, 0.4).unwrap();
    let data: Vec<f64> = (0..n_times * n * p).map(|_| rng.random_range(-2.5..2.5)).collect();
    let positions = LatentPositions::from_vec(n_times, n, p, data).unwrap();
    // The last group stays empty.
    let labels: Vec<usize> = (0..n_times * n).map(|_| rng.random_range(0..l.max(2) - 1)).collect();
    let labels = LabelSequences::from_vec(n_times, n, labels).unwrap();
    let mut trans = TransitionStructure::uniform(l, n_times);
    trans.beta = dirichlet(rng, &vec![1.0; l]);
    ModelState { positions, labels, trans, groups, hyper }
}

/// Posterior mean and variance of one center coordinate, by direct
/// accumulation of the Gaussian precision and linear terms.
pub fn center_posterior(state: &ModelState, g: usize, d: usize) -> (f64, f64) {
    let lam = state.groups.lambda;
    let s2 = state.groups.sigma2[g];
    let mut precision = 1.0 / state.hyper.tau2;
    let mut linear = state.hyper.mu0[d] / state.hyper.tau2;
    for t in 0..state.n_times() {
        for i in 0..state.n_actors() {
            if state.labels.get(t, i) != g {
                continue;
            }
            let x = state.positions.get(t, i)[d];
            // x = c mu + offset + noise.
            let (c, offset) = if t == 0 { (1.0, 0.0) } else { (lam, (1.0 - lam) * state.positions.get(t - 1, i)[d]) };
            precision += c * c / s2;
            linear += c * (x - offset) / s2;
        }
    }
    (linear / precision, 1.0 / precision)
}

/// Inverse-gamma shape and scale of one group variance.
pub fn variance_posterior(state: &ModelState, g: usize) -> (f64, f64) {
    let lam = state.groups.lambda;
    let mu = state.groups.center(g);
    let (mut count, mut ss) = (0.0, 0.0);
    for t in 0..state.n_times() {
        for i in 0..state.n_actors() {
            if state.labels.get(t, i) != g {
                continue;
            }
            count += 1.0;
            for (d, &x) in state.positions.get(t, i).iter().enumerate() {
                let mean = if t == 0 { mu[d] } else { lam * mu[d] + (1.0 - lam) * state.positions.get(t - 1, i)[d] };
                ss += (x - mean) * (x - mean);
            }
        }
    }
    ((count * state.dim() as f64 + state.hyper.a) / 2.0, (state.hyper.b + ss) / 2.0)
}

/// Mean and variance of `N(m, v)` truncated to `(0, 1)`.
pub fn truncated_unit_moments(m: f64, v: f64) -> (f64, f64) {
    let s = v.sqrt();
    let (a, b) = (-m / s, (1.0 - m) / s);
    let z = normal_cdf(b) - normal_cdf(a);
    let (pa, pb) = (normal_pdf(a), normal_pdf(b));
    let mean = m + s * (pa - pb) / z;
    let var = v * (1.0 + (a * pa - b * pb) / z - ((pa - pb) / z).powi(2));
    (mean, var)
}

/// Gaussian conditional of the blending coefficient before truncation, by
/// completing the square in `lambda`.
pub fn lambda_posterior(state: &ModelState) -> (f64, f64) {
    let h = &state.hyper;
    let (mut precision, mut linear) = (1.0 / h.sigma2_lambda, h.mu_lambda / h.sigma2_lambda);
    for t in 1..state.n_times() {
        for i in 0..state.n_actors() {
            let g = state.labels.get(t, i);
            let s2 = state.groups.sigma2[g];
            for d in 0..state.dim() {
                let prev = state.positions.get(t - 1, i)[d];
                // x - prev = lambda (mu - prev) + noise.
                let u = state.groups.center(g)[d] - prev;
                let r = state.positions.get(t, i)[d] - prev;
                precision += u * u / s2;
                linear += u * r / s2;
            }
        }
    }
    (linear / precision, 1.0 / precision)
}

fn moment_checks(name: &str, draws: &[f64], mean: f64, var: f64) -> Vec<Check> {
    let n = draws.len() as f64;
    let (m, v) = mean_var(draws);
    // Standard error of the sample variance uses the fourth central moment
    // of the draws.
    let m4 = draws.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let se_var = ((m4 - v * v) / n).sqrt();
    vec![
        Check::below(format!("{name} mean (z)"), (m - mean) / (var / n).sqrt(), 3.0),
        Check::below(format!("{name} variance (z)"), (v - var) / se_var, 3.0),
    ]
}

/// Empirical first two moments of every conjugate update against their
/// closed forms, as z-scores.
pub fn conjugate_checks(draws: usize, seed: u64) -> Vec<Check> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::new();

    // Group centers: one time point with full blending is textbook
    // normal-mean conjugacy; a longer AR instance exercises the blend.
    for (label, n_times, lam) in [("center (T=1)", 1, 1.0), ("center (T=4)", 4, 0.6)] {
        let mut state = conjugate_fixture(&mut rng, 7, n_times, 3, 2);
        state.groups.lambda = lam;
        let counts = compute_transition_counts(&state.labels, 3).unwrap();
        let targets: Vec<(f64, f64)> = (0..3).map(|g| center_posterior(&state, g, 1)).collect();
        let mut cols = vec![Vec::with_capacity(draws); 3];
        for _ in 0..draws {
            gibbs::sample_group_means(&mut state, &counts, &mut rng);
            for (g, col) in cols.iter_mut().enumerate() {
                col.push(state.groups.center(g)[1]);
            }
        }
        for (g, col) in cols.iter().enumerate() {
            let tag = if g == 2 { "empty group" } else { "group" };
            out.extend(moment_checks(&format!("{label} {tag} {g}"), col, targets[g].0, targets[g].1));
        }
    }

    // Group variances.
    let mut state = conjugate_fixture(&mut rng, 6, 3, 3, 2);
    let counts = compute_transition_counts(&state.labels, 3).unwrap();
    let targets: Vec<(f64, f64)> = (0..3).map(|g| variance_posterior(&state, g)).collect();
    let mut cols = vec![Vec::with_capacity(draws); 3];
    for _ in 0..draws {
        gibbs::sample_group_variances(&mut state, &counts, &mut rng);
        for (g, col) in cols.iter_mut().enumerate() {
            // The precision is Gamma(shape, rate = scale) with finite moments.
            col.push(1.0 / state.groups.sigma2[g]);
        }
    }
    for (g, col) in cols.iter().enumerate() {
        let (shape, scale) = targets[g];
        out.extend(moment_checks(&format!("variance group {g} (precision)"), col, shape / scale, shape / (scale * scale)));
    }

    // Blending coefficient, with a conditional close to the upper bound so
    // the truncation matters.
    let mut state = conjugate_fixture(&mut rng, 3, 3, 2, 1);
    state.hyper.mu_lambda = 1.1;
    state.hyper.sigma2_lambda = 0.3;
    let (m, v) = lambda_posterior(&state);
    let (tm, tv) = truncated_unit_moments(m, v);
    let col: Vec<f64> = (0..draws)
        .map(|_| {
            gibbs::sample_lambda(&mut state, &mut rng).unwrap();
            state.groups.lambda
        })
        .collect();
    out.extend(moment_checks("blending coefficient", &col, tm, tv));

    // Dirichlet updates given fixed auxiliary counts.
    let state = conjugate_fixture(&mut rng, 8, 4, 3, 1);
    let counts = compute_transition_counts(&state.labels, 3).unwrap();
    let h = &state.hyper;
    let mut aux = sample_aux_tables(&counts, &state.trans.beta, h.alpha0, h.alpha, h.kappa, &mut rng);
    sample_overrides(&mut aux, &state.trans.beta, h.rho(), &mut rng);
    let dirichlet_moments = |conc: &[f64], k: usize| {
        let total: f64 = conc.iter().sum();
        let m = conc[k] / total;
        (m, m * (1.0 - m) / (total + 1.0))
    };
    // Dish weights: prior gamma / L plus tables that kept their dish.
    let mut dish = vec![h.gamma / 3.0; 3];
    for k in 0..3 {
        dish[k] += aux.m_init[k] as f64;
    }
    for t in 1..4 {
        for j in 0..3 {
            for k in 0..3 {
                let tables = aux.tables(t, j, k);
                dish[k] += if j == k { (tables - aux.overrides(t, j)) as f64 } else { tables as f64 };
            }
        }
    }
    let col: Vec<f64> = (0..draws).map(|_| sample_beta(&aux, h.gamma, &mut rng)[1]).collect();
    let (bm, bv) = dirichlet_moments(&dish, 1);
    out.extend(moment_checks("global weights", &col, bm, bv));

    let init_conc: Vec<f64> = (0..3).map(|k| h.alpha0 * state.trans.beta[k] + counts.n_init[k] as f64).collect();
    let col: Vec<f64> = (0..draws).map(|_| sample_initial_distribution(&counts, &state.trans.beta, h.alpha0, &mut rng)[0]).collect();
    let (im, iv) = dirichlet_moments(&init_conc, 0);
    out.extend(moment_checks("initial distribution", &col, im, iv));

    let (t, from) = (2, state.labels.get(1, 0));
    let row_conc: Vec<f64> = (0..3)
        .map(|k| h.alpha * state.trans.beta[k] + counts.transitions(t, from, k) as f64 + if k == from { h.kappa } else { 0.0 })
        .collect();
    let col: Vec<f64> = (0..draws)
        .map(|_| {
            let rows = sample_transition_rows(&counts, &state.trans.beta, h.alpha, h.kappa, &mut rng);
            rows[((t - 1) * 3 + from) * 3 + from]
        })
        .collect();
    let (rm, rv) = dirichlet_moments(&row_conc, from);
    out.extend(moment_checks("transition row", &col, rm, rv));

    // Conjugate hyperparameters.
    let toggles = HyperToggles { tau2: true, b: true, ..HyperToggles::NONE };
    let (mut tau_col, mut b_col) = (Vec::with_capacity(draws), Vec::with_capacity(draws));
    for _ in 0..draws {
        let next = sample_hyperparams(&state, &counts, &aux, toggles, &mut rng).unwrap();
        tau_col.push(1.0 / next.tau2);
        b_col.push(next.b);
    }
    let ss: f64 = (0..3).map(|g| state.groups.center(g).iter().zip(&h.mu0).map(|(m, m0)| (m - m0).powi(2)).sum::<f64>()).sum();
    let (shape, rate) = ((h.a_tau + 3.0) / 2.0, (h.b_tau + ss) / 2.0);
    out.extend(moment_checks("center prior variance (precision)", &tau_col, shape / rate, shape / (rate * rate)));
    let inv: f64 = state.groups.sigma2.iter().map(|s| 1.0 / s).sum();
    let (shape, rate) = ((h.c + 3.0 * h.a) / 2.0, (h.d + inv) / 2.0);
    out.extend(moment_checks("variance scale", &b_col, shape / rate, shape / (rate * rate)));
    out
}

// ---------------------------------------------------------------------------
// Metropolis blocks against numerically integrated conditionals.

fn dyad_ll(edge: bool, eta: f64) -> f64 {
    // log p for p = 1 / (1 + exp(-eta)).
    let log_p = -(1.0 + (-eta).exp()).ln();
    let log_q = -(1.0 + eta.exp()).ln();
    if edge {
        log_p
    } else {
        log_q
    }
}

/// Positions of two actors at one time in one dimension, both in a single
/// group, joined by an edge. The marginal of the first position is
/// integrated over the second on a grid.
pub fn position_block_ks(draws: usize, thin: usize, seed: u64) -> Check {
    let mut rng = rng_from_seed(seed);
    let (mu, s2, beta0) = (0.3, 1.2, 0.5);
    let groups = GroupParams::new(1, vec![mu], vec![s2], 0.5, beta0).unwrap();
    let mut hyper = Hyperparams::with_defaults(2, 1);
    hyper.mu_beta0 = beta0;
    let mut state = ModelState {
        positions: LatentPositions::zeros(1, 2, 1),
        labels: LabelSequences::constant(1, 2, 0),
        trans: TransitionStructure::uniform(1, 1),
        groups,
        hyper,
    };
    let mut net = DynamicNetwork::empty(2, 1).unwrap();
    net.set_edge(0, 0, 1, true).unwrap();
    let mut xs = Vec::with_capacity(draws);
    for _ in 0..draws {
        for _ in 0..thin {
            gibbs::mh_update_positions(&mut state, &net, 1.5, &mut rng).unwrap();
        }
        xs.push(state.positions.get(0, 0)[0]);
    }
    let (lo, hi, m) = (-8.0, 8.0, 1601);
    let h = (hi - lo) / (m - 1) as f64;
    let log_normal = |x: f64| -0.5 * (x - mu) * (x - mu) / s2;
    let marginal = |x0: f64| {
        let total: f64 = (0..m)
            .map(|k| {
                let x1 = lo + k as f64 * h;
                (log_normal(x1) + dyad_ll(true, beta0 - (x0 - x1).abs())).exp()
            })
            .sum();
        log_normal(x0) + (total * h).ln()
    };
    let cdf = GridCdf::from_log_density(lo, hi, m, marginal);
    Check::below("position block KS", ks_statistic(&xs, |x| cdf.eval(x)), 0.02)
}

/// Intercept given fixed positions of a four-actor, two-time network.
pub fn intercept_block_ks(draws: usize, thin: usize, seed: u64) -> Check {
    let mut rng = rng_from_seed(seed);
    let positions = LatentPositions::from_vec(2, 4, 2, (0..16).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap();
    let mut net = DynamicNetwork::empty(4, 2).unwrap();
    for (t, i, j) in [(0, 0, 1), (0, 1, 2), (0, 2, 3), (1, 0, 2), (1, 1, 3)] {
        net.set_edge(t, i, j, true).unwrap();
    }
    let mut hyper = Hyperparams::with_defaults(4, 2);
    hyper.mu_beta0 = -0.5;
    hyper.sigma2_beta0 = 2.0;
    let mut state = ModelState {
        positions,
        labels: LabelSequences::constant(2, 4, 0),
        trans: TransitionStructure::uniform(1, 2),
        groups: GroupParams::new(2, vec![0.0, 0.0], vec![1.0], 0.5, 0.0).unwrap(),
        hyper,
    };
    let mut xs = Vec::with_capacity(draws);
    for _ in 0..draws {
        for _ in 0..thin {
            gibbs::mh_update_intercept(&mut state, &net, 1.5, &mut rng).unwrap();
        }
        xs.push(state.groups.beta0);
    }
    let pos = state.positions.clone();
    let log_density = |b: f64| {
        let mut lp = -0.25 * (b + 0.5) * (b + 0.5);
        for t in 0..2 {
            for i in 1..4 {
                for j in 0..i {
                    lp += dyad_ll(net.edge(t, i, j), b - pos.distance(t, i, j));
                }
            }
        }
        lp
    };
    let cdf = GridCdf::from_log_density(-12.0, 12.0, 24_001, log_density);
    Check::below("intercept block KS", ks_statistic(&xs, |x| cdf.eval(x)), 0.02)
}

/// Label sequence index in base `l`, earliest time most significant.
fn sequence_index(labels: impl Iterator<Item = usize>, l: usize) -> usize {
    labels.fold(0, |acc, z| acc * l + z)
}

/// A lone actor (no dyads) under random transitions, updated only by
/// position steps and relabel-and-move proposals. Labels must follow the
/// Markov chain prior and the last position the matching Gaussian mixture.
pub fn relocation_prior_checks(draws: usize, thin: usize, seed: u64) -> Vec<Check> {
    let mut rng = rng_from_seed(seed);
    let (n_times, l) = (3, 3);
    let mu = vec![-1.0, 0.4, 1.5];
    let sigma2 = vec![0.3, 0.6, 0.45];
    let lambda = 0.65;
    let beta = dirichlet(&mut rng, &[1.0; 3]);
    let pi0 = dirichlet(&mut rng, &[1.0; 3]);
    let pi: Vec<f64> = (0..(n_times - 1) * l).flat_map(|_| dirichlet(&mut rng, &[0.7; 3])).collect();
    let trans = TransitionStructure::new(l, n_times, beta, pi0, pi).unwrap();
    let mut state = ModelState {
        positions: LatentPositions::zeros(n_times, 1, 1),
        labels: LabelSequences::constant(n_times, 1, 0),
        trans: trans.clone(),
        groups: GroupParams::new(1, mu.clone(), sigma2.clone(), lambda, 0.0).unwrap(),
        hyper: Hyperparams::with_defaults(1, 1),
    };
    let net = DynamicNetwork::empty(1, n_times).unwrap();
    let cells = l.pow(n_times as u32);
    let mut freq = vec![0.0; cells];
    let mut last = Vec::with_capacity(draws);
    for _ in 0..draws {
        for _ in 0..thin {
            gibbs::mh_update_positions(&mut state, &net, 1.0, &mut rng).unwrap();
            gibbs::relocation_update(&mut state, &net, &mut rng).unwrap();
        }
        freq[sequence_index((0..n_times).map(|t| state.labels.get(t, 0)), l)] += 1.0 / draws as f64;
        last.push(state.positions.get(n_times - 1, 0)[0]);
    }
    // Exact sequence probabilities and the Gaussian law of the last
    // position given each sequence.
    let mut exact = vec![0.0; cells];
    let mut laws = Vec::with_capacity(cells);
    for (idx, prob) in exact.iter_mut().enumerate() {
        let z: Vec<usize> = (0..n_times).rev().map(|t| (idx / l.pow(t as u32)) % l).collect();
        let mut p = trans.pi0[z[0]];
        let (mut m, mut v) = (mu[z[0]], sigma2[z[0]]);
        for t in 1..n_times {
            p *= trans.prob(t, z[t - 1], z[t]);
            m = lambda * mu[z[t]] + (1.0 - lambda) * m;
            v = (1.0 - lambda) * (1.0 - lambda) * v + sigma2[z[t]];
        }
        *prob = p;
        laws.push((m, v));
    }
    let cdf = |x: f64| exact.iter().zip(&laws).map(|(p, (m, v))| p * normal_cdf((x - m) / v.sqrt())).sum::<f64>();
    vec![
        Check::below("relocation label TV (lone actor)", total_variation(&freq, &exact), 0.02),
        Check::below("relocation last-position KS (lone actor)", ks_statistic(&last, cdf), 0.02),
    ]
}

/// Two actors over two times joined by an edge at both times, updated only
/// by position steps and relabel-and-move proposals. The joint label law
/// and the marginal of the first actor's second position come from a
/// four-dimensional grid integral.
pub fn relocation_likelihood_checks(draws: usize, thin: usize, seed: u64) -> Vec<Check> {
    let mut rng = rng_from_seed(seed);
    let (n_times, l) = (2, 2);
    let mu = [-1.5, 1.5];
    let sigma2 = [0.3, 0.4];
    let (lambda, beta0) = (0.2, 1.0);
    let pi0 = [0.35, 0.65];
    let rows = [0.8, 0.2, 0.3, 0.7];
    let trans = TransitionStructure::new(l, n_times, vec![0.5, 0.5], pi0.to_vec(), rows.to_vec()).unwrap();
    let mut state = ModelState {
        positions: LatentPositions::zeros(n_times, 2, 1),
        labels: LabelSequences::constant(n_times, 2, 0),
        trans,
        groups: GroupParams::new(1, mu.to_vec(), sigma2.to_vec(), lambda, beta0).unwrap(),
        hyper: Hyperparams::with_defaults(2, 1),
    };
    let mut net = DynamicNetwork::empty(2, n_times).unwrap();
    net.set_edge(0, 0, 1, true).unwrap();
    net.set_edge(1, 0, 1, true).unwrap();
    let cells = l.pow(2 * n_times as u32);
    let mut freq = vec![0.0; cells];
    let mut xs = Vec::with_capacity(draws);
    for _ in 0..draws {
        for _ in 0..thin {
            gibbs::mh_update_positions(&mut state, &net, 1.2, &mut rng).unwrap();
            gibbs::relocation_update(&mut state, &net, &mut rng).unwrap();
        }
        let z = state.labels.sequence(0).into_iter().chain(state.labels.sequence(1));
        freq[sequence_index(z, l)] += 1.0 / draws as f64;
        xs.push(state.positions.get(1, 0)[0]);
    }

    let (lo, hi, m) = (-5.0, 5.5, 85);
    let h = (hi - lo) / (m - 1) as f64;
    let grid: Vec<f64> = (0..m).map(|k| lo + k as f64 * h).collect();
    let gauss = |x: f64, mean: f64, var: f64| (-0.5 * (x - mean) * (x - mean) / var).exp() / (2.0 * PI * var).sqrt();
    // Trajectory weight of one actor with labels (z0, z1) on the grid.
    let weight = |z0: usize, z1: usize| -> Vec<f64> {
        let mut w = vec![0.0; m * m];
        for (a, &x0) in grid.iter().enumerate() {
            for (b, &x1) in grid.iter().enumerate() {
                w[a * m + b] = pi0[z0]
                    * rows[z0 * l + z1]
                    * gauss(x0, mu[z0], sigma2[z0])
                    * gauss(x1, lambda * mu[z1] + (1.0 - lambda) * x0, sigma2[z1]);
            }
        }
        w
    };
    let seqs: Vec<(usize, usize)> = (0..l).flat_map(|a| (0..l).map(move |b| (a, b))).collect();
    let weights: Vec<Vec<f64>> = seqs.iter().map(|&(a, b)| weight(a, b)).collect();
    let like0: Vec<f64> =
        (0..m * m).map(|k| dyad_ll(true, beta0 - (grid[k / m] - grid[k % m]).abs()).exp()).collect();
    let like1: Vec<f64> =
        (0..m * m).map(|k| dyad_ll(true, beta0 - (grid[k / m] - grid[k % m]).abs()).exp()).collect();
    let mut exact = vec![0.0; cells];
    let mut density = vec![0.0; m];
    for (sb, wb) in weights.iter().enumerate() {
        // inner[(a0, a1)] = sum over the second actor's positions.
        let mut inner = vec![0.0; m * m];
        for a0 in 0..m {
            for a1 in 0..m {
                let mut acc = 0.0;
                for b0 in 0..m {
                    let l0 = like0[a0 * m + b0];
                    let row = &wb[b0 * m..(b0 + 1) * m];
                    let l1 = &like1[a1 * m..(a1 + 1) * m];
                    acc += l0 * row.iter().zip(l1).map(|(w, q)| w * q).sum::<f64>();
                }
                inner[a0 * m + a1] = acc;
            }
        }
        for (sa, wa) in weights.iter().enumerate() {
            for a0 in 0..m {
                for a1 in 0..m {
                    let v = wa[a0 * m + a1] * inner[a0 * m + a1];
                    exact[sa * seqs.len() + sb] += v;
                    density[a1] += v;
                }
            }
        }
    }
    let total: f64 = exact.iter().sum();
    exact.iter_mut().for_each(|p| *p /= total);
    let cdf = GridCdf::from_density(lo, h, &density);
    vec![
        Check::below("relocation label TV (two actors)", total_variation(&freq, &exact), 0.02),
        Check::below("relocation position KS (two actors)", ks_statistic(&xs, |x| cdf.eval(x)), 0.02),
    ]
}

// ---------------------------------------------------------------------------
// Residual-preserving shifts of the blending coefficient and the centers.

/// Two actors joined by an edge at both of two times. The first stays in
/// group 0; the second starts in group 1 and moves to group 0.
fn shift_target(mu: [f64; 2], lambda: f64) -> (ModelState, DynamicNetwork) {
    let mut labels = LabelSequences::constant(2, 2, 0);
    labels.set(0, 1, 1);
    let state = ModelState {
        positions: LatentPositions::zeros(2, 2, 1),
        labels,
        trans: TransitionStructure::uniform(2, 2),
        groups: GroupParams::new(1, mu.to_vec(), SHIFT_SIGMA2.to_vec(), lambda, SHIFT_BETA0).unwrap(),
        hyper: Hyperparams::with_defaults(2, 1),
    };
    let mut net = DynamicNetwork::empty(2, 2).unwrap();
    net.set_edge(0, 0, 1, true).unwrap();
    net.set_edge(1, 0, 1, true).unwrap();
    (state, net)
}

const SHIFT_SIGMA2: [f64; 2] = [0.3, 0.4];
const SHIFT_BETA0: f64 = 1.0;

/// Unnormalized density of the second actor's last position under
/// `shift_target`, integrated over the other three positions on `grid`.
fn shift_marginal(grid: &[f64], mu: [f64; 2], lambda: f64) -> Vec<f64> {
    let m = grid.len();
    let [s0, s1] = SHIFT_SIGMA2;
    let gauss = |x: f64, mean: f64, var: f64| (-0.5 * (x - mean) * (x - mean) / var).exp() / (2.0 * PI * var).sqrt();
    let link: Vec<f64> =
        (0..m * m).map(|k| dyad_ll(true, SHIFT_BETA0 - (grid[k / m] - grid[k % m]).abs()).exp()).collect();
    let step: Vec<f64> =
        (0..m * m).map(|k| gauss(grid[k / m], lambda * mu[0] + (1.0 - lambda) * grid[k % m], s0)).collect();
    let first: Vec<f64> = grid.iter().map(|&x| gauss(x, mu[0], s0)).collect();
    let second: Vec<f64> = grid.iter().map(|&x| gauss(x, mu[1], s1)).collect();
    // e[a1][b0]: first actor's path ending at a1, joined to b0 at time 0.
    let mut e = vec![0.0; m * m];
    for a1 in 0..m {
        for b0 in 0..m {
            e[a1 * m + b0] =
                second[b0] * (0..m).map(|a0| step[a1 * m + a0] * first[a0] * link[a0 * m + b0]).sum::<f64>();
        }
    }
    (0..m)
        .map(|b1| {
            (0..m)
                .map(|b0| step[b1 * m + b0] * (0..m).map(|a1| link[a1 * m + b1] * e[a1 * m + b0]).sum::<f64>())
                .sum()
        })
        .collect()
}

/// The blending coefficient moves only through shifts, positions through
/// per-site steps. Compares its marginal and the second actor's last
/// position against grid integrals.
pub fn lambda_shift_checks(draws: usize, thin: usize, seed: u64) -> Vec<Check> {
    let mut rng = rng_from_seed(seed);
    let mu = [-1.0, 1.5];
    let (prior_mean, prior_var) = (0.5, 0.05);
    let (mut state, net) = shift_target(mu, 0.5);
    state.hyper.mu_lambda = prior_mean;
    state.hyper.sigma2_lambda = prior_var;
    let (mut lambdas, mut xs) = (Vec::with_capacity(draws), Vec::with_capacity(draws));
    for _ in 0..draws {
        for _ in 0..thin {
            gibbs::mh_update_positions(&mut state, &net, 1.0, &mut rng).unwrap();
            gibbs::lambda_shift_update(&mut state, &net, 0.3, &mut rng).unwrap();
        }
        lambdas.push(state.groups.lambda);
        xs.push(state.positions.get(1, 1)[0]);
    }

    let (lo, hi, m) = (-5.0, 5.5, 85);
    let h = (hi - lo) / (m - 1) as f64;
    let grid: Vec<f64> = (0..m).map(|k| lo + k as f64 * h).collect();
    let k = 201;
    let dl = 1.0 / (k - 1) as f64;
    let mut lambda_density = vec![0.0; k];
    let mut density = vec![0.0; m];
    for (j, w) in lambda_density.iter_mut().enumerate() {
        let lambda = j as f64 * dl;
        let prior = (-0.5 * (lambda - prior_mean) * (lambda - prior_mean) / prior_var).exp();
        let marginal = shift_marginal(&grid, mu, lambda);
        *w = prior * marginal.iter().sum::<f64>();
        density.iter_mut().zip(&marginal).for_each(|(d, v)| *d += prior * v);
    }
    let lambda_cdf = GridCdf::from_density(0.0, dl, &lambda_density);
    let cdf = GridCdf::from_density(lo, h, &density);
    vec![
        Check::below("lambda shift: lambda KS", ks_statistic(&lambdas, |x| lambda_cdf.eval(x)), 0.02),
        Check::below("lambda shift: position KS", ks_statistic(&xs, |x| cdf.eval(x)), 0.02),
    ]
}

/// The centers move only through shifts, positions through per-site steps,
/// with the blending coefficient fixed. Compares both center marginals and
/// the second actor's last position against grid integrals.
pub fn mu_shift_checks(draws: usize, thin: usize, seed: u64) -> Vec<Check> {
    let mut rng = rng_from_seed(seed);
    let lambda = 0.5;
    let tau2 = 1.0;
    let (mut state, net) = shift_target([0.0, 0.0], lambda);
    state.hyper.tau2 = tau2;
    state.hyper.mu0 = vec![0.0];
    let (mut centers, mut xs) = ([Vec::with_capacity(draws), Vec::with_capacity(draws)], Vec::with_capacity(draws));
    for _ in 0..draws {
        for _ in 0..thin {
            gibbs::mh_update_positions(&mut state, &net, 1.0, &mut rng).unwrap();
            gibbs::mu_shift_update(&mut state, &net, 0.8, &mut rng).unwrap();
        }
        centers[0].push(state.groups.center(0)[0]);
        centers[1].push(state.groups.center(1)[0]);
        xs.push(state.positions.get(1, 1)[0]);
    }

    let (lo, hi, m) = (-5.0, 5.5, 61);
    let h = (hi - lo) / (m - 1) as f64;
    let grid: Vec<f64> = (0..m).map(|k| lo + k as f64 * h).collect();
    let (clo, chi, k) = (-3.5, 3.5, 57);
    let hc = (chi - clo) / (k - 1) as f64;
    let mut center_density = [vec![0.0; k], vec![0.0; k]];
    let mut density = vec![0.0; m];
    for i in 0..k {
        for j in 0..k {
            let mu = [clo + i as f64 * hc, clo + j as f64 * hc];
            let prior = (-0.5 * (mu[0] * mu[0] + mu[1] * mu[1]) / tau2).exp();
            let marginal = shift_marginal(&grid, mu, lambda);
            let w = prior * marginal.iter().sum::<f64>();
            center_density[0][i] += w;
            center_density[1][j] += w;
            density.iter_mut().zip(&marginal).for_each(|(d, v)| *d += prior * v);
        }
    }
    let mut checks: Vec<Check> = (0..2)
        .map(|g| {
            let cdf = GridCdf::from_density(clo, hc, &center_density[g]);
            Check::below(format!("center shift: center {g} KS"), ks_statistic(&centers[g], |x| cdf.eval(x)), 0.02)
        })
        .collect();
    let cdf = GridCdf::from_density(lo, h, &density);
    checks.push(Check::below("center shift: position KS", ks_statistic(&xs, |x| cdf.eval(x)), 0.02));
    checks
}

// ---------------------------------------------------------------------------
// Metrics against hand-computed values.

pub fn metric_oracles() -> Vec<Check> {
    use hdp_lpcm_core::summary::{adjusted_rand_index, auc, vi_distance};
    let ln2 = std::f64::consts::LN_2;
    let mut out = Vec::new();
    let mut close = |name: &str, got: f64, want: f64| out.push(Check::below(name, got - want, 1e-12));
    close("VI identical", vi_distance(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 0.0);
    // Independent halvings: both entropies ln 2, no shared information.
    close("VI crossed halvings", vi_distance(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 2.0 * ln2);
    // One block against singletons: H = 0 and ln 3, I = 0.
    close("VI block vs singletons", vi_distance(&[0, 0, 0], &[0, 1, 2]).unwrap(), 3f64.ln());
    close("ARI identical", adjusted_rand_index(&[0, 0, 1, 1, 2], &[2, 2, 0, 0, 1]).unwrap(), 1.0);
    // Index 0, expected (2 * 2) / 6, maximum 2.
    close("ARI crossed halvings", adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), -0.5);
    // Index 1, row pairs 3 + 1, column pairs 1 + 1, total 10: expected
    // 4 * 2 / 10 = 0.8 and maximum 3.
    close("ARI uneven", adjusted_rand_index(&[0, 0, 0, 1, 1], &[0, 0, 1, 1, 2]).unwrap(), (1.0 - 0.8) / (3.0 - 0.8));
    close("AUC perfect", auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(), 1.0);
    close("AUC constant scores", auc(&[0.5; 4], &[true, false, true, false]).unwrap(), 0.5);
    // Pairs (edge, non-edge): (0.8,0.3) (0.8,0.6) (0.8,0.6) (0.4,0.3) (0.4,0.6)
    // (0.4,0.6) give 1 + 1 + 1 + 1 + 0 + 0 = 4 of 6.
    close("AUC hand ranks", auc(&[0.8, 0.3, 0.6, 0.4, 0.6], &[true, false, false, true, false]).unwrap(), 4.0 / 6.0);
    out
}
