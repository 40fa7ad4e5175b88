//! Sticky-HDP updates under the weak-limit approximation.
//!
//! Each transition row `(k, t)` is a restaurant of the Chinese restaurant
//! franchise whose customers are the actors moving out of group `k` into
//! time `t`; the initial distribution is restaurant 0 at the first time.
//! Table counts `m`, override counts `w` and considered-dish counts `m_bar`
//! restore conjugacy for the global weights `beta` and the concentrations.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // float methods come from std when a dependency links it
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dist::{bernoulli, beta as beta_variate, binomial, dirichlet, gamma, inv_gamma};
use crate::model::{HyperToggles, Hyperparams, LabelSequences, ModelState};
use crate::{Error, Result, Rng};

/// Initial, transition and occupancy counts implied by the labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    n_groups: usize,
    n_times: usize,
    /// Actors starting in each group.
    pub n_init: Vec<usize>,
    /// `(T - 1) x L x L`; block `t - 1` counts moves `j -> k` into time `t`.
    n_trans: Vec<usize>,
    /// `T x L` occupancy.
    n_group: Vec<usize>,
}

impl TransitionCounts {
    pub fn n_groups(&self) -> usize {
        self.n_groups
    }
    pub fn n_times(&self) -> usize {
        self.n_times
    }
    /// Actors moving `from -> to` into time `t >= 1`.
    #[inline]
    pub fn transitions(&self, t: usize, from: usize, to: usize) -> usize {
        self.n_trans[((t - 1) * self.n_groups + from) * self.n_groups + to]
    }
    /// Customers of restaurant `(from, t)`: actors in `from` at `t - 1`.
    pub fn row_total(&self, t: usize, from: usize) -> usize {
        (0..self.n_groups).map(|k| self.transitions(t, from, k)).sum()
    }
    #[inline]
    pub fn occupancy(&self, t: usize, k: usize) -> usize {
        self.n_group[t * self.n_groups + k]
    }
    /// Total actor-time occupancy of group `k` over all times.
    pub fn total_occupancy(&self, k: usize) -> usize {
        (0..self.n_times).map(|t| self.occupancy(t, k)).sum()
    }
}

/// Exact counts from a label matrix.
pub fn compute_transition_counts(labels: &LabelSequences, n_groups: usize) -> Result<TransitionCounts> {
    labels.check_range(n_groups)?;
    let (n_times, n) = (labels.n_times(), labels.n_actors());
    let l = n_groups;
    let mut counts = TransitionCounts {
        n_groups: l,
        n_times,
        n_init: vec![0; l],
        n_trans: vec![0; n_times.saturating_sub(1) * l * l],
        n_group: vec![0; n_times * l],
    };
    for i in 0..n {
        if n_times > 0 {
            counts.n_init[labels.get(0, i)] += 1;
        }
        for t in 0..n_times {
            counts.n_group[t * l + labels.get(t, i)] += 1;
        }
        for t in 1..n_times {
            let (j, k) = (labels.get(t - 1, i), labels.get(t, i));
            counts.n_trans[((t - 1) * l + j) * l + k] += 1;
        }
    }
    Ok(counts)
}

/// Chinese restaurant franchise auxiliary counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxCounts {
    n_groups: usize,
    n_times: usize,
    /// Tables of restaurant 0 ordering each dish; never overridden.
    pub m_init: Vec<usize>,
    /// `(T - 1) x L x L` tables at restaurant `(j, t)` ordering dish `k`.
    m: Vec<usize>,
    /// Tables whose dish was considered (not overridden), same layout.
    m_bar: Vec<usize>,
    /// `(T - 1) x L` overridden tables per restaurant.
    w: Vec<usize>,
}

impl AuxCounts {
    #[inline]
    fn idx(&self, t: usize, j: usize, k: usize) -> usize {
        ((t - 1) * self.n_groups + j) * self.n_groups + k
    }
    pub fn tables(&self, t: usize, j: usize, k: usize) -> usize {
        self.m[self.idx(t, j, k)]
    }
    pub fn considered(&self, t: usize, j: usize, k: usize) -> usize {
        self.m_bar[self.idx(t, j, k)]
    }
    pub fn overrides(&self, t: usize, j: usize) -> usize {
        self.w[(t - 1) * self.n_groups + j]
    }
    /// `m_bar` summed over restaurants and times, initial restaurant included.
    pub fn considered_per_dish(&self) -> Vec<usize> {
        let l = self.n_groups;
        let mut out = self.m_init.clone();
        for (idx, &v) in self.m_bar.iter().enumerate() {
            out[idx % l] += v;
        }
        out
    }
    /// Tables over all non-initial restaurants.
    pub fn transition_tables(&self) -> usize {
        self.m.iter().sum()
    }
    pub fn total_overrides(&self) -> usize {
        self.w.iter().sum()
    }

    /// Checks `0 <= w <= m_jj`, the `m_bar` definition and `m <= n`.
    pub fn validate(&self, counts: &TransitionCounts) -> Result<()> {
        let l = self.n_groups;
        for k in 0..l {
            if self.m_init[k] > counts.n_init[k] || (counts.n_init[k] > 0 && self.m_init[k] == 0) {
                return Err(Error::Range(format!("initial tables for dish {k}")));
            }
        }
        for t in 1..self.n_times {
            for j in 0..l {
                let w = self.overrides(t, j);
                if w > self.tables(t, j, j) {
                    return Err(Error::Range(format!("overrides exceed tables at ({j}, {t})")));
                }
                for k in 0..l {
                    let m = self.tables(t, j, k);
                    let n = counts.transitions(t, j, k);
                    if m > n || (n > 0 && m == 0) {
                        return Err(Error::Range(format!("tables {m} for {n} customers at ({j}, {k}, {t})")));
                    }
                    let expect = if j == k { m - w } else { m };
                    if self.considered(t, j, k) != expect {
                        return Err(Error::Range(format!("considered count at ({j}, {k}, {t})")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Number of occupied tables after seating `customers` one by one, each
/// opening a new table with probability `weight / (seated + weight)`.
fn seat_customers(rng: &mut Rng, customers: usize, weight: f64) -> usize {
    (0..customers).filter(|&seated| bernoulli(rng, weight / (seated as f64 + weight))).count()
}

/// Samples table counts `m` (with `w = 0` and `m_bar = m`).
pub fn sample_aux_tables(
    counts: &TransitionCounts,
    beta: &[f64],
    alpha0: f64,
    alpha: f64,
    kappa: f64,
    rng: &mut Rng,
) -> AuxCounts {
    let l = counts.n_groups;
    let n_times = counts.n_times;
    let m_init: Vec<usize> = (0..l).map(|k| seat_customers(rng, counts.n_init[k], alpha0 * beta[k])).collect();
    let mut m = vec![0; n_times.saturating_sub(1) * l * l];
    for t in 1..n_times {
        for j in 0..l {
            for k in 0..l {
                let weight = alpha * beta[k] + if j == k { kappa } else { 0.0 };
                m[((t - 1) * l + j) * l + k] = seat_customers(rng, counts.transitions(t, j, k), weight);
            }
        }
    }
    AuxCounts {
        n_groups: l,
        n_times,
        m_init,
        m_bar: m.clone(),
        m,
        w: vec![0; n_times.saturating_sub(1) * l],
    }
}

/// Samples the override counts `w` and derives `m_bar`.
pub fn sample_overrides(aux: &mut AuxCounts, beta: &[f64], rho: f64, rng: &mut Rng) {
    let l = aux.n_groups;
    aux.m_bar.clone_from(&aux.m);
    for t in 1..aux.n_times {
        for j in 0..l {
            let tables = aux.tables(t, j, j);
            let p = if rho > 0.0 { rho / (rho + beta[j] * (1.0 - rho)) } else { 0.0 };
            let w = binomial(rng, tables, p);
            aux.w[(t - 1) * l + j] = w;
            let idx = aux.idx(t, j, j);
            aux.m_bar[idx] = tables - w;
        }
    }
}

/// `beta ~ Dirichlet(gamma / L + m_bar[.k.])`.
pub fn sample_beta(aux: &AuxCounts, gamma: f64, rng: &mut Rng) -> Vec<f64> {
    let l = aux.n_groups as f64;
    let conc: Vec<f64> = aux.considered_per_dish().iter().map(|&c| gamma / l + c as f64).collect();
    dirichlet(rng, &conc)
}

/// `pi0 ~ Dirichlet(alpha0 beta_k + n_init[k])`.
pub fn sample_initial_distribution(counts: &TransitionCounts, beta: &[f64], alpha0: f64, rng: &mut Rng) -> Vec<f64> {
    let conc: Vec<f64> = beta.iter().zip(&counts.n_init).map(|(b, &n)| alpha0 * b + n as f64).collect();
    dirichlet(rng, &conc)
}

/// Every row `pi(k, t) ~ Dirichlet(alpha beta + kappa e_k + n[k, ., t])`,
/// returned in the `(T - 1) x L x L` layout.
pub fn sample_transition_rows(counts: &TransitionCounts, beta: &[f64], alpha: f64, kappa: f64, rng: &mut Rng) -> Vec<f64> {
    let l = counts.n_groups;
    let mut out = Vec::with_capacity(counts.n_times.saturating_sub(1) * l * l);
    let mut conc = vec![0.0; l];
    for t in 1..counts.n_times {
        for k in 0..l {
            for (j, c) in conc.iter_mut().enumerate() {
                *c = alpha * beta[j] + counts.transitions(t, k, j) as f64 + if j == k { kappa } else { 0.0 };
            }
            out.extend(dirichlet(rng, &conc));
        }
    }
    out
}

/// Escobar-West auxiliary-variable update of a DP concentration with a
/// `Gamma(a, rate b)` prior, given `k` clusters among `n` draws.
///
/// With `k == 0` or `n == 0` the likelihood is flat and a fresh prior draw is
/// returned.
pub fn sample_concentration_escobar_west(k: usize, n: usize, a: f64, b: f64, current: f64, rng: &mut Rng) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::Parameter(format!("gamma prior ({a}, {b})")));
    }
    if k == 0 || n == 0 {
        return Ok(gamma(rng, a, b));
    }
    let shape_low = a + k as f64 - 1.0;
    if shape_low <= 0.0 {
        return Err(Error::Parameter(format!("a + K - 1 = {shape_low} must be positive")));
    }
    let eta = beta_variate(rng, current + 1.0, n as f64);
    let rate = b - eta.ln();
    let w1 = shape_low;
    let w2 = n as f64 * rate;
    let shape = if bernoulli(rng, w1 / (w1 + w2)) { a + k as f64 } else { shape_low };
    Ok(gamma(rng, shape, rate))
}

/// Samples `alpha + kappa` with the per-restaurant auxiliary variables
/// `r ~ Beta(alpha + kappa + 1, n)` and `s ~ Bernoulli(n / (n + alpha + kappa))`.
pub fn sample_alpha_plus_kappa(counts: &TransitionCounts, aux: &AuxCounts, hyper: &Hyperparams, rng: &mut Rng) -> f64 {
    let current = hyper.alpha + hyper.kappa;
    let mut sum_log_r = 0.0;
    let mut s_total = 0usize;
    for t in 1..counts.n_times {
        for g in 0..counts.n_groups {
            let n = counts.row_total(t, g) as f64;
            // n = 0 gives r = 1 and s = 0.
            if n > 0.0 {
                sum_log_r += beta_variate(rng, current + 1.0, n).ln();
                s_total += usize::from(bernoulli(rng, n / (n + current)));
            }
        }
    }
    let shape = hyper.a_alpha_kappa + aux.transition_tables() as f64 - s_total as f64;
    gamma(rng, shape, hyper.b_alpha_kappa - sum_log_r)
}

/// One pass of the hyperparameter samplers in order: `tau2`, `b`, `gamma`,
/// `alpha0`, `alpha + kappa`, `rho`. Disabled parameters keep their values.
pub fn sample_hyperparams(
    state: &ModelState,
    counts: &TransitionCounts,
    aux: &AuxCounts,
    toggles: HyperToggles,
    rng: &mut Rng,
) -> Result<Hyperparams> {
    let mut hyper = state.hyper.clone();
    let l = state.n_groups();
    let p = state.dim();
    if toggles.tau2 {
        let ss: f64 = (0..l)
            .map(|g| state.groups.center(g).iter().zip(&hyper.mu0).map(|(m, m0)| (m - m0) * (m - m0)).sum::<f64>())
            .sum();
        hyper.tau2 = inv_gamma(rng, (hyper.a_tau + (l * p) as f64) / 2.0, (hyper.b_tau + ss) / 2.0);
    }
    if toggles.b {
        let inv: f64 = state.groups.sigma2.iter().map(|s| 1.0 / s).sum();
        // Gamma((c + L a) / 2, scale 2 / (d + sum 1 / sigma2)).
        hyper.b = gamma(rng, (hyper.c + l as f64 * hyper.a) / 2.0, (hyper.d + inv) / 2.0);
    }
    if toggles.gamma {
        let per_dish = aux.considered_per_dish();
        let k = per_dish.iter().filter(|&&c| c > 0).count();
        let n: usize = per_dish.iter().sum();
        hyper.gamma = sample_concentration_escobar_west(k, n, hyper.a_gamma, hyper.b_gamma, hyper.gamma, rng)?;
    }
    if toggles.alpha0 {
        let k: usize = aux.m_init.iter().sum();
        let n: usize = counts.n_init.iter().sum();
        hyper.alpha0 = sample_concentration_escobar_west(k, n, hyper.a_alpha0, hyper.b_alpha0, hyper.alpha0, rng)?;
    }
    let mut sum = hyper.alpha + hyper.kappa;
    let mut rho = hyper.rho();
    if toggles.alpha_kappa {
        sum = sample_alpha_plus_kappa(counts, aux, &hyper, rng);
    }
    if toggles.rho {
        let w = aux.total_overrides() as f64;
        let tables = aux.transition_tables() as f64;
        rho = beta_variate(rng, w + hyper.a_rho, tables - w + hyper.b_rho);
    }
    if toggles.alpha_kappa || toggles.rho {
        hyper.set_sum_and_rho(sum, rho);
    }
    Ok(hyper)
}
