//! Blocked sampling of an actor's label sequence given its latent
//! trajectory.
//!
//! Backward messages `m(t)[k]` summarize the trajectory after time `t` for an
//! actor in group `k` at time `t`; labels are then drawn forward, each from
//! `pi(prev -> k) * emission(k) * m(t)[k]`. Messages are renormalized at every
//! step and the log normalizers kept, so long sequences do not underflow.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // float methods come from std when a dependency links it
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dist::{categorical_ln, log_sum_exp};
use crate::model::{emission_unchecked, trajectory_log_density, GroupParams, ModelState, TransitionStructure};
use crate::{Error, Result, Rng};

/// Largest number of label sequences [`brute_force_label_posterior`] enumerates.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Normalized backward messages with their log normalizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardMessages {
    n_times: usize,
    n_groups: usize,
    /// `T x L`; row `t` is the message into time `t`, the last row is flat.
    messages: Vec<f64>,
    /// `log` of the factor removed from each row.
    log_norm: Vec<f64>,
    /// `T x L` log emission densities the messages were built from.
    log_emission: Vec<f64>,
}

impl BackwardMessages {
    pub fn n_times(&self) -> usize {
        self.n_times
    }

    /// Normalized message row for time `t` (sums to one).
    pub fn message(&self, t: usize) -> &[f64] {
        &self.messages[t * self.n_groups..(t + 1) * self.n_groups]
    }

    /// Log of the factor removed from row `t`.
    pub fn log_normalizer(&self, t: usize) -> f64 {
        self.log_norm[t]
    }

    /// Message row `t` on the log scale without normalization.
    pub fn log_unnormalized(&self, t: usize) -> Vec<f64> {
        self.message(t).iter().map(|m| m.ln() + self.log_norm[t]).collect()
    }

    pub fn log_emission(&self, t: usize) -> &[f64] {
        &self.log_emission[t * self.n_groups..(t + 1) * self.n_groups]
    }
}

fn check_trajectory(x: &[f64], trans: &TransitionStructure, groups: &GroupParams) -> Result<usize> {
    let p = groups.dim();
    let n_times = trans.n_times();
    if x.len() != n_times * p || groups.n_groups() != trans.n_groups() {
        return Err(Error::Dimension("trajectory, transitions and groups disagree".into()));
    }
    Ok(n_times)
}

fn emission_table(x: &[f64], n_times: usize, groups: &GroupParams) -> Vec<f64> {
    let p = groups.dim();
    let l = groups.n_groups();
    let mut out = vec![0.0; n_times * l];
    for t in 0..n_times {
        let cur = &x[t * p..(t + 1) * p];
        let prev = (t > 0).then(|| &x[(t - 1) * p..t * p]);
        for k in 0..l {
            out[t * l + k] = emission_unchecked(cur, prev, k, groups);
        }
    }
    out
}

/// Computes the backward messages for one actor's trajectory `x`
/// (row-major `T x p`).
pub fn backward_pass(x: &[f64], trans: &TransitionStructure, groups: &GroupParams) -> Result<BackwardMessages> {
    let n_times = check_trajectory(x, trans, groups)?;
    let l = groups.n_groups();
    let log_emission = emission_table(x, n_times, groups);
    let mut messages = vec![0.0; n_times * l];
    let mut log_norm = vec![0.0; n_times];
    let flat = 1.0 / l as f64;
    messages[(n_times - 1) * l..].iter_mut().for_each(|m| *m = flat);
    log_norm[n_times - 1] = (l as f64).ln();

    let mut weighted = vec![0.0; l];
    let mut row = vec![0.0; l];
    for t in (1..n_times).rev() {
        // weighted[j] = emission_t(j) * m(t)[j], scaled by exp(-shift).
        let next = &messages[t * l..(t + 1) * l];
        let em = &log_emission[t * l..(t + 1) * l];
        let shift = em.iter().zip(next).map(|(e, m)| e + m.ln()).fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Err(Error::DegenerateDistribution { time: t });
        }
        for j in 0..l {
            weighted[j] = (em[j] + next[j].ln() - shift).exp();
        }
        for (k, r) in row.iter_mut().enumerate() {
            *r = trans.row(t, k).iter().zip(&weighted).map(|(p, w)| p * w).sum();
        }
        let total: f64 = row.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateDistribution { time: t });
        }
        for (dst, r) in messages[(t - 1) * l..t * l].iter_mut().zip(&row) {
            *dst = r / total;
        }
        log_norm[t - 1] = shift + log_norm[t] + total.ln();
    }
    Ok(BackwardMessages { n_times, n_groups: l, messages, log_norm, log_emission })
}

/// Log weights (up to a constant) of the label at time `t` given the label
/// `prev` at time `t - 1` (ignored at `t = 0`).
pub fn step_log_weights(t: usize, prev: usize, messages: &BackwardMessages, trans: &TransitionStructure) -> Vec<f64> {
    let em = messages.log_emission(t);
    let msg = messages.message(t);
    let prior: &[f64] = if t == 0 { &trans.pi0 } else { trans.row(t, prev) };
    (0..messages.n_groups).map(|k| prior[k].ln() + em[k] + msg[k].ln()).collect()
}

/// Draws a label sequence from its exact conditional given the trajectory.
pub fn sample_labels(
    x: &[f64],
    messages: &BackwardMessages,
    trans: &TransitionStructure,
    groups: &GroupParams,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    let n_times = check_trajectory(x, trans, groups)?;
    if messages.n_times != n_times || messages.n_groups != groups.n_groups() {
        return Err(Error::Dimension("messages do not match the trajectory".into()));
    }
    let mut z = Vec::with_capacity(n_times);
    let mut prev = 0;
    for t in 0..n_times {
        let w = step_log_weights(t, prev, messages, trans);
        let k = categorical_ln(rng, &w).ok_or(Error::DegenerateDistribution { time: t })?;
        z.push(k);
        prev = k;
    }
    Ok(z)
}

/// Resamples every actor's label sequence in actor order.
pub fn sample_all_labels(state: &mut ModelState, rng: &mut Rng) -> Result<()> {
    for i in 0..state.n_actors() {
        let x = state.positions.trajectory(i);
        let messages = backward_pass(&x, &state.trans, &state.groups)?;
        let z = sample_labels(&x, &messages, &state.trans, &state.groups, rng)?;
        state.labels.set_sequence(i, &z);
    }
    Ok(())
}

/// Exact posterior over all `L^T` label sequences of one actor.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPosteriorTable {
    pub n_times: usize,
    pub n_groups: usize,
    /// Indexed by [`LabelPosteriorTable::index_of`].
    pub probs: Vec<f64>,
}

impl LabelPosteriorTable {
    /// Base-`L` index with the first time as the most significant digit.
    pub fn index_of(&self, seq: &[usize]) -> usize {
        seq.iter().fold(0, |acc, &z| acc * self.n_groups + z)
    }

    pub fn sequence(&self, mut index: usize) -> Vec<usize> {
        let mut seq = vec![0; self.n_times];
        for slot in seq.iter_mut().rev() {
            *slot = index % self.n_groups;
            index /= self.n_groups;
        }
        seq
    }
}

/// Enumerates every label sequence and normalizes the joint trajectory
/// density. Fails when `L^T` exceeds [`ENUMERATION_LIMIT`].
pub fn brute_force_label_posterior(
    x: &[f64],
    trans: &TransitionStructure,
    groups: &GroupParams,
) -> Result<LabelPosteriorTable> {
    let n_times = check_trajectory(x, trans, groups)?;
    let l = groups.n_groups();
    let size = (0..n_times).try_fold(1u128, |acc, _| acc.checked_mul(l as u128)).unwrap_or(u128::MAX);
    if size > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge { size, limit: ENUMERATION_LIMIT });
    }
    let mut table = LabelPosteriorTable { n_times, n_groups: l, probs: vec![0.0; size as usize] };
    let mut logs = Vec::with_capacity(size as usize);
    for idx in 0..size as usize {
        let seq = table.sequence(idx);
        logs.push(trajectory_log_density(x, &seq, trans, groups)?);
    }
    let total = log_sum_exp(&logs);
    if !total.is_finite() {
        return Err(Error::Numerical("label posterior has no finite mass".into()));
    }
    for (p, lv) in table.probs.iter_mut().zip(&logs) {
        *p = (lv - total).exp();
    }
    Ok(table)
}
