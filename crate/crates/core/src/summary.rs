//! Posterior summaries, diagnostics and evaluation metrics.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // float methods come from std when a dependency links it
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::gibbs::{Chain, Sample};
use crate::linalg::{apply_rotation, center_in_place, identity, procrustes_rotation};
use crate::model::{edge_logit, edge_probability, LabelSequences, LatentPositions};
use crate::network::DynamicNetwork;
use crate::{Error, Result};

fn require_full<'a, T>(field: &'a Option<T>, what: &str) -> Result<&'a T> {
    field.as_ref().ok_or_else(|| Error::Argument(format!("chain samples do not store {what}")))
}

/// Label matrices of every kept sample.
pub fn chain_labels(chain: &Chain) -> Result<Vec<&LabelSequences>> {
    chain.samples.iter().map(|s| require_full(&s.labels, "labels")).collect()
}

/// Position arrays of every kept sample.
pub fn chain_positions(chain: &Chain) -> Result<Vec<&LatentPositions>> {
    chain.samples.iter().map(|s| require_full(&s.positions, "positions")).collect()
}

/// Per-time matrices of co-assignment frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coassignment {
    pub n_times: usize,
    pub n_actors: usize,
    /// `T x n x n`.
    pub probs: Vec<f64>,
}

impl Coassignment {
    #[inline]
    pub fn get(&self, t: usize, i: usize, j: usize) -> f64 {
        self.probs[(t * self.n_actors + i) * self.n_actors + j]
    }
    pub fn slice(&self, t: usize) -> &[f64] {
        let nn = self.n_actors * self.n_actors;
        &self.probs[t * nn..(t + 1) * nn]
    }
}

/// Fraction of samples placing each pair in the same group at each time.
pub fn coassignment_probabilities(samples: &[&LabelSequences]) -> Result<Coassignment> {
    let first = samples.first().ok_or_else(|| Error::Empty("no samples".into()))?;
    let (n_times, n) = (first.n_times(), first.n_actors());
    let mut counts = vec![0u64; n_times * n * n];
    for z in samples {
        if z.n_times() != n_times || z.n_actors() != n {
            return Err(Error::Dimension("samples disagree in shape".into()));
        }
        for t in 0..n_times {
            let row = z.at(t);
            for i in 0..n {
                for j in 0..n {
                    counts[(t * n + i) * n + j] += u64::from(row[i] == row[j]);
                }
            }
        }
    }
    let m = samples.len() as f64;
    Ok(Coassignment { n_times, n_actors: n, probs: counts.iter().map(|&c| c as f64 / m).collect() })
}

fn contingency(a: &[usize], b: &[usize]) -> Result<(BTreeMap<(usize, usize), f64>, BTreeMap<usize, f64>, BTreeMap<usize, f64>)> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("partitions of length {} and {}", a.len(), b.len())));
    }
    let mut joint = BTreeMap::new();
    let mut ma = BTreeMap::new();
    let mut mb = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0.0) += 1.0;
        *ma.entry(x).or_insert(0.0) += 1.0;
        *mb.entry(y).or_insert(0.0) += 1.0;
    }
    Ok((joint, ma, mb))
}

/// Variation of information between two partitions, in nats.
pub fn vi_distance(z: &[usize], zhat: &[usize]) -> Result<f64> {
    let (joint, ma, mb) = contingency(z, zhat)?;
    let n = z.len() as f64;
    if z.is_empty() {
        return Ok(0.0);
    }
    // H(z | zhat) + H(zhat | z) cell by cell: every term is non-negative and
    // vanishes exactly when the partitions agree.
    Ok(joint.iter().map(|(&(x, y), &c)| (c / n) * ((ma[&x] / c).ln() + (mb[&y] / c).ln())).sum())
}

/// Average over time points of the per-time VI.
pub fn time_averaged_vi(a: &LabelSequences, b: &LabelSequences) -> Result<f64> {
    if a.n_times() != b.n_times() || a.n_actors() != b.n_actors() {
        return Err(Error::Dimension("label matrices differ in shape".into()));
    }
    let t = a.n_times();
    if t == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in 0..t {
        total += vi_distance(a.at(s), b.at(s))?;
    }
    Ok(total / t as f64)
}

/// Adjusted Rand index under the permutation model. Two trivial partitions
/// that agree score 1.
pub fn adjusted_rand_index(z: &[usize], zhat: &[usize]) -> Result<f64> {
    let (joint, ma, mb) = contingency(z, zhat)?;
    let pairs = |c: f64| c * (c - 1.0) / 2.0;
    let index: f64 = joint.values().map(|&c| pairs(c)).sum();
    let sa: f64 = ma.values().map(|&c| pairs(c)).sum();
    let sb: f64 = mb.values().map(|&c| pairs(c)).sum();
    let total = pairs(z.len() as f64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if (max - expected).abs() < 1e-300 {
        // Both partitions are all-singletons or a single block.
        return Ok(if joint.len() == ma.len() && joint.len() == mb.len() { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// Mean ARI over time points.
pub fn time_averaged_ari(a: &LabelSequences, b: &LabelSequences) -> Result<f64> {
    if a.n_times() != b.n_times() || a.n_actors() != b.n_actors() {
        return Err(Error::Dimension("label matrices differ in shape".into()));
    }
    let t = a.n_times().max(1) as f64;
    let mut total = 0.0;
    for s in 0..a.n_times() {
        total += adjusted_rand_index(a.at(s), b.at(s))?;
    }
    Ok(total / t)
}

/// Lower-bound objective of a candidate partition against the
/// co-assignment probabilities (smaller is better).
pub fn partition_objective(candidate: &LabelSequences, coassign: &Coassignment) -> Result<f64> {
    let (n_times, n) = (coassign.n_times, coassign.n_actors);
    if candidate.n_times() != n_times || candidate.n_actors() != n {
        return Err(Error::Dimension("candidate and co-assignment shapes differ".into()));
    }
    let mut total = 0.0;
    for t in 0..n_times {
        let z = candidate.at(t);
        for i in 0..n {
            let (mut size, mut mass) = (0.0, 0.0);
            for j in 0..n {
                if z[j] == z[i] {
                    size += 1.0;
                    mass += coassign.get(t, i, j);
                }
            }
            total += size.ln() - 2.0 * mass.ln();
        }
    }
    Ok(total)
}

/// Index of the sampled partition minimizing the objective; ties go to the
/// larger log-likelihood, then to the earlier sample. Returns the index and
/// every candidate's objective.
pub fn select_partition(samples: &[&LabelSequences], log_likelihoods: &[f64], coassign: &Coassignment) -> Result<(usize, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples".into()));
    }
    if log_likelihoods.len() != samples.len() {
        return Err(Error::Dimension("one log-likelihood per sample is required".into()));
    }
    let objectives = samples.iter().map(|z| partition_objective(z, coassign)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for k in 1..samples.len() {
        let (a, b) = (objectives[k], objectives[best]);
        let tol = 1e-9 * a.abs().max(b.abs()).max(1.0);
        if a < b - tol || ((a - b).abs() <= tol && log_likelihoods[k] > log_likelihoods[best]) {
            best = k;
        }
    }
    Ok((best, objectives))
}

/// The rigid transform aligning one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// Row-major `p x p` orthogonal matrix applied to centered rows.
    pub rotation: Vec<f64>,
    /// Whether the configuration was degenerate and the identity used.
    pub degenerate: bool,
}

/// Centers the stacked `(T n) x p` configuration, rotates it onto the
/// centered reference and moves it to the reference centroid.
pub fn procrustes_align_one(positions: &LatentPositions, reference: &LatentPositions) -> Result<(LatentPositions, Alignment)> {
    if positions.n_times() != reference.n_times() || positions.n_actors() != reference.n_actors() || positions.dim() != reference.dim() {
        return Err(Error::Dimension("configuration and reference shapes differ".into()));
    }
    let p = reference.dim();
    let mut target = reference.as_slice().to_vec();
    let ref_center = center_in_place(&mut target, p);
    let mut source = positions.as_slice().to_vec();
    center_in_place(&mut source, p);
    let (rotation, degenerate) = match procrustes_rotation(&source, &target, p) {
        Some(q) => (q, false),
        None => (identity(p), true),
    };
    apply_rotation(&mut source, &rotation, p);
    for row in source.chunks_exact_mut(p) {
        for (v, c) in row.iter_mut().zip(&ref_center) {
            *v += c;
        }
    }
    let aligned = LatentPositions::from_vec(positions.n_times(), positions.n_actors(), p, source)?;
    Ok((aligned, Alignment { rotation, degenerate }))
}

/// Aligns every configuration to the reference.
pub fn procrustes_align(samples: &[&LatentPositions], reference: &LatentPositions) -> Result<Vec<(LatentPositions, Alignment)>> {
    samples.iter().map(|x| procrustes_align_one(x, reference)).collect()
}

/// `T x (L + 1)` table of the posterior probability of each number of
/// occupied groups.
pub fn group_count_posterior(samples: &[&LabelSequences], n_groups: usize) -> Result<Vec<f64>> {
    let first = samples.first().ok_or_else(|| Error::Empty("no samples".into()))?;
    let n_times = first.n_times();
    let mut table = vec![0.0; n_times * (n_groups + 1)];
    let w = 1.0 / samples.len() as f64;
    for z in samples {
        for t in 0..n_times {
            let k = z.n_occupied(t);
            if k > n_groups {
                return Err(Error::Label { label: k, n_groups });
            }
            table[t * (n_groups + 1) + k] += w;
        }
    }
    Ok(table)
}

/// Most probable group count at each time (smallest count on ties).
pub fn group_count_mode(table: &[f64], n_groups: usize) -> Vec<usize> {
    table
        .chunks_exact(n_groups + 1)
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Sample autocorrelations `rho_0..=rho_max_lag` with the biased
/// (divide by `N`) autocovariance.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 4 {
        return Err(Error::Argument(format!("series of length {n} is too short")));
    }
    if series.iter().all(|&x| x == series[0]) {
        return Err(Error::Undefined("series is constant".into()));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0 = dev.iter().map(|d| d * d).sum::<f64>() / n as f64;
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::Undefined("series has zero variance".into()));
    }
    Ok((0..=max_lag.min(n - 1))
        .map(|k| dev[..n - k].iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 / c0)
        .collect())
}

/// Effective sample size with Geyer's initial positive sequence, and the
/// autocorrelations up to `max_lag`.
pub fn ess_and_acf(series: &[f64], max_lag: usize) -> Result<(f64, Vec<f64>)> {
    let n = series.len();
    let rho = autocorrelation(series, n.saturating_sub(1))?;
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let gamma = rho[2 * m] + rho[2 * m + 1];
        if gamma <= 0.0 {
            break;
        }
        tau += 2.0 * gamma;
        m += 1;
    }
    let tau = tau.max(1.0 / n as f64);
    let acf = rho[..=max_lag.min(n - 1)].to_vec();
    Ok((n as f64 / tau, acf))
}

/// Rank-based area under the ROC curve with midranks for ties.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension("one score per label is required".into()));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Undefined("AUC needs both edges and non-edges".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start + 1 ..= end share their mean.
        let mid = (start + end + 1) as f64 / 2.0;
        rank_sum += mid * order[start..end].iter().filter(|&&k| labels[k]).count() as f64;
        start = end;
    }
    let (np, nn) = (positives as f64, negatives as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Posterior mean edge probabilities for every dyad `j < i` at every time,
/// in time-major, then `i`, then `j` order.
pub fn posterior_edge_probabilities(samples: &[Sample], n_actors: usize, n_times: usize) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples".into()));
    }
    let n_dyads = n_actors * n_actors.saturating_sub(1) / 2;
    let mut scores = vec![0.0; n_times * n_dyads];
    for s in samples {
        let x = require_full(&s.positions, "positions")?;
        if x.n_actors() != n_actors || x.n_times() != n_times {
            return Err(Error::Dimension("sample positions disagree with the network".into()));
        }
        let mut k = 0;
        for t in 0..n_times {
            for i in 1..n_actors {
                for j in 0..i {
                    scores[k] += edge_probability(edge_logit(x.get(t, i), x.get(t, j), s.groups.beta0));
                    k += 1;
                }
            }
        }
    }
    let m = samples.len() as f64;
    scores.iter_mut().for_each(|v| *v /= m);
    Ok(scores)
}

/// In-sample AUC of the posterior mean edge probabilities.
pub fn in_sample_auc(net: &DynamicNetwork, chain: &Chain) -> Result<f64> {
    let scores = posterior_edge_probabilities(&chain.samples, net.n_actors(), net.n_times())?;
    let mut labels = Vec::with_capacity(scores.len());
    for t in 0..net.n_times() {
        for i in 1..net.n_actors() {
            for j in 0..i {
                labels.push(net.edge(t, i, j));
            }
        }
    }
    auc(&scores, &labels)
}

/// Plot-ready parameters of one group's circle: center and radius `2 sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEllipse {
    pub group: usize,
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Group-to-group tallies between consecutive times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    /// Later time of the pair `(time - 1, time)`.
    pub time: usize,
    pub from: usize,
    pub to: usize,
    pub count: usize,
}

pub fn alluvial_flows(labels: &LabelSequences) -> Vec<Flow> {
    let mut out = Vec::new();
    for t in 1..labels.n_times() {
        let mut tally: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for i in 0..labels.n_actors() {
            *tally.entry((labels.get(t - 1, i), labels.get(t, i))).or_insert(0) += 1;
        }
        out.extend(tally.into_iter().map(|((from, to), count)| Flow { time: t, from, to, count }));
    }
    out
}

/// Everything reported about the clustering of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub coassign: Coassignment,
    pub selected: LabelSequences,
    pub selected_sample_index: usize,
    pub objective: f64,
    /// Positions of the selected sample, the alignment reference.
    pub reference_positions: LatentPositions,
    /// Mean of the aligned position draws.
    pub aligned_positions: LatentPositions,
    /// Row-major `T x (L + 1)`.
    pub group_count_posterior: Vec<f64>,
    /// Circles of the groups occupied in the selected partition.
    pub ellipses: Vec<GroupEllipse>,
    pub flows: Vec<Flow>,
    /// Groups of the selected partition with fewer than five members,
    /// as `(time, group, size)`.
    pub small_groups: Vec<(usize, usize, usize)>,
    /// Number of draws whose alignment fell back to the identity.
    pub degenerate_alignments: usize,
}

/// Selects a partition and builds every summary table from a full chain.
pub fn summarize_chain(chain: &Chain) -> Result<PartitionSummary> {
    let labels = chain_labels(chain)?;
    let positions = chain_positions(chain)?;
    if labels.is_empty() {
        return Err(Error::Empty("chain has no samples".into()));
    }
    let coassign = coassignment_probabilities(&labels)?;
    let lls: Vec<f64> = chain.samples.iter().map(|s| s.log_likelihood).collect();
    let (best, objectives) = select_partition(&labels, &lls, &coassign)?;
    let reference = positions[best].clone();
    let aligned = procrustes_align(&positions, &reference)?;
    let p = reference.dim();
    let mut mean = vec![0.0; reference.as_slice().len()];
    let mut degenerate = 0;
    for (x, a) in &aligned {
        degenerate += usize::from(a.degenerate);
        for (m, v) in mean.iter_mut().zip(x.as_slice()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= aligned.len() as f64);
    let selected = labels[best].clone();
    let groups = &chain.samples[best].groups;
    let mut used: Vec<usize> = selected.as_slice().to_vec();
    used.sort_unstable();
    used.dedup();
    let ellipses = used
        .iter()
        .map(|&g| GroupEllipse { group: g, center: groups.center(g).to_vec(), radius: 2.0 * groups.sigma2[g].sqrt() })
        .collect();
    let mut small_groups = Vec::new();
    for t in 0..selected.n_times() {
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        for &g in selected.at(t) {
            *sizes.entry(g).or_insert(0) += 1;
        }
        small_groups.extend(sizes.into_iter().filter(|&(_, c)| c < 5).map(|(g, c)| (t, g, c)));
    }
    Ok(PartitionSummary {
        group_count_posterior: group_count_posterior(&labels, groups.n_groups())?,
        flows: alluvial_flows(&selected),
        aligned_positions: LatentPositions::from_vec(reference.n_times(), reference.n_actors(), p, mean)?,
        reference_positions: reference,
        objective: objectives[best],
        selected_sample_index: best,
        selected,
        coassign,
        ellipses,
        small_groups,
        degenerate_alignments: degenerate,
    })
}
