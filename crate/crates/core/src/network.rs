//! Dynamic networks: `T` symmetric binary adjacency matrices over a fixed
//! actor set, plus the windowing and degree-filtering preprocessing steps.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A sequence of undirected, loop-free binary networks on `n` actors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicNetwork {
    n_actors: usize,
    n_times: usize,
    /// Row-major `T x n x n`, entries 0 or 1.
    adjacency: Vec<u8>,
    pub actor_names: Option<Vec<String>>,
    pub time_labels: Option<Vec<String>>,
}

impl DynamicNetwork {
    /// All-zero network.
    pub fn empty(n_actors: usize, n_times: usize) -> Result<Self> {
        if n_actors == 0 || n_times == 0 {
            return Err(Error::Argument(format!(
                "network needs at least one actor and one time step, got n = {n_actors}, T = {n_times}"
            )));
        }
        Ok(Self {
            n_actors,
            n_times,
            adjacency: vec![0; n_actors * n_actors * n_times],
            actor_names: None,
            time_labels: None,
        })
    }

    /// Builds a network from per-time adjacency rows. Each slice must be
    /// symmetric with a zero diagonal and 0/1 entries.
    pub fn from_slices(slices: &[Vec<Vec<u8>>]) -> Result<Self> {
        let n_times = slices.len();
        let n = slices.first().map_or(0, Vec::len);
        let mut net = Self::empty(n, n_times)?;
        for (t, slice) in slices.iter().enumerate() {
            if slice.len() != n || slice.iter().any(|row| row.len() != n) {
                return Err(Error::Dimension(format!("slice {t} is not {n} x {n}")));
            }
            for i in 0..n {
                if slice[i][i] != 0 {
                    return Err(Error::Argument(format!("self-loop at actor {i}, time {t}")));
                }
                for j in 0..n {
                    let v = slice[i][j];
                    if v > 1 {
                        return Err(Error::Argument(format!("entry ({i}, {j}) at time {t} is {v}")));
                    }
                    if v != slice[j][i] {
                        return Err(Error::Argument(format!("slice {t} is not symmetric at ({i}, {j})")));
                    }
                }
            }
            for i in 0..n {
                for j in 0..i {
                    if slice[i][j] == 1 {
                        net.set_edge(t, i, j, true)?;
                    }
                }
            }
        }
        Ok(net)
    }

    #[inline]
    pub fn n_actors(&self) -> usize {
        self.n_actors
    }

    #[inline]
    pub fn n_times(&self) -> usize {
        self.n_times
    }

    #[inline]
    fn index(&self, t: usize, i: usize, j: usize) -> usize {
        (t * self.n_actors + i) * self.n_actors + j
    }

    #[inline]
    pub fn edge(&self, t: usize, i: usize, j: usize) -> bool {
        self.adjacency[self.index(t, i, j)] == 1
    }

    /// Adjacency row of actor `i` at time `t`.
    #[inline]
    pub fn row(&self, t: usize, i: usize) -> &[u8] {
        let start = self.index(t, i, 0);
        &self.adjacency[start..start + self.n_actors]
    }

    /// Sets or clears the undirected edge `{i, j}` at time `t`.
    pub fn set_edge(&mut self, t: usize, i: usize, j: usize, present: bool) -> Result<()> {
        if t >= self.n_times || i >= self.n_actors || j >= self.n_actors {
            return Err(Error::Range(format!(
                "edge ({i}, {j}) at time {t} outside n = {}, T = {}",
                self.n_actors, self.n_times
            )));
        }
        if i == j {
            return Err(Error::Argument(format!("self-loop at actor {i}, time {t}")));
        }
        let v = u8::from(present);
        let a = self.index(t, i, j);
        let b = self.index(t, j, i);
        self.adjacency[a] = v;
        self.adjacency[b] = v;
        Ok(())
    }

    pub fn degree(&self, t: usize, i: usize) -> usize {
        self.row(t, i).iter().map(|&v| v as usize).sum()
    }

    pub fn n_edges(&self, t: usize) -> usize {
        (0..self.n_actors).map(|i| self.degree(t, i)).sum::<usize>() / 2
    }

    /// Fraction of dyads present, over all times.
    pub fn density(&self) -> f64 {
        let dyads = self.n_actors * (self.n_actors - 1) / 2 * self.n_times;
        if dyads == 0 {
            return 0.0;
        }
        let edges: usize = (0..self.n_times).map(|t| self.n_edges(t)).sum();
        edges as f64 / dyads as f64
    }

    /// Edges as `(t, i, j)` with `i < j`, sorted by `(t, i, j)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let n = self.n_actors;
        (0..self.n_times).flat_map(move |t| {
            (0..n).flat_map(move |i| ((i + 1)..n).filter(move |&j| self.edge(t, i, j)).map(move |j| (t, i, j)))
        })
    }

    /// Checks symmetry, zero diagonal and 0/1 entries.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.n_times {
            for i in 0..self.n_actors {
                if self.adjacency[self.index(t, i, i)] != 0 {
                    return Err(Error::Argument(format!("self-loop at actor {i}, time {t}")));
                }
                for j in 0..self.n_actors {
                    let v = self.adjacency[self.index(t, i, j)];
                    if v > 1 || v != self.adjacency[self.index(t, j, i)] {
                        return Err(Error::Argument(format!("invalid entry ({i}, {j}) at time {t}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// OR-aggregates consecutive windows of `window` time steps. The last window
/// may be shorter.
pub fn window_aggregate(net: &DynamicNetwork, window: usize) -> Result<DynamicNetwork> {
    if window == 0 {
        return Err(Error::Argument("window must be positive".into()));
    }
    let n = net.n_actors();
    let out_times = net.n_times().div_ceil(window);
    let mut out = DynamicNetwork::empty(n, out_times)?;
    for (t, i, j) in net.edges() {
        out.set_edge(t / window, i, j, true)?;
    }
    out.actor_names.clone_from(&net.actor_names);
    if let Some(labels) = &net.time_labels {
        out.time_labels = Some(
            labels
                .chunks(window)
                .map(|c| match c {
                    [only] => only.clone(),
                    [first, .., last] => format!("{first}-{last}"),
                    [] => String::new(),
                })
                .collect(),
        );
    }
    Ok(out)
}

/// Keeps actor `i` iff its degree in the original network is at least
/// `min_degree` in some time slice. Returns the restricted network and the
/// original index of every retained actor.
pub fn filter_min_degree(net: &DynamicNetwork, min_degree: usize) -> Result<(DynamicNetwork, Vec<usize>)> {
    let n = net.n_actors();
    let kept: Vec<usize> = (0..n)
        .filter(|&i| (0..net.n_times()).any(|t| net.degree(t, i) >= min_degree))
        .collect();
    if kept.is_empty() {
        return Err(Error::Empty(format!("no actor has degree >= {min_degree} in any slice")));
    }
    let mut out = DynamicNetwork::empty(kept.len(), net.n_times())?;
    for t in 0..net.n_times() {
        for (a, &i) in kept.iter().enumerate() {
            for (b, &j) in kept.iter().enumerate().take(a) {
                if net.edge(t, i, j) {
                    out.set_edge(t, a, b, true)?;
                }
            }
        }
    }
    out.actor_names = net.actor_names.as_ref().map(|names| kept.iter().map(|&i| names[i].clone()).collect());
    out.time_labels.clone_from(&net.time_labels);
    Ok((out, kept))
}
