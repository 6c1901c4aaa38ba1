//! The fully-connected network with a diagonal factor on every edge.
//!
//! A model of order `N` holds one core per data mode and one diagonal vector
//! per core pair `(t, l)`, `t < l`. Core `k` has order `N`: its mode `k` is
//! the physical mode of size `I_k` and its mode `j != k` is the bond to core
//! `j`, of size `R_{min(j,k), max(j,k)}`. The represented tensor is the sum
//! over all bond indices of the product of core entries and diagonal
//! entries.
//!
//! Cores and edges are numbered from zero throughout the API.

mod contraction;
mod environment;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use contraction::{core_legs, Leg};
pub use environment::{dense_edge_matrix, env_edge, env_edge_with, env_matrix_core, EdgeEnvironment, EdgeStrategy};

use crate::error::{invalid, Error, Result};
use crate::tensor::DenseTensor;
use contraction::{contract_all, Labeled};

/// Edge weights `R_{t,l}` for all core pairs, stored as the upper triangle in
/// lexicographic order `(0,1), (0,2), ..., (N-2,N-1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RankMatrix {
    order: usize,
    entries: Vec<usize>,
}

fn edge_count(order: usize) -> usize {
    order * order.saturating_sub(1) / 2
}

impl RankMatrix {
    pub fn new(order: usize, entries: Vec<usize>) -> Result<Self> {
        if order < 2 {
            return Err(invalid!("a network needs at least two cores, got {order}"));
        }
        if entries.len() != edge_count(order) {
            return Err(invalid!(
                "order {order} has {} edges, got {} ranks",
                edge_count(order),
                entries.len()
            ));
        }
        if entries.contains(&0) {
            return Err(invalid!("ranks must be at least 1: {entries:?}"));
        }
        Ok(Self { order, entries })
    }

    pub fn filled(order: usize, rank: usize) -> Result<Self> {
        Self::new(order, vec![rank; edge_count(order)])
    }

    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> usize) -> Result<Self> {
        let entries = edge_pairs(order).map(|(t, l)| f(t, l)).collect();
        Self::new(order, entries)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn edge_count(&self) -> usize {
        self.entries.len()
    }

    /// Position of edge `(t, l)` in the lexicographic edge list; order of the
    /// pair is irrelevant.
    pub fn edge_index(&self, t: usize, l: usize) -> usize {
        let (t, l) = (t.min(l), t.max(l));
        assert!(t != l && l < self.order, "invalid edge ({t}, {l}) for order {}", self.order);
        t * (2 * self.order - t - 1) / 2 + (l - t - 1)
    }

    pub fn get(&self, t: usize, l: usize) -> usize {
        self.entries[self.edge_index(t, l)]
    }

    pub fn set(&mut self, t: usize, l: usize, rank: usize) -> Result<()> {
        if rank == 0 {
            return Err(invalid!("rank of edge ({t}, {l}) must be at least 1"));
        }
        if t == l || t.max(l) >= self.order {
            return Err(invalid!("invalid edge ({t}, {l}) for order {}", self.order));
        }
        let idx = self.edge_index(t, l);
        self.entries[idx] = rank;
        Ok(())
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> {
        edge_pairs(self.order)
    }
}

impl fmt::Display for RankMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in 0..self.order {
            let row: Vec<String> = (0..self.order)
                .map(|l| if l > t { self.get(t, l).to_string() } else { "-".into() })
                .collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// All pairs `t < l` below `order`, lexicographically.
pub fn edge_pairs(order: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..order).flat_map(move |t| (t + 1..order).map(move |l| (t, l)))
}

/// Shape of core `k` for the given data dimensions and ranks.
pub fn core_shape(dims: &[usize], ranks: &RankMatrix, k: usize) -> Vec<usize> {
    (0..dims.len())
        .map(|j| if j == k { dims[k] } else { ranks.get(j, k) })
        .collect()
}

/// Network topology with edge weights. Two structures are equal exactly when
/// their rank matrices are equal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TnStructure {
    ranks: RankMatrix,
    edges: Vec<(usize, usize, usize)>,
}

impl TnStructure {
    pub fn from_ranks(ranks: RankMatrix) -> Self {
        let edges = ranks
            .edges()
            .map(|(t, l)| (t, l, ranks.get(t, l)))
            .filter(|&(_, _, r)| r > 1)
            .collect();
        Self { ranks, edges }
    }

    pub fn rank_matrix(&self) -> &RankMatrix {
        &self.ranks
    }

    /// Edges of weight greater than one as `(t, l, weight)`.
    pub fn edges(&self) -> &[(usize, usize, usize)] {
        &self.edges
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvdInsTnModel {
    dims: Vec<usize>,
    ranks: RankMatrix,
    cores: Vec<DenseTensor>,
    diagonals: Vec<Vec<f64>>,
}

impl SvdInsTnModel {
    /// Assembles a model; `diagonals` follow the lexicographic edge order.
    pub fn new(
        dims: Vec<usize>,
        ranks: RankMatrix,
        cores: Vec<DenseTensor>,
        diagonals: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = dims.len();
        if ranks.order() != n {
            return Err(Error::Invariant(format!(
                "rank matrix order {} does not match {n} data modes",
                ranks.order()
            )));
        }
        if dims.contains(&0) {
            return Err(invalid!("dimensions must be positive: {dims:?}"));
        }
        if cores.len() != n {
            return Err(Error::Invariant(format!("expected {n} cores, got {}", cores.len())));
        }
        for (k, core) in cores.iter().enumerate() {
            let expected = core_shape(&dims, &ranks, k);
            if core.shape() != expected.as_slice() {
                return Err(Error::Invariant(format!(
                    "core {k} has shape {:?}, expected {expected:?}",
                    core.shape()
                )));
            }
        }
        if diagonals.len() != ranks.edge_count() {
            return Err(Error::Invariant(format!(
                "expected {} diagonal factors, got {}",
                ranks.edge_count(),
                diagonals.len()
            )));
        }
        for ((t, l), s) in ranks.edges().zip(&diagonals) {
            if s.len() != ranks.get(t, l) {
                return Err(Error::Invariant(format!(
                    "diagonal ({t}, {l}) has length {}, rank is {}",
                    s.len(),
                    ranks.get(t, l)
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(invalid!("diagonal ({t}, {l}) has non-finite entries"));
            }
        }
        Ok(Self {
            dims,
            ranks,
            cores,
            diagonals,
        })
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ranks(&self) -> &RankMatrix {
        &self.ranks
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &DenseTensor {
        &self.cores[k]
    }

    /// Diagonal vectors in lexicographic edge order.
    pub fn diagonals(&self) -> &[Vec<f64>] {
        &self.diagonals
    }

    pub fn diagonal(&self, t: usize, l: usize) -> &[f64] {
        &self.diagonals[self.ranks.edge_index(t, l)]
    }

    pub(crate) fn replace_core(&mut self, k: usize, core: DenseTensor) {
        assert_eq!(core.shape(), self.cores[k].shape(), "core {k} shape change");
        self.cores[k] = core;
    }

    pub(crate) fn replace_diagonal(&mut self, t: usize, l: usize, s: Vec<f64>) {
        let e = self.ranks.edge_index(t, l);
        assert_eq!(s.len(), self.diagonals[e].len(), "diagonal ({t}, {l}) length change");
        self.diagonals[e] = s;
    }

    /// Copy with the diagonal on `(t, l)` replaced by `s` of the same length.
    pub fn with_diagonal(&self, t: usize, l: usize, s: Vec<f64>) -> Result<Self> {
        if t >= l || l >= self.order() {
            return Err(invalid!("invalid edge ({t}, {l})"));
        }
        if s.len() != self.ranks.get(t, l) {
            return Err(invalid!(
                "diagonal ({t}, {l}) needs {} entries, got {}",
                self.ranks.get(t, l),
                s.len()
            ));
        }
        let mut out = self.clone();
        out.replace_diagonal(t, l, s);
        Ok(out)
    }

    /// Copy representing `alpha` times this model; the factor goes into core 0.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.cores[0] = out.cores[0].scaled(alpha);
        out
    }

    /// Cores with diagonal factors multiplied in. Each diagonal goes into the
    /// core with the larger index unless that core is `exclude`, in which
    /// case it goes into the other endpoint. `skip` names an edge whose
    /// diagonal is left out entirely.
    pub(crate) fn absorbed_cores(
        &self,
        exclude: Option<usize>,
        skip: Option<(usize, usize)>,
    ) -> Vec<DenseTensor> {
        let mut cores = self.cores.clone();
        for ((t, l), s) in self.ranks.edges().zip(&self.diagonals) {
            if skip == Some((t, l)) {
                continue;
            }
            if exclude == Some(l) {
                cores[t].scale_mode(l, s);
            } else {
                cores[l].scale_mode(t, s);
            }
        }
        cores
    }

    fn labeled(&self, cores: Vec<DenseTensor>, skip_core: Option<usize>) -> Vec<Labeled> {
        let n = self.order();
        cores
            .into_iter()
            .enumerate()
            .filter(|(k, _)| Some(*k) != skip_core)
            .map(|(k, c)| Labeled::new(c, core_legs(n, k)))
            .collect()
    }
}

/// The represented tensor: every diagonal is merged into a core and the
/// resulting fully-connected network is contracted.
pub fn evaluate(model: &SvdInsTnModel) -> DenseTensor {
    let n = model.order();
    let items = model.labeled(model.absorbed_cores(None, None), None);
    let result = contract_all(items).expect("a model has at least two cores");
    let phys: Vec<Leg> = (0..n).map(Leg::Phys).collect();
    result.arrange(&phys)
}

/// Deletes every index of edge `(t, l)` not listed in `keep`, together with
/// the matching slices of cores `t` and `l`.
pub fn prune_edge(model: &SvdInsTnModel, t: usize, l: usize, keep: &[usize]) -> Result<SvdInsTnModel> {
    if t >= l || l >= model.order() {
        return Err(invalid!("invalid edge ({t}, {l}) for order {}", model.order()));
    }
    let rank = model.ranks.get(t, l);
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return Err(Error::DegenerateRank { t, l });
    }
    if let Some(&bad) = keep.iter().find(|&&i| i >= rank) {
        return Err(invalid!("index {bad} out of range for rank {rank} on edge ({t}, {l})"));
    }
    if keep.len() == rank {
        return Ok(model.clone());
    }
    let mut out = model.clone();
    out.cores[t] = model.cores[t].select_mode(l, &keep)?;
    out.cores[l] = model.cores[l].select_mode(t, &keep)?;
    let e = model.ranks.edge_index(t, l);
    out.diagonals[e] = keep.iter().map(|&i| model.diagonals[e][i]).collect();
    out.ranks.set(t, l, keep.len())?;
    Ok(out)
}

pub fn structure_of(model: &SvdInsTnModel) -> TnStructure {
    TnStructure::from_ranks(model.ranks.clone())
}

/// A network stored as cores only: diagonals merged in and weight-one bonds
/// removed from the core shapes.
#[derive(Clone, Debug)]
pub struct SqueezedNetwork {
    dims: Vec<usize>,
    structure: TnStructure,
    cores: Vec<DenseTensor>,
    legs: Vec<Vec<Leg>>,
}

impl SqueezedNetwork {
    pub fn structure(&self) -> &TnStructure {
        &self.structure
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn legs(&self, k: usize) -> &[Leg] {
        &self.legs[k]
    }

    pub fn param_count(&self) -> usize {
        self.cores.iter().map(DenseTensor::len).sum()
    }

    pub fn evaluate(&self) -> DenseTensor {
        let items = self
            .cores
            .iter()
            .zip(&self.legs)
            .map(|(c, l)| Labeled::new(c.clone(), l.clone()))
            .collect();
        let result = contract_all(items).expect("at least two cores");
        let phys: Vec<Leg> = (0..self.dims.len()).map(Leg::Phys).collect();
        result.arrange(&phys)
    }
}

pub fn squeeze_rank_one_edges(model: &SvdInsTnModel) -> SqueezedNetwork {
    let n = model.order();
    let mut cores = Vec::with_capacity(n);
    let mut legs = Vec::with_capacity(n);
    for (k, core) in model.absorbed_cores(None, None).into_iter().enumerate() {
        let kept: Vec<(Leg, usize)> = core_legs(n, k)
            .into_iter()
            .zip(core.shape().iter().copied())
            .filter(|&(leg, d)| matches!(leg, Leg::Phys(_)) || d > 1)
            .collect();
        let shape: Vec<usize> = kept.iter().map(|&(_, d)| d).collect();
        // Dropping size-one modes leaves the linear layout untouched.
        cores.push(core.reshape(&shape).expect("same element count"));
        legs.push(kept.into_iter().map(|(leg, _)| leg).collect());
    }
    SqueezedNetwork {
        dims: model.dims.clone(),
        structure: structure_of(model),
        cores,
        legs,
    }
}

/// Number of core entries after merging diagonals and dropping weight-one
/// bonds: `Σ_k I_k ∏_{j≠k} R_{j,k}`.
pub fn param_count(model: &SvdInsTnModel) -> usize {
    (0..model.order())
        .map(|k| core_shape(&model.dims, &model.ranks, k).iter().product::<usize>())
        .sum()
}

/// Compression ratio in percent: stored core entries over data entries.
pub fn compression_ratio(model: &SvdInsTnModel, data: &DenseTensor) -> f64 {
    compression_ratio_from_counts(param_count(model), data.len())
}

pub fn compression_ratio_from_counts(core_entries: usize, data_entries: usize) -> f64 {
    core_entries as f64 / data_entries as f64 * 100.0
}
