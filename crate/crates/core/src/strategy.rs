//! Augmented vertex spaces, finite-memory randomized strategies and the
//! Markov chains they induce.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::mdp::{Labeling, Mdp, MemoryAllocation, Rule, ValidationReport, PROB_TOLERANCE};

/// An augmented vertex `(v, m)` with a zero-based memory state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AugVertex {
    pub vertex: usize,
    pub memory: usize,
}

/// The set of augmented vertices, indexed densely by vertex id then memory state.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSpace {
    offsets: Vec<usize>,
    members: Vec<AugVertex>,
    names: Vec<String>,
    /// Augmented successors of each augmented vertex, sorted.
    successors: Vec<Vec<usize>>,
}

pub fn build_augmented_space(mdp: &Mdp, alloc: &MemoryAllocation) -> Result<AugmentedSpace> {
    if alloc.len() != mdp.num_vertices() {
        return Err(Error::InvalidModel(format!(
            "memory allocation covers {} vertices, model has {}",
            alloc.len(),
            mdp.num_vertices()
        )));
    }
    let mut offsets = Vec::with_capacity(mdp.num_vertices() + 1);
    let mut members = Vec::new();
    let mut names = Vec::new();
    for v in 0..mdp.num_vertices() {
        offsets.push(members.len());
        for m in 0..alloc.get(v) {
            members.push(AugVertex { vertex: v, memory: m });
            names.push(format!("{}#{}", mdp.name(v), m + 1));
        }
    }
    offsets.push(members.len());
    let successors = members
        .iter()
        .map(|a| mdp.successors(a.vertex).iter().flat_map(|&u| offsets[u]..offsets[u + 1]).collect())
        .collect();
    Ok(AugmentedSpace { offsets, members, names, successors })
}

impl AugmentedSpace {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn get(&self, idx: usize) -> AugVertex {
        self.members[idx]
    }

    pub fn vertex_of(&self, idx: usize) -> usize {
        self.members[idx].vertex
    }

    pub fn index(&self, vertex: usize, memory: usize) -> Option<usize> {
        let idx = self.offsets[vertex] + memory;
        (idx < self.offsets[vertex + 1]).then_some(idx)
    }

    /// Augmented indices belonging to `vertex`.
    pub fn copies(&self, vertex: usize) -> std::ops::Range<usize> {
        self.offsets[vertex]..self.offsets[vertex + 1]
    }

    /// `vertex#memory` with one-based memory.
    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn index_of_name(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn successors(&self, idx: usize) -> &[usize] {
        &self.successors[idx]
    }

    pub fn num_edges(&self) -> usize {
        self.successors.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.successors.iter().enumerate().flat_map(|(a, s)| s.iter().map(move |&b| (a, b)))
    }

    pub fn is_edge(&self, from: usize, to: usize) -> bool {
        self.successors[from].binary_search(&to).is_ok()
    }
}

/// A row-stochastic map over augmented indices; rows are sparse and sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct FrStrategy {
    rows: Vec<Vec<(usize, f64)>>,
}

impl FrStrategy {
    /// Normalizes each row: sorts by target and merges duplicates.
    pub fn from_rows(mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(t, p) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == t => last.1 += p,
                    _ => merged.push((t, p)),
                }
            }
            *row = merged;
        }
        Self { rows }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let rows = (0..m.rows())
            .map(|i| m.row(i).iter().enumerate().filter(|(_, p)| **p != 0.0).map(|(j, &p)| (j, p)).collect())
            .collect();
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, idx: usize) -> &[(usize, f64)] {
        &self.rows[idx]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        let row = &self.rows[from];
        row.binary_search_by_key(&to, |e| e.0).map_or(0.0, |i| row[i].1)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.rows.len();
        let mut m = DenseMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                m[(i, j)] += p;
            }
        }
        m
    }
}

pub fn validate_strategy(space: &AugmentedSpace, sigma: &FrStrategy, mdp: &Mdp) -> ValidationReport {
    let mut report = ValidationReport::default();
    if sigma.len() != space.len() {
        report.push(
            "strategy",
            Rule::RowSum,
            format!("strategy has {} rows, space has {} augmented vertices", sigma.len(), space.len()),
        );
        return report;
    }
    for a in 0..space.len() {
        let name = space.name(a);
        let row = sigma.row(a);
        let mut total = 0.0;
        for &(t, p) in row {
            if t >= space.len() {
                report.push(name, Rule::StrategySupport, format!("target index {t} out of range"));
                continue;
            }
            if p < 0.0 || !p.is_finite() {
                report.push(name, Rule::NegativeEntry, format!("σ({name})({}) = {p}", space.name(t)));
            }
            if p != 0.0 && !space.is_edge(a, t) {
                report.push(name, Rule::StrategySupport, format!("{} is not an augmented successor", space.name(t)));
            }
            total += p;
        }
        if (total - 1.0).abs() > PROB_TOLERANCE {
            report.push(name, Rule::RowSum, format!("sums to {total}"));
        }
        let v = space.vertex_of(a);
        if mdp.is_stochastic(v) {
            for &u in mdp.successors(v) {
                let marginal: f64 = space.copies(u).map(|b| sigma.get(a, b)).sum();
                let want = mdp.prob(v, u);
                if (marginal - want).abs() > PROB_TOLERANCE {
                    report.push(
                        name,
                        Rule::MarginalConstraint,
                        format!("mass {marginal} to {} but p = {want}", mdp.name(u)),
                    );
                }
            }
        }
    }
    report
}

/// The chain `D^σ` on augmented vertices, with each state's label.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedChain {
    rows: Vec<Vec<(usize, f64)>>,
    labels: Vec<usize>,
    num_labels: usize,
}

pub fn induced_chain(space: &AugmentedSpace, sigma: &FrStrategy, labeling: &Labeling) -> InducedChain {
    let labels = (0..space.len()).map(|a| labeling.label(space.vertex_of(a))).collect();
    InducedChain { rows: sigma.rows().to_vec(), labels, num_labels: labeling.num_labels() }
}

impl InducedChain {
    /// A chain given directly by sparse rows and state labels.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, labels: Vec<usize>, num_labels: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), got: labels.len() });
        }
        if labels.iter().any(|&l| l >= num_labels) {
            return Err(Error::InvalidModel("state label out of range".into()));
        }
        let rows = FrStrategy::from_rows(rows).rows;
        Ok(Self { rows, labels, num_labels })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, s: usize) -> &[(usize, f64)] {
        &self.rows[s]
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        let row = &self.rows[from];
        row.binary_search_by_key(&to, |e| e.0).map_or(0.0, |i| row[i].1)
    }

    pub fn label(&self, s: usize) -> usize {
        self.labels[s]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn to_dense(&self) -> DenseMatrix {
        FrStrategy { rows: self.rows.clone() }.to_dense()
    }

    /// Successor indices with strictly positive probability.
    pub fn positive_successors(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[s].iter().filter(|e| e.1 > 0.0).map(|e| e.0)
    }
}
