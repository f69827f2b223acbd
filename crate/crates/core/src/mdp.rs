//! MDPs, labelings and memory allocations.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

pub const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum VertexKind {
    Nondeterministic,
    Stochastic,
}

/// A finite MDP `(V, E, p)`. Vertices are dense indices; successor lists are
/// sorted and duplicate-free. A graph is an MDP without stochastic vertices.
///
/// Construction does not enforce well-formedness; call [`validate_mdp`] to get
/// a full list of violations.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    names: Vec<String>,
    kinds: Vec<VertexKind>,
    successors: Vec<Vec<usize>>,
    prob: Vec<Option<Vec<(usize, f64)>>>,
}

#[derive(Debug, Default)]
pub struct MdpBuilder {
    names: Vec<String>,
    kinds: Vec<VertexKind>,
    edges: Vec<(usize, usize)>,
    prob: Vec<Option<Vec<(usize, f64)>>>,
}

impl MdpBuilder {
    pub fn add_vertex(&mut self, name: impl Into<String>, kind: VertexKind) -> usize {
        self.names.push(name.into());
        self.kinds.push(kind);
        self.prob.push(None);
        self.names.len() - 1
    }

    pub fn add_edge(&mut self, from: usize, to: usize) -> &mut Self {
        self.edges.push((from, to));
        self
    }

    pub fn set_prob(&mut self, vertex: usize, dist: Vec<(usize, f64)>) -> &mut Self {
        self.prob[vertex] = Some(dist);
        self
    }

    pub fn build(self) -> Result<Mdp> {
        let n = self.names.len();
        let mut successors = vec![Vec::new(); n];
        for (a, b) in self.edges {
            if a >= n || b >= n {
                return Err(Error::InvalidModel(format!("edge ({a},{b}) references an unknown vertex")));
            }
            successors[a].push(b);
        }
        for s in &mut successors {
            s.sort_unstable();
            s.dedup();
        }
        for dist in self.prob.iter().flatten() {
            if let Some(&(u, _)) = dist.iter().find(|(u, _)| *u >= n) {
                return Err(Error::InvalidModel(format!("distribution references unknown vertex {u}")));
            }
        }
        Ok(Mdp { names: self.names, kinds: self.kinds, successors, prob: self.prob })
    }
}

impl Mdp {
    pub fn builder() -> MdpBuilder {
        MdpBuilder::default()
    }

    /// A graph with the given vertex names and edges.
    pub fn graph<S: Into<String>>(names: impl IntoIterator<Item = S>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut b = Self::builder();
        for name in names {
            b.add_vertex(name, VertexKind::Nondeterministic);
        }
        for &(a, c) in edges {
            b.add_edge(a, c);
        }
        b.build()
    }

    pub fn num_vertices(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn kind(&self, v: usize) -> VertexKind {
        self.kinds[v]
    }

    pub fn is_stochastic(&self, v: usize) -> bool {
        self.kinds[v] == VertexKind::Stochastic
    }

    pub fn is_graph(&self) -> bool {
        self.kinds.iter().all(|k| *k == VertexKind::Nondeterministic)
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.successors[v]
    }

    pub fn num_edges(&self) -> usize {
        self.successors.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.successors.iter().enumerate().flat_map(|(v, s)| s.iter().map(move |&u| (v, u)))
    }

    pub fn distribution(&self, v: usize) -> Option<&[(usize, f64)]> {
        self.prob[v].as_deref()
    }

    /// `p(v)(u)`; zero for nondeterministic `v` or when `u` is not listed.
    pub fn prob(&self, v: usize, u: usize) -> f64 {
        self.prob[v].as_ref().map_or(0.0, |d| d.iter().filter(|(w, _)| *w == u).map(|(_, p)| p).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rule {
    MissingOutgoingEdge,
    MissingDistribution,
    UnexpectedDistribution,
    DistributionSupport,
    DistributionSum,
    NegativeProbability,
    RowSum,
    StrategySupport,
    NegativeEntry,
    MarginalConstraint,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::MissingOutgoingEdge => "missing outgoing edge",
            Rule::MissingDistribution => "missing distribution",
            Rule::UnexpectedDistribution => "unexpected distribution",
            Rule::DistributionSupport => "distribution support",
            Rule::DistributionSum => "distribution sum",
            Rule::NegativeProbability => "negative probability",
            Rule::RowSum => "row sum",
            Rule::StrategySupport => "support",
            Rule::NegativeEntry => "negative entry",
            Rule::MarginalConstraint => "marginal constraint",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Vertex id, or `vertex#memory` for augmented vertices.
    pub subject: String,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.subject, self.rule, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub(crate) fn push(&mut self, subject: impl Into<String>, rule: Rule, detail: impl Into<String>) {
        self.violations.push(Violation { subject: subject.into(), rule, detail: detail.into() });
    }

    /// Converts a failed report into an error listing every violation.
    pub fn into_result(self, wrap: fn(String) -> Error) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let msg = self.violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        Err(wrap(msg))
    }
}

pub fn validate_mdp(mdp: &Mdp) -> ValidationReport {
    let mut report = ValidationReport::default();
    for v in 0..mdp.num_vertices() {
        let name = mdp.name(v);
        if mdp.successors(v).is_empty() {
            report.push(name, Rule::MissingOutgoingEdge, "vertex has no successors");
        }
        match (mdp.kind(v), mdp.distribution(v)) {
            (VertexKind::Nondeterministic, Some(_)) => {
                report.push(name, Rule::UnexpectedDistribution, "nondeterministic vertex carries a distribution")
            }
            (VertexKind::Stochastic, None) => {
                report.push(name, Rule::MissingDistribution, "stochastic vertex has no distribution")
            }
            (VertexKind::Stochastic, Some(dist)) => {
                let mut total = 0.0;
                for &(u, p) in dist {
                    if p < 0.0 || !p.is_finite() {
                        report.push(name, Rule::NegativeProbability, format!("p({name})({}) = {p}", mdp.name(u)));
                    }
                    if p > 0.0 && mdp.successors(v).binary_search(&u).is_err() {
                        report.push(name, Rule::DistributionSupport, format!("{} is not a successor", mdp.name(u)));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > PROB_TOLERANCE {
                    report.push(name, Rule::DistributionSum, format!("sums to {total}"));
                }
            }
            (VertexKind::Nondeterministic, None) => {}
        }
    }
    report
}

/// A labeling `𝓛: V → L` with dense label ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    of_vertex: Vec<usize>,
    names: Vec<String>,
}

impl Labeling {
    /// Each vertex its own label, named after the vertex.
    pub fn identity(mdp: &Mdp) -> Self {
        Self { of_vertex: (0..mdp.num_vertices()).collect(), names: mdp.names().to_vec() }
    }

    /// Builds a labeling from per-vertex label names; ids follow first appearance.
    pub fn from_names<S: AsRef<str>>(per_vertex: &[S]) -> Self {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let mut names = Vec::new();
        let of_vertex = per_vertex
            .iter()
            .map(|s| {
                let s = s.as_ref();
                *ids.entry(s).or_insert_with(|| {
                    names.push(s.to_string());
                    names.len() - 1
                })
            })
            .collect();
        Self { of_vertex, names }
    }

    pub fn from_ids(of_vertex: Vec<usize>, names: Vec<String>) -> Result<Self> {
        if let Some(&bad) = of_vertex.iter().find(|&&l| l >= names.len()) {
            return Err(Error::InvalidModel(format!("label id {bad} out of range {}", names.len())));
        }
        let mut used = vec![false; names.len()];
        for &l in &of_vertex {
            used[l] = true;
        }
        if let Some(unused) = used.iter().position(|u| !u) {
            return Err(Error::InvalidModel(format!("label {} is not used by any vertex", names[unused])));
        }
        Ok(Self { of_vertex, names })
    }

    pub fn label(&self, v: usize) -> usize {
        self.of_vertex[v]
    }

    pub fn num_labels(&self) -> usize {
        self.names.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.of_vertex.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Memory budget `k_v ≥ 1` per vertex; memory states of `v` are `0..k_v`
/// internally and `1..=k_v` in files and display.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryAllocation {
    counts: Vec<usize>,
}

impl MemoryAllocation {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if let Some(v) = counts.iter().position(|&k| k == 0) {
            return Err(Error::InvalidModel(format!("vertex {v} has zero memory states")));
        }
        Ok(Self { counts })
    }

    pub fn memoryless(num_vertices: usize) -> Self {
        Self { counts: vec![1; num_vertices] }
    }

    pub fn get(&self, v: usize) -> usize {
        self.counts[v]
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
}
