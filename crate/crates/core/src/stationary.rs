//! Invariant distributions of BSCCs and projections onto labels.

use crate::bscc::LocalChain;
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Lu};
use crate::mdp::Labeling;
use crate::strategy::{AugmentedSpace, InducedChain};

/// Stationary distribution of one BSCC, aligned with its member list.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantDistribution {
    pub states: Vec<usize>,
    pub probs: Vec<f64>,
}

impl InvariantDistribution {
    /// Expands to a distribution over all `n` states (zero outside the BSCC).
    pub fn to_full(&self, n: usize) -> Vec<f64> {
        let mut full = vec![0.0; n];
        for (&s, &p) in self.states.iter().zip(&self.probs) {
            full[s] = p;
        }
        full
    }
}

/// The stationarity system `(I − P)ᵀ z = 0` with its last row replaced by
/// `Σ z = 1`. The right-hand side is the last unit vector.
pub(crate) fn stationarity_matrix(p: &DenseMatrix) -> DenseMatrix {
    let n = p.rows();
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = if i == j { 1.0 } else { 0.0 } - p[(j, i)];
        }
    }
    for x in a.row_mut(n - 1) {
        *x = 1.0;
    }
    a
}

/// Solves for the invariant distribution of a dense irreducible stochastic
/// matrix, returning the factorization for reuse by adjoint solves.
pub(crate) fn solve_stationary(p: &DenseMatrix) -> Result<(Vec<f64>, Lu)> {
    let n = p.rows();
    let lu = stationarity_matrix(p).lu().map_err(|e| Error::Singular(format!("stationarity system: {e}")))?;
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let z = lu.solve(&rhs);
    Ok((z, lu))
}

pub fn invariant_distribution(chain: &InducedChain, bscc: &[usize]) -> Result<InvariantDistribution> {
    let local = LocalChain::new(chain, bscc)?;
    let (probs, _) = solve_stationary(&local.dense())?;
    Ok(InvariantDistribution { states: bscc.to_vec(), probs })
}

/// Pushes a distribution over augmented indices onto labels.
pub fn label_marginal(dist: &[f64], space: &AugmentedSpace, labeling: &Labeling) -> Vec<f64> {
    let mut out = vec![0.0; labeling.num_labels()];
    for (a, &p) in dist.iter().enumerate() {
        out[labeling.label(space.vertex_of(a))] += p;
    }
    out
}

/// Pushes a distribution over augmented indices onto MDP vertices.
pub fn vertex_marginal(dist: &[f64], space: &AugmentedSpace) -> Vec<f64> {
    let mut out = vec![0.0; space.num_vertices()];
    for (a, &p) in dist.iter().enumerate() {
        out[space.vertex_of(a)] += p;
    }
    out
}
