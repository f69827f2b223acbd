//! Renewal-time moments: for a run started in `v`, the number of steps until
//! a state carrying the label of `v` is visited again.
//!
//! Per label `ℓ`, the expected hitting time `x` of an `ℓ`-labeled state solves
//! `(I − P_TT) x_T = 1` over the states `T` not labeled `ℓ`, and the expected
//! squared hitting time solves `(I − P_TT) y_T = 1 + 2 P_TT x_T = 2 x_T − 1`
//! with the same matrix, so one factorization serves both.

use serde::Serialize;

use crate::bscc::LocalChain;
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Lu};
use crate::stationary::{solve_stationary, stationarity_matrix, InvariantDistribution};
use crate::strategy::InducedChain;

pub(crate) struct LabelSystem {
    /// Local states whose label differs from this one.
    pub others: Vec<usize>,
    /// Factorization of `I − P_TT`; `None` when `others` is empty.
    pub lu: Option<Lu>,
    /// Hitting-time moments over all local states (zero on labeled states).
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Every intermediate of the renewal computation for one BSCC, kept for the
/// reverse pass.
pub(crate) struct RenewalForward {
    pub z: Vec<f64>,
    pub z_lu: Lu,
    pub label_mass: Vec<f64>,
    pub systems: Vec<Option<LabelSystem>>,
    /// `𝔼[RT | Init = v]` and `𝔼[RT² | Init = v]`.
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    /// `𝔼[RT | 𝓛(Init) = ℓ]` and `𝔼[RT² | 𝓛(Init) = ℓ]`; zero for absent labels.
    pub label_m1: Vec<f64>,
    pub label_m2: Vec<f64>,
}

impl RenewalForward {
    pub fn compute(local: &LocalChain) -> Result<Self> {
        let p = local.dense();
        let (z, z_lu) = solve_stationary(&p)?;
        Self::with_invariant(local, z, z_lu)
    }

    fn with_invariant(local: &LocalChain, z: Vec<f64>, z_lu: Lu) -> Result<Self> {
        let n = local.len();
        let num_labels = local.num_labels;
        let labels = &local.labels;
        let mut label_mass = vec![0.0; num_labels];
        let mut present = vec![false; num_labels];
        for (v, &l) in labels.iter().enumerate() {
            label_mass[l] += z[v];
            present[l] = true;
        }

        let mut systems = Vec::with_capacity(num_labels);
        for (l, &here) in present.iter().enumerate() {
            if !here {
                systems.push(None);
                continue;
            }
            let others: Vec<usize> = (0..n).filter(|&v| labels[v] != l).collect();
            let mut pos = vec![usize::MAX; n];
            for (i, &v) in others.iter().enumerate() {
                pos[v] = i;
            }
            let mut x = vec![0.0; n];
            let mut y = vec![0.0; n];
            let lu = if others.is_empty() {
                None
            } else {
                let k = others.len();
                let mut a = DenseMatrix::zeros(k, k);
                for (i, &vi) in others.iter().enumerate() {
                    for &(u, q) in &local.succ[vi] {
                        if labels[u] != l {
                            a[(i, pos[u])] -= q;
                        }
                    }
                    a[(i, i)] += 1.0;
                }
                let lu = a.lu().map_err(|_| {
                    Error::Singular(format!("label {l} is not reached with probability 1 from every state"))
                })?;
                let xt = lu.solve(&vec![1.0; k]);
                let rhs: Vec<f64> = xt.iter().map(|x| 2.0 * x - 1.0).collect();
                let yt = lu.solve(&rhs);
                for (i, &v) in others.iter().enumerate() {
                    x[v] = xt[i];
                    y[v] = yt[i];
                }
                Some(lu)
            };
            systems.push(Some(LabelSystem { others, lu, x, y }));
        }

        let mut m1 = vec![0.0; n];
        let mut m2 = vec![0.0; n];
        for v in 0..n {
            let sys = systems[labels[v]].as_ref().expect("label of a member is present");
            let (mut a, mut b) = (1.0, 1.0);
            for &(u, q) in &local.succ[v] {
                a += q * sys.x[u];
                b += q * (2.0 * sys.x[u] + sys.y[u]);
            }
            m1[v] = a;
            m2[v] = b;
        }

        let mut label_m1 = vec![0.0; num_labels];
        let mut label_m2 = vec![0.0; num_labels];
        for v in 0..n {
            label_m1[labels[v]] += z[v] * m1[v];
            label_m2[labels[v]] += z[v] * m2[v];
        }
        for l in 0..num_labels {
            if label_mass[l] > 0.0 {
                label_m1[l] /= label_mass[l];
                label_m2[l] /= label_mass[l];
            } else {
                label_m1[l] = 0.0;
                label_m2[l] = 0.0;
            }
        }

        Ok(Self { z, z_lu, label_mass, systems, m1, m2, label_m1, label_m2 })
    }

    pub fn vertex_variance(&self, v: usize) -> f64 {
        self.m2[v] - self.m1[v] * self.m1[v]
    }

    pub fn label_variance(&self, l: usize) -> f64 {
        if self.label_mass[l] > 0.0 {
            self.label_m2[l] - self.label_m1[l] * self.label_m1[l]
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalStats {
    /// Global indices of the BSCC members, in local order.
    pub states: Vec<usize>,
    /// `x[ℓ][v]`: expected steps from `v` to an `ℓ`-labeled state (empty for absent labels).
    pub hitting: Vec<Vec<f64>>,
    /// `y[ℓ][v]`: expected squared steps.
    pub hitting_sq: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub second_moment: Vec<f64>,
    /// `𝔼[RT²] − 𝔼[RT]²` before clamping.
    pub variance: Vec<f64>,
    pub sd: Vec<f64>,
    pub label_mass: Vec<f64>,
    pub label_mean: Vec<f64>,
    pub label_second_moment: Vec<f64>,
    pub label_variance: Vec<f64>,
    pub label_sd: Vec<f64>,
}

impl RenewalStats {
    pub(crate) fn from_forward(fwd: &RenewalForward, states: &[usize]) -> Self {
        let n = fwd.z.len();
        let num_labels = fwd.label_mass.len();
        let variance: Vec<f64> = (0..n).map(|v| fwd.vertex_variance(v)).collect();
        let label_variance: Vec<f64> = (0..num_labels).map(|l| fwd.label_variance(l)).collect();
        Self {
            states: states.to_vec(),
            hitting: fwd.systems.iter().map(|s| s.as_ref().map_or_else(Vec::new, |s| s.x.clone())).collect(),
            hitting_sq: fwd.systems.iter().map(|s| s.as_ref().map_or_else(Vec::new, |s| s.y.clone())).collect(),
            mean: fwd.m1.clone(),
            second_moment: fwd.m2.clone(),
            sd: variance.iter().map(|v| v.max(0.0).sqrt()).collect(),
            variance,
            label_mass: fwd.label_mass.clone(),
            label_mean: fwd.label_m1.clone(),
            label_second_moment: fwd.label_m2.clone(),
            label_sd: label_variance.iter().map(|v| v.max(0.0).sqrt()).collect(),
            label_variance,
        }
    }
}

/// Renewal-time statistics of one BSCC under its invariant distribution.
pub fn renewal_statistics(
    chain: &InducedChain,
    bscc: &[usize],
    invariant: &InvariantDistribution,
) -> Result<RenewalStats> {
    if invariant.states != bscc {
        return Err(Error::InvalidConfig("invariant distribution belongs to a different BSCC".into()));
    }
    let local = LocalChain::new(chain, bscc)?;
    let z_lu = stationarity_matrix(&local.dense()).lu()?;
    let fwd = RenewalForward::with_invariant(&local, invariant.probs.clone(), z_lu)?;
    Ok(RenewalStats::from_forward(&fwd, bscc))
}

/// `Penalty₁ = Σ_ℓ 𝕀(ℓ)·SD(ℓ)` and `Penalty₂ = Σ_v 𝕀(v)·SD(v)`, with every
/// standard deviation smoothed as `√(max(Var, 0) + eps)`.
pub fn penalties(stats: &RenewalStats, invariant: &InvariantDistribution, eps: f64) -> (f64, f64) {
    let smooth = |v: f64| (v.max(0.0) + eps).sqrt();
    let p1 = stats
        .label_mass
        .iter()
        .zip(&stats.label_variance)
        .filter(|(m, _)| **m > 0.0)
        .map(|(m, v)| m * smooth(*v))
        .sum();
    let p2 = invariant.probs.iter().zip(&stats.variance).map(|(z, v)| z * smooth(*v)).sum();
    (p1, p2)
}
