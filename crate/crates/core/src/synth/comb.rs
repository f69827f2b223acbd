//! The combined objective: objective distance of the invariant label
//! frequencies plus weighted renewal-time penalties, and its exact gradient.

use serde::{Deserialize, Serialize};

use super::params::{ParamLayout, ParameterVector};
use super::renewal::RenewalForward;
use crate::bscc::{decompose_bsccs, LocalChain};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::mdp::{Labeling, Mdp, MemoryAllocation};
use crate::objective::Objective;
use crate::strategy::{build_augmented_space, induced_chain, AugmentedSpace, FrStrategy, InducedChain};

pub const DEFAULT_VAR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombWeights {
    /// Weight of the label-level penalty.
    pub beta: f64,
    /// Weight of the vertex-level penalty.
    pub gamma: f64,
    /// Smoothing added under every square root of a variance.
    pub var_eps: f64,
    /// Treat the normalizers `c1`, `c2` as constants in the gradient.
    pub freeze_normalizers: bool,
}

impl CombWeights {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        let w = Self { beta, gamma, var_eps: DEFAULT_VAR_EPS, freeze_normalizers: false };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.gamma >= 0.0 && self.beta + self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "weights need beta, gamma >= 0 and beta + gamma < 1 (got {}, {})",
                self.beta, self.gamma
            )));
        }
        if !(self.var_eps >= 0.0 && self.var_eps.is_finite()) {
            return Err(Error::InvalidConfig(format!("variance epsilon {} is invalid", self.var_eps)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BsccComb {
    pub bscc: usize,
    pub states: Vec<usize>,
    pub obj_value: f64,
    pub penalty1: f64,
    pub penalty2: f64,
    pub c1: f64,
    pub c2: f64,
    pub comb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CombBreakdown {
    pub beta: f64,
    pub gamma: f64,
    pub per_bscc: Vec<BsccComb>,
    /// Minimum over BSCCs.
    pub comb: f64,
    pub argmin: usize,
}

impl CombBreakdown {
    pub fn best(&self) -> &BsccComb {
        &self.per_bscc[self.argmin]
    }
}

struct BsccForward {
    local: LocalChain,
    renewal: RenewalForward,
    mu: Vec<f64>,
    vertex_sd: Vec<f64>,
    label_sd: Vec<f64>,
    summary: BsccComb,
}

fn smooth_sd(var: f64, eps: f64) -> f64 {
    (var.max(0.0) + eps).sqrt()
}

fn bscc_forward(
    chain: &InducedChain,
    id: usize,
    members: &[usize],
    obj: &Objective,
    w: &CombWeights,
) -> Result<BsccForward> {
    let local = LocalChain::new(chain, members)?;
    let renewal = RenewalForward::compute(&local)?;
    let mu = renewal.label_mass.clone();
    let obj_value = obj.eval_unchecked(&mu);

    let vertex_sd: Vec<f64> = (0..local.len()).map(|v| smooth_sd(renewal.vertex_variance(v), w.var_eps)).collect();
    let label_sd: Vec<f64> = (0..mu.len())
        .map(|l| if mu[l] > 0.0 { smooth_sd(renewal.label_variance(l), w.var_eps) } else { 0.0 })
        .collect();
    let penalty1: f64 = mu.iter().zip(&label_sd).map(|(m, s)| m * s).sum();
    let penalty2: f64 = renewal.z.iter().zip(&vertex_sd).map(|(z, s)| z * s).sum();
    let c1 = (obj_value + 1.0) / (penalty1 + 1.0);
    let c2 = (obj_value + 1.0) / (penalty2 + 1.0);
    let comb = (1.0 - w.beta - w.gamma) * obj_value + w.beta * c1 * penalty1 + w.gamma * c2 * penalty2;

    Ok(BsccForward {
        local,
        renewal,
        mu,
        vertex_sd,
        label_sd,
        summary: BsccComb { bscc: id, states: members.to_vec(), obj_value, penalty1, penalty2, c1, c2, comb },
    })
}

/// Adjoint of the comb scalar with respect to the local transition matrix.
fn bscc_backward(f: &BsccForward, obj: &Objective, w: &CombWeights) -> Result<DenseMatrix> {
    let r = &f.renewal;
    let s = &f.summary;
    let n = f.local.len();
    let num_labels = f.mu.len();
    let labels = &f.local.labels;

    let (g_obj, g_p1, g_p2) = if w.freeze_normalizers {
        (1.0 - w.beta - w.gamma, w.beta * s.c1, w.gamma * s.c2)
    } else {
        // c·p = (obj + 1)·p / (p + 1)
        (
            1.0 - w.beta - w.gamma
                + w.beta * s.penalty1 / (s.penalty1 + 1.0)
                + w.gamma * s.penalty2 / (s.penalty2 + 1.0),
            w.beta * (s.obj_value + 1.0) / ((s.penalty1 + 1.0) * (s.penalty1 + 1.0)),
            w.gamma * (s.obj_value + 1.0) / ((s.penalty2 + 1.0) * (s.penalty2 + 1.0)),
        )
    };

    let mut z_bar = vec![0.0; n];
    let mut m1_bar = vec![0.0; n];
    let mut m2_bar = vec![0.0; n];

    if g_obj != 0.0 {
        let grad_mu = obj.gradient(&f.mu)?;
        for v in 0..n {
            z_bar[v] += g_obj * grad_mu[labels[v]];
        }
    }

    if g_p2 != 0.0 {
        for v in 0..n {
            z_bar[v] += g_p2 * f.vertex_sd[v];
            if r.vertex_variance(v) > 0.0 {
                let var_bar = g_p2 * r.z[v] / (2.0 * f.vertex_sd[v]);
                m2_bar[v] += var_bar;
                m1_bar[v] -= 2.0 * r.m1[v] * var_bar;
            }
        }
    }

    if g_p1 != 0.0 {
        let mut mass_bar = vec![0.0; num_labels];
        let mut mean_bar = vec![0.0; num_labels];
        let mut second_bar = vec![0.0; num_labels];
        for l in 0..num_labels {
            let mass = f.mu[l];
            if mass <= 0.0 {
                continue;
            }
            mass_bar[l] = g_p1 * f.label_sd[l];
            if r.label_variance(l) > 0.0 {
                let var_bar = g_p1 * mass / (2.0 * f.label_sd[l]);
                second_bar[l] = var_bar / mass;
                mean_bar[l] = -2.0 * r.label_m1[l] * var_bar / mass;
            }
        }
        // label moments are z-weighted averages over the label's states
        for v in 0..n {
            let l = labels[v];
            if f.mu[l] <= 0.0 {
                continue;
            }
            z_bar[v] +=
                mass_bar[l] + mean_bar[l] * (r.m1[v] - r.label_m1[l]) + second_bar[l] * (r.m2[v] - r.label_m2[l]);
            m1_bar[v] += mean_bar[l] * r.z[v];
            m2_bar[v] += second_bar[l] * r.z[v];
        }
    }

    let mut p_bar = DenseMatrix::zeros(n, n);

    // m1_v = 1 + Σ_u P(v,u) x_u,  m2_v = 1 + Σ_u P(v,u) (2 x_u + y_u)
    let mut x_bar: Vec<Vec<f64>> = vec![Vec::new(); num_labels];
    let mut y_bar: Vec<Vec<f64>> = vec![Vec::new(); num_labels];
    for v in 0..n {
        if m1_bar[v] == 0.0 && m2_bar[v] == 0.0 {
            continue;
        }
        let l = labels[v];
        let sys = r.systems[l].as_ref().expect("label of a member is present");
        if x_bar[l].is_empty() {
            x_bar[l] = vec![0.0; n];
            y_bar[l] = vec![0.0; n];
        }
        for &(u, q) in &f.local.succ[v] {
            p_bar[(v, u)] += m1_bar[v] * sys.x[u] + m2_bar[v] * (2.0 * sys.x[u] + sys.y[u]);
            x_bar[l][u] += (m1_bar[v] + 2.0 * m2_bar[v]) * q;
            y_bar[l][u] += m2_bar[v] * q;
        }
    }

    // (I − P_TT) x_T = 1 and (I − P_TT) y_T = 2 x_T − 1
    for l in 0..num_labels {
        if x_bar[l].is_empty() {
            continue;
        }
        let sys = r.systems[l].as_ref().expect("adjoint only for present labels");
        let Some(lu) = &sys.lu else { continue };
        let yb: Vec<f64> = sys.others.iter().map(|&v| y_bar[l][v]).collect();
        let lam_y = lu.solve_transposed(&yb);
        let mut xb: Vec<f64> = sys.others.iter().map(|&v| x_bar[l][v]).collect();
        for (x, ly) in xb.iter_mut().zip(&lam_y) {
            *x += 2.0 * ly;
        }
        let lam_x = lu.solve_transposed(&xb);
        for (i, &vi) in sys.others.iter().enumerate() {
            let (ly, lx) = (lam_y[i], lam_x[i]);
            if ly == 0.0 && lx == 0.0 {
                continue;
            }
            for &(u, _) in &f.local.succ[vi] {
                if labels[u] != l {
                    p_bar[(vi, u)] += ly * sys.y[u] + lx * sys.x[u];
                }
            }
        }
    }

    // M z = e_last with M[i][j] = δ_ij − P[j][i] for i < n − 1
    let lam = r.z_lu.solve_transposed(&z_bar);
    for j in 0..n {
        for &(i, _) in &f.local.succ[j] {
            if i < n - 1 {
                p_bar[(j, i)] += lam[i] * r.z[j];
            }
        }
    }

    Ok(p_bar)
}

fn check_objective(chain: &InducedChain, obj: &Objective) -> Result<()> {
    if obj.num_labels() != chain.num_labels() {
        return Err(Error::DimensionMismatch { expected: chain.num_labels(), got: obj.num_labels() });
    }
    Ok(())
}

fn forward_all(chain: &InducedChain, obj: &Objective, w: &CombWeights) -> Result<Vec<BsccForward>> {
    w.validate()?;
    check_objective(chain, obj)?;
    let dec = decompose_bsccs(chain);
    dec.bsccs.iter().enumerate().map(|(id, members)| bscc_forward(chain, id, members, obj, w)).collect()
}

fn breakdown(fwds: &[BsccForward], w: &CombWeights) -> CombBreakdown {
    let mut argmin = 0;
    for (i, f) in fwds.iter().enumerate() {
        if f.summary.comb < fwds[argmin].summary.comb {
            argmin = i;
        }
    }
    CombBreakdown {
        beta: w.beta,
        gamma: w.gamma,
        comb: fwds[argmin].summary.comb,
        per_bscc: fwds.iter().map(|f| f.summary.clone()).collect(),
        argmin,
    }
}

/// Comb of every BSCC of the induced chain; the overall value is the minimum.
pub fn comb(chain: &InducedChain, obj: &Objective, weights: &CombWeights) -> Result<CombBreakdown> {
    let fwds = forward_all(chain, obj, weights)?;
    Ok(breakdown(&fwds, weights))
}

/// A fixed MDP, memory allocation, labeling and objective over which
/// parameter vectors are evaluated.
#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    pub mdp: Mdp,
    pub space: AugmentedSpace,
    pub layout: ParamLayout,
    pub labeling: Labeling,
    pub obj: Objective,
}

impl SynthesisProblem {
    pub fn new(mdp: &Mdp, alloc: &MemoryAllocation, labeling: &Labeling, obj: &Objective) -> Result<Self> {
        if labeling.num_vertices() != mdp.num_vertices() {
            return Err(Error::DimensionMismatch { expected: mdp.num_vertices(), got: labeling.num_vertices() });
        }
        if obj.num_labels() != labeling.num_labels() {
            return Err(Error::DimensionMismatch { expected: labeling.num_labels(), got: obj.num_labels() });
        }
        let space = build_augmented_space(mdp, alloc)?;
        let layout = ParamLayout::new(mdp, &space);
        Ok(Self { mdp: mdp.clone(), space, layout, labeling: labeling.clone(), obj: obj.clone() })
    }

    pub fn num_params(&self) -> usize {
        self.layout.len()
    }

    pub fn strategy(&self, theta: &[f64]) -> FrStrategy {
        FrStrategy::from_rows(self.layout.rows(&self.layout.probabilities(theta)))
    }

    pub fn chain(&self, sigma: &FrStrategy) -> InducedChain {
        induced_chain(&self.space, sigma, &self.labeling)
    }

    /// Comb at `theta`, and its gradient when `want_grad` is set. The gradient
    /// holds the minimizing BSCC fixed.
    pub fn evaluate(
        &self,
        theta: &[f64],
        weights: &CombWeights,
        want_grad: bool,
    ) -> Result<(CombBreakdown, Option<Vec<f64>>)> {
        if theta.len() != self.layout.len() {
            return Err(Error::DimensionMismatch { expected: self.layout.len(), got: theta.len() });
        }
        if want_grad && !self.obj.is_differentiable() {
            return Err(Error::NotDifferentiable);
        }
        let probs = self.layout.probabilities(theta);
        let sigma = FrStrategy::from_rows(self.layout.rows(&probs));
        let chain = self.chain(&sigma);
        let fwds = forward_all(&chain, &self.obj, weights)?;
        let out = breakdown(&fwds, weights);
        if !want_grad {
            return Ok((out, None));
        }

        let f = &fwds[out.argmin];
        let p_bar = bscc_backward(f, &self.obj, weights)?;
        let mut local_of = vec![usize::MAX; self.space.len()];
        for (i, &s) in f.local.states.iter().enumerate() {
            local_of[s] = i;
        }
        let mut prob_bar = vec![0.0; self.layout.len()];
        for g in self.layout.groups() {
            let lr = local_of[g.row];
            if lr == usize::MAX {
                continue;
            }
            for (k, &t) in g.targets.iter().enumerate() {
                let lt = local_of[t];
                if lt != usize::MAX {
                    prob_bar[g.start + k] = p_bar[(lr, lt)];
                }
            }
        }
        Ok((out, Some(self.layout.softmax_backward(&probs, &prob_bar))))
    }
}

/// Gradient of comb with respect to the raw parameters.
pub fn comb_gradient(
    params: &ParameterVector,
    mdp: &Mdp,
    alloc: &MemoryAllocation,
    labeling: &Labeling,
    obj: &Objective,
    weights: &CombWeights,
) -> Result<Vec<f64>> {
    let problem = SynthesisProblem::new(mdp, alloc, labeling, obj)?;
    if problem.layout != params.layout {
        return Err(Error::InvalidConfig("parameter layout does not match the MDP and allocation".into()));
    }
    let (_, grad) = problem.evaluate(&params.theta, weights, true)?;
    Ok(grad.expect("gradient requested"))
}
