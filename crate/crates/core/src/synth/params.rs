//! Raw optimizer parameters and their softmax realization as FR strategies.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::strategy::{AugmentedSpace, FrStrategy};

/// One softmax group: the parameters `theta[start..start + targets.len()]`
/// share a softmax whose output is scaled by `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    /// Augmented index of the row this group writes into.
    pub row: usize,
    pub scale: f64,
    pub start: usize,
    pub targets: Vec<usize>,
}

impl ParamGroup {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.targets.len()
    }
}

/// Group structure over the augmented edges. For a nondeterministic vertex
/// every augmented successor of `(v, m)` is in one group with scale 1; for a
/// stochastic vertex there is one group per successor `u`, covering the
/// memory states of `u` and scaled by `p(v)(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    groups: Vec<ParamGroup>,
    len: usize,
    num_states: usize,
}

impl ParamLayout {
    pub fn new(mdp: &Mdp, space: &AugmentedSpace) -> Self {
        let mut groups = Vec::new();
        let mut start = 0;
        for a in 0..space.len() {
            let v = space.vertex_of(a);
            if mdp.is_stochastic(v) {
                for &u in mdp.successors(v) {
                    let targets: Vec<usize> = space.copies(u).collect();
                    let len = targets.len();
                    groups.push(ParamGroup { row: a, scale: mdp.prob(v, u), start, targets });
                    start += len;
                }
            } else {
                let targets = space.successors(a).to_vec();
                let len = targets.len();
                groups.push(ParamGroup { row: a, scale: 1.0, start, targets });
                start += len;
            }
        }
        Self { groups, len: start, num_states: space.len() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    /// Per-parameter probabilities `scale · softmax(θ|_g)`.
    pub fn probabilities(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.len);
        let mut out = vec![0.0; self.len];
        for g in &self.groups {
            let r = g.range();
            let max = theta[r.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for i in r.clone() {
                out[i] = (theta[i] - max).exp();
                total += out[i];
            }
            for i in r {
                out[i] *= g.scale / total;
            }
        }
        out
    }

    /// Sparse strategy rows from per-parameter probabilities; zero entries
    /// (groups with zero scale) are omitted.
    pub fn rows(&self, probs: &[f64]) -> Vec<Vec<(usize, f64)>> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_states];
        for g in &self.groups {
            for (k, &t) in g.targets.iter().enumerate() {
                let p = probs[g.start + k];
                if p > 0.0 {
                    rows[g.row].push((t, p));
                }
            }
        }
        rows
    }

    /// Pulls an adjoint on probabilities back through the scaled softmax.
    /// `probs` must come from [`ParamLayout::probabilities`].
    pub fn softmax_backward(&self, probs: &[f64], prob_adjoint: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.len];
        for g in &self.groups {
            if g.scale == 0.0 {
                continue;
            }
            let r = g.range();
            // w = scale·softmax(θ): θ̄_k = w_k (w̄_k − Σ_j w_j w̄_j / scale)
            let dot: f64 = r.clone().map(|i| probs[i] * prob_adjoint[i]).sum::<f64>() / g.scale;
            for i in r {
                grad[i] = probs[i] * (prob_adjoint[i] - dot);
            }
        }
        grad
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub layout: ParamLayout,
    pub theta: Vec<f64>,
}

impl ParameterVector {
    pub fn new(layout: ParamLayout, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != layout.len() {
            return Err(Error::DimensionMismatch { expected: layout.len(), got: theta.len() });
        }
        Ok(Self { layout, theta })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Draws every parameter i.i.d. from LogUniform(a, b).
pub fn init_parameters(space: &AugmentedSpace, mdp: &Mdp, seed: u64, range: (f64, f64)) -> Result<ParameterVector> {
    let (a, b) = range;
    if !(0.0 < a && a < b) {
        return Err(Error::InvalidConfig(format!("LogUniform range ({a}, {b}) needs 0 < a < b")));
    }
    let layout = ParamLayout::new(mdp, space);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (la, lb) = (a.ln(), b.ln());
    let theta = (0..layout.len()).map(|_| rng.gen_range(la..lb).exp()).collect();
    Ok(ParameterVector { layout, theta })
}

pub fn realize_strategy(params: &ParameterVector) -> FrStrategy {
    let probs = params.layout.probabilities(&params.theta);
    FrStrategy::from_rows(params.layout.rows(&probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{MemoryAllocation, VertexKind};
    use crate::strategy::{build_augmented_space, validate_strategy};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn mixed() -> (Mdp, AugmentedSpace) {
        let mut b = Mdp::builder();
        let s = b.add_vertex("s", VertexKind::Stochastic);
        let u = b.add_vertex("u", VertexKind::Nondeterministic);
        let w = b.add_vertex("w", VertexKind::Nondeterministic);
        b.add_edge(s, u).add_edge(s, w).add_edge(u, s).add_edge(u, u).add_edge(w, s);
        b.set_prob(s, vec![(u, 0.5), (w, 0.5)]);
        let mdp = b.build().unwrap();
        let space = build_augmented_space(&mdp, &MemoryAllocation::new(vec![1, 2, 1]).unwrap()).unwrap();
        (mdp, space)
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let (mdp, space) = mixed();
        let a = init_parameters(&space, &mdp, 7, (1e-2, 1.0)).unwrap();
        let b = init_parameters(&space, &mdp, 7, (1e-2, 1.0)).unwrap();
        assert_eq!(a, b);
        assert!(a.theta.iter().all(|&t| (1e-2..1.0).contains(&t)));
        assert_ne!(a.theta, init_parameters(&space, &mdp, 8, (1e-2, 1.0)).unwrap().theta);
    }

    #[test]
    fn bad_range_rejected() {
        let (mdp, space) = mixed();
        assert!(init_parameters(&space, &mdp, 0, (1.0, 0.5)).is_err());
        assert!(init_parameters(&space, &mdp, 0, (0.0, 1.0)).is_err());
    }

    #[test]
    fn stochastic_groups_split_mass() {
        let (mdp, space) = mixed();
        let layout = ParamLayout::new(&mdp, &space);
        // s: group {u#1,u#2} and {w#1}; u#1, u#2: {s, u#1, u#2}; w: {s}
        assert_eq!(layout.groups().len(), 5);
        assert_eq!(layout.len(), 2 + 1 + 3 + 3 + 1);
        let params = ParameterVector::new(layout.clone(), vec![0.3; layout.len()]).unwrap();
        let sigma = realize_strategy(&params);
        assert_abs_diff_eq!(sigma.get(0, 1), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(sigma.get(0, 2), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(sigma.get(0, 3), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sigma.get(1, 0), 1.0 / 3.0, epsilon = 1e-15);
        assert!(validate_strategy(&space, &sigma, &mdp).is_ok());
    }

    proptest! {
        #[test]
        fn realized_strategies_are_valid(theta in proptest::collection::vec(-50.0f64..50.0, 10)) {
            let (mdp, space) = mixed();
            let layout = ParamLayout::new(&mdp, &space);
            let sigma = realize_strategy(&ParameterVector::new(layout, theta).unwrap());
            let report = validate_strategy(&space, &sigma, &mdp);
            prop_assert!(report.is_ok(), "{:?}", report);
        }
    }
}
