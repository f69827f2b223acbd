//! Benchmark instance families and their hand-built baseline strategies.

use crate::error::{Error, Result};
use crate::mdp::{Labeling, Mdp, MemoryAllocation};
use crate::strategy::{build_augmented_space, FrStrategy};

/// An MDP with memory allocation, identity labeling, target frequency and
/// recommended horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceBundle {
    pub id: String,
    pub mdp: Mdp,
    pub alloc: MemoryAllocation,
    pub labeling: Labeling,
    pub target: Vec<f64>,
    pub d: usize,
}

/// A fixed strategy together with the allocation it is defined over.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub name: String,
    pub alloc: MemoryAllocation,
    pub strategy: FrStrategy,
}

fn ring_mdp(n: usize) -> Result<Mdp> {
    let names: Vec<String> = (1..=n).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::with_capacity(2 * n);
    for i in 0..n {
        edges.push((i, i));
        edges.push((i, (i + 1) % n));
    }
    Mdp::graph(names, &edges)
}

fn ring_memory(n: usize) -> usize {
    n.div_ceil(2)
}

/// The ring `v1 → … → vn → v1` with self-loops. Vertex `vi` gets
/// `min(i, ⌈n/2⌉)` memory states and target frequency `i / s` with
/// `s = n(n+1)/2`, which is also the horizon.
pub fn gen_dn(n: usize) -> Result<InstanceBundle> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("ring instance needs n >= 2, got {n}")));
    }
    let mdp = ring_mdp(n)?;
    let m = ring_memory(n);
    let alloc = MemoryAllocation::new((1..=n).map(|i| i.min(m)).collect())?;
    let s = n * (n + 1) / 2;
    let target = (1..=n).map(|i| i as f64 / s as f64).collect();
    let labeling = Labeling::identity(&mdp);
    Ok(InstanceBundle { id: format!("d{n}"), mdp, alloc, labeling, target, d: s })
}

/// Ring strategy that walks through the memory states of each vertex. For
/// `i > ⌈n/2⌉` vertex `vi` self-loops either in its last memory state only or
/// in every memory state, with the probability that makes its frequency `i/s`.
fn ring_strategy(n: usize, randomize_every_state: bool) -> Result<FrStrategy> {
    let bundle = gen_dn(n)?;
    let space = build_augmented_space(&bundle.mdp, &bundle.alloc)?;
    let m = ring_memory(n);
    let mut rows = vec![Vec::new(); space.len()];
    for i in 1..=n {
        let v = i - 1;
        let next = space.index(i % n, 0).expect("first memory state");
        let k = bundle.alloc.get(v);
        for j in 0..k {
            let here = space.index(v, j).expect("memory state in range");
            let advance = if j + 1 < k { space.index(v, j + 1).expect("memory state in range") } else { next };
            let stay = if i <= m {
                0.0
            } else if randomize_every_state {
                (i - m) as f64 / i as f64
            } else if j + 1 == k {
                (i - m) as f64 / (i - m + 1) as f64
            } else {
                0.0
            };
            if stay > 0.0 {
                rows[here].push((here, stay));
            }
            rows[here].push((advance, 1.0 - stay));
        }
    }
    Ok(FrStrategy::from_rows(rows))
}

/// Walks deterministically through memory and randomizes only in the last
/// memory state of each vertex.
pub fn strategy_pi_n(n: usize) -> Result<FrStrategy> {
    ring_strategy(n, false)
}

/// Randomizes between the self-loop and advancing in every memory state.
pub fn strategy_rho_n(n: usize) -> Result<FrStrategy> {
    ring_strategy(n, true)
}

pub const RM_TARGET: [f64; 2] = [0.8, 0.2];
pub const RM_WINDOW_TARGET: [f64; 2] = [0.9, 0.1];

/// The two-vertex complete graph on `R` and `M` with `memory` states for `R`
/// and one for `M`. The default target is `(4/5, 1/5)` with horizon 5;
/// `window_target` selects `(9/10, 1/10)` with horizon 10.
pub fn rm_graph(memory: usize, window_target: bool) -> Result<InstanceBundle> {
    let mdp = Mdp::graph(["R", "M"], &[(0, 0), (0, 1), (1, 0), (1, 1)])?;
    let alloc = MemoryAllocation::new(vec![memory, 1])?;
    let labeling = Labeling::identity(&mdp);
    let (target, d) = if window_target { (RM_WINDOW_TARGET.to_vec(), 10) } else { (RM_TARGET.to_vec(), 5) };
    Ok(InstanceBundle { id: format!("rm-m{memory}"), mdp, alloc, labeling, target, d })
}

/// Memoryless strategy: `R` keeps `R` with `8/9 + y/9`; `M` keeps `M` with `y`.
pub fn rm_sigma_y(y: f64) -> Result<Baseline> {
    if !(0.0..1.0).contains(&y) {
        return Err(Error::InvalidConfig(format!("y must lie in [0, 1), got {y}")));
    }
    let keep_r = 8.0 / 9.0 + y / 9.0;
    let mut rows = vec![vec![(0, keep_r), (1, 1.0 - keep_r)], vec![(0, 1.0 - y)]];
    if y > 0.0 {
        rows[1].push((1, y));
    }
    Ok(Baseline {
        name: format!("sigma_y{y}"),
        alloc: MemoryAllocation::memoryless(2),
        strategy: FrStrategy::from_rows(rows),
    })
}

/// Deterministic cycle through nine `R` memory states and then `M`.
pub fn rm_pi10() -> Baseline {
    let mut rows: Vec<Vec<(usize, f64)>> = (0..9).map(|j| vec![(j + 1, 1.0)]).collect();
    rows.push(vec![(0, 1.0)]);
    Baseline {
        name: "pi10".into(),
        alloc: MemoryAllocation::new(vec![9, 1]).expect("positive counts"),
        strategy: FrStrategy::from_rows(rows),
    }
}

/// Four `R` memory states, each self-looping with `5/9` and advancing with
/// `4/9`; the last one advances to `M`, which returns to the first.
pub fn rm_eta() -> Baseline {
    let mut rows: Vec<Vec<(usize, f64)>> = (0..4).map(|j| vec![(j, 5.0 / 9.0), (j + 1, 4.0 / 9.0)]).collect();
    rows.push(vec![(0, 1.0)]);
    Baseline {
        name: "eta".into(),
        alloc: MemoryAllocation::new(vec![4, 1]).expect("positive counts"),
        strategy: FrStrategy::from_rows(rows),
    }
}

#[derive(Debug, Clone)]
pub struct RmInstances {
    pub graph: InstanceBundle,
    pub sigma_y0: Baseline,
    pub pi10: Baseline,
    pub eta: Baseline,
}

pub fn rm_instances() -> RmInstances {
    RmInstances {
        graph: rm_graph(1, false).expect("valid instance"),
        sigma_y0: rm_sigma_y(0.0).expect("y = 0 is valid"),
        pi10: rm_pi10(),
        eta: rm_eta(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bscc::decompose_bsccs;
    use crate::stationary::{invariant_distribution, vertex_marginal};
    use crate::strategy::{induced_chain, validate_strategy};
    use crate::synth::ParamLayout;

    fn marginal(bundle: &InstanceBundle, alloc: &MemoryAllocation, sigma: &FrStrategy) -> Vec<f64> {
        let space = build_augmented_space(&bundle.mdp, alloc).unwrap();
        assert!(validate_strategy(&space, sigma, &bundle.mdp).is_ok());
        let chain = induced_chain(&space, sigma, &bundle.labeling);
        let dec = decompose_bsccs(&chain);
        assert_eq!(dec.len(), 1);
        let z = invariant_distribution(&chain, &dec.bsccs[0]).unwrap();
        vertex_marginal(&z.to_full(space.len()), &space)
    }

    #[test]
    fn d4_shape() {
        let b = gen_dn(4).unwrap();
        assert_eq!(b.alloc.counts(), &[1, 2, 2, 2]);
        assert_eq!(b.d, 10);
        for (i, t) in b.target.iter().enumerate() {
            assert!((t - (i + 1) as f64 / 10.0).abs() < 1e-15);
        }
        let space = build_augmented_space(&b.mdp, &b.alloc).unwrap();
        assert_eq!(ParamLayout::new(&b.mdp, &space).len(), 25);
    }

    #[test]
    fn d2_target() {
        let b = gen_dn(2).unwrap();
        assert_eq!(b.d, 3);
        assert!((b.target[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!(gen_dn(1).is_err());
    }

    #[test]
    fn figure_probabilities_for_n4() {
        let b = gen_dn(4).unwrap();
        let space = build_augmented_space(&b.mdp, &b.alloc).unwrap();
        let pi = strategy_pi_n(4).unwrap();
        let v3_2 = space.index(2, 1).unwrap();
        let v4_2 = space.index(3, 1).unwrap();
        assert_eq!(pi.get(v3_2, v3_2), 0.5);
        assert!((pi.get(v4_2, v4_2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((pi.get(v4_2, space.index(0, 0).unwrap()) - 1.0 / 3.0).abs() < 1e-15);
        let rho = strategy_rho_n(4).unwrap();
        for j in 0..2 {
            let a = space.index(2, j).unwrap();
            assert!((rho.get(a, a) - 1.0 / 3.0).abs() < 1e-15);
            let b4 = space.index(3, j).unwrap();
            assert_eq!(rho.get(b4, b4), 0.5);
        }
        assert!((rho.get(space.index(2, 0).unwrap(), space.index(2, 1).unwrap()) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn n2_baselines_coincide() {
        assert_eq!(strategy_pi_n(2).unwrap(), strategy_rho_n(2).unwrap());
        let b = gen_dn(2).unwrap();
        let space = build_augmented_space(&b.mdp, &b.alloc).unwrap();
        let v2 = space.index(1, 0).unwrap();
        assert_eq!(strategy_pi_n(2).unwrap().get(v2, v2), 0.5);
    }

    #[test]
    fn baselines_hit_the_target() {
        for n in 2..=12 {
            let b = gen_dn(n).unwrap();
            for sigma in [strategy_pi_n(n).unwrap(), strategy_rho_n(n).unwrap()] {
                let mu = marginal(&b, &b.alloc, &sigma);
                for (a, t) in mu.iter().zip(&b.target) {
                    assert!((a - t).abs() < 1e-9, "n={n}: {mu:?}");
                }
            }
        }
    }

    #[test]
    fn rm_baselines() {
        let rm = rm_instances();
        assert_eq!(rm.graph.target, vec![0.8, 0.2]);
        for base in [&rm.sigma_y0, &rm.pi10, &rm.eta] {
            let mu = marginal(&rm.graph, &base.alloc, &base.strategy);
            assert!((mu[0] - 0.9).abs() < 1e-12, "{}: {mu:?}", base.name);
        }
        assert!(rm_sigma_y(1.0).is_err());
        assert!(rm_sigma_y(-0.1).is_err());
        let half = rm_sigma_y(0.5).unwrap();
        let mu = marginal(&rm.graph, &half.alloc, &half.strategy);
        assert!((mu[0] - 0.9).abs() < 1e-12);
    }
}
